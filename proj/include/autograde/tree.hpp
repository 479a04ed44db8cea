#pragma once

// CART regression trees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autograde/error.hpp"
#include "autograde/matrix.hpp"
#include "autograde/rng.hpp"
#include "json.hpp"

namespace autograde::tabular {

using json = nlohmann::json;

// N x d design matrix plus N targets.
struct FeatureMatrix {
  Matrix X;
  std::vector<double> y;

  std::size_t rows() const noexcept { return X.rows(); }
  std::size_t cols() const noexcept { return X.cols(); }

  void validate() const {
    if (X.rows() < 1) throw ValidationError("feature matrix has no rows");
    if (y.size() != X.rows()) throw ShapeError("feature matrix: X and y row counts differ");
    for (double v : X.data()) {
      if (!std::isfinite(v)) throw ValidationError("feature matrix holds a non-finite value");
    }
    for (double v : y) {
      if (!std::isfinite(v)) throw ValidationError("non-finite target");
    }
  }

  FeatureMatrix subset(std::span<const std::size_t> idx) const {
    FeatureMatrix out{X.select_rows(idx), {}};
    out.y.reserve(idx.size());
    for (auto i : idx) out.y.push_back(y[i]);
    return out;
  }
};

inline double clamp_score(double v) { return std::clamp(v, 0.0, 10.0); }

struct TreeParams {
  std::optional<int> max_depth;  // empty = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  double feature_subsample = 1.0;  // fraction of features tried per node
  std::uint64_t seed = 0;

  void validate() const {
    if (max_depth && *max_depth < 0) throw ValidationError("max_depth must be >= 0");
    if (min_samples_split < 2) throw ValidationError("min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
    if (!(feature_subsample > 0.0 && feature_subsample <= 1.0)) {
      throw ValidationError("feature_subsample must be in (0,1]");
    }
  }
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;

    bool leaf() const noexcept { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  RegressionTree() = default;
  RegressionTree(std::vector<Node> nodes, std::size_t n_features)
      : nodes_(std::move(nodes)), n_features_(n_features) {}

  // Index of the leaf reached by x. Rows go left when x[f] <= threshold.
  std::size_t leaf_of(std::span<const double> x) const {
    if (x.size() != n_features_) {
      throw ShapeError("tree expects " + std::to_string(n_features_) + " features, got " +
                       std::to_string(x.size()));
    }
    std::size_t i = 0;
    while (!nodes_[i].leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return i;
  }

  double predict(std::span<const double> x) const { return nodes_[leaf_of(x)].value; }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<Node>& nodes() noexcept { return nodes_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf(); }));
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<Node> nodes_;
  std::size_t n_features_ = 0;
};

// Candidate impurities closer than this fraction of the node's SSE count as
// ties, which are resolved by scan order (feature, then threshold).
inline constexpr double kImpurityTieTolerance = 1e-9;

// Midpoint that still separates a < b after rounding.
inline double split_threshold(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return mid < b ? mid : a;
}

// Column-major copy of a design matrix plus each column's row order by
// value. Split search reads one feature at a time, so ensembles build this
// once and share it across trees.
class ColumnMajor {
 public:
  explicit ColumnMajor(const Matrix& X)
      : rows_(X.rows()), cols_(X.cols()), data_(X.rows() * X.cols()), order_(X.rows() * X.cols()) {
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) data_[c * rows_ + r] = X(r, c);
    }
    for (std::size_t c = 0; c < cols_; ++c) {
      auto* o = &order_[c * rows_];
      std::iota(o, o + rows_, std::uint32_t{0});
      const double* x = column(c);
      std::sort(o, o + rows_, [x](std::uint32_t a, std::uint32_t b) { return x[a] < x[b] || (x[a] == x[b] && a < b); });
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const double* column(std::size_t c) const noexcept { return data_.data() + c * rows_; }
  // Row indices of column c in ascending value order.
  const std::uint32_t* order(std::size_t c) const noexcept { return order_.data() + c * rows_; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
  std::vector<std::uint32_t> order_;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const ColumnMajor& X, std::span<const double> y, const TreeParams& p)
      : X_(X), y_(y), p_(p), rng_(p.seed), multiplicity_(X.rows(), 0) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    std::sort(rows.begin(), rows.end());
    grow(rows, 0);
    return RegressionTree(std::move(nodes_), X_.cols());
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
  };

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    // Row lists stay in ascending order, so the leaf mean sums targets in
    // original row order.
    double sum = 0.0;
    for (auto r : rows) sum += y_[r];
    const double mean = sum / static_cast<double>(rows.size());
    nodes_[static_cast<std::size_t>(id)].value = mean;

    const bool constant = std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return y_[r] == y_[rows[0]]; });
    if (constant || static_cast<int>(rows.size()) < p_.min_samples_split ||
        (p_.max_depth && depth >= *p_.max_depth)) {
      return id;
    }

    const Split s = best_split(rows, mean);
    if (s.feature < 0) return id;

    std::vector<std::size_t> left, right;
    const double* x = X_.column(static_cast<std::size_t>(s.feature));
    for (auto r : rows) (x[r] <= s.threshold ? left : right).push_back(r);
    const int l = grow(left, depth + 1);
    const int rgt = grow(right, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }

  // Features tried at a node, ascending. With subsampling, the first k
  // positions of a partial Fisher-Yates shuffle of [0,d).
  const std::vector<std::size_t>& candidate_features() {
    const std::size_t d = X_.cols();
    if (perm_.size() != d) {
      perm_.resize(d);
      std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    }
    if (p_.feature_subsample >= 1.0) return perm_;
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(p_.feature_subsample * static_cast<double>(d))), 1, d);
    swaps_.clear();
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng_.uniform_index(d - i);
      std::swap(perm_[i], perm_[j]);
      swaps_.push_back(j);
    }
    chosen_.assign(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = k; i-- > 0;) std::swap(perm_[i], perm_[swaps_[i]]);  // back to identity
    std::sort(chosen_.begin(), chosen_.end());
    return chosen_;
  }

  // Fills xs_/vs_ with the node's (x, centred y) pairs in ascending x.
  void sorted_column(std::size_t f, const std::vector<std::size_t>& rows, double mean, bool use_order) {
    const double* x = X_.column(f);
    const std::size_t n = rows.size();
    xs_.resize(n);
    vs_.resize(n);
    if (use_order) {
      const std::uint32_t* o = X_.order(f);
      std::size_t k = 0;
      for (std::size_t i = 0; i < X_.rows(); ++i) {
        const std::uint32_t r = o[i];
        for (std::uint32_t m = multiplicity_[r]; m > 0; --m, ++k) {
          xs_[k] = x[r];
          vs_[k] = y_[r] - mean;
        }
      }
      return;
    }
    idx_.assign(rows.begin(), rows.end());
    std::sort(idx_.begin(), idx_.end(), [x](std::size_t a, std::size_t b) { return x[a] < x[b] || (x[a] == x[b] && a < b); });
    for (std::size_t i = 0; i < n; ++i) {
      xs_[i] = x[idx_[i]];
      vs_[i] = y_[idx_[i]] - mean;
    }
  }

  Split best_split(const std::vector<std::size_t>& rows, double mean) {
    const std::size_t n = rows.size();
    const auto min_leaf = static_cast<std::size_t>(p_.min_samples_leaf);
    if (n < 2 * min_leaf) return {};

    // Targets centred on the node mean keep the running-sum SSE accurate.
    double node_sse = 0.0;
    for (auto r : rows) node_sse += (y_[r] - mean) * (y_[r] - mean);
    const double tol = kImpurityTieTolerance * node_sse;

    // Large nodes walk the presorted column order instead of sorting.
    const bool use_order = static_cast<double>(n) * std::log2(static_cast<double>(n) + 1.0) > static_cast<double>(X_.rows());
    if (use_order) {
      for (auto r : rows) ++multiplicity_[r];
    }

    Split best;
    double best_impurity = 0.0;
    for (std::size_t f : candidate_features()) {
      const double* x = X_.column(f);
      bool varies = false;
      for (std::size_t i = 1; i < n && !varies; ++i) varies = x[rows[i]] != x[rows[0]];
      if (!varies) continue;
      sorted_column(f, rows, mean, use_order);

      double total_sum = 0.0, total_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        total_sum += vs_[i];
        total_sq += vs_[i] * vs_[i];
      }
      double ls = 0.0, lq = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ls += vs_[i];
        lq += vs_[i] * vs_[i];
        if (xs_[i] == xs_[i + 1]) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double rs = total_sum - ls, rq = total_sq - lq;
        const double impurity = (lq - ls * ls / static_cast<double>(nl)) + (rq - rs * rs / static_cast<double>(nr));
        if (best.feature < 0 || impurity < best_impurity - tol) {
          best.feature = static_cast<int>(f);
          best.threshold = split_threshold(xs_[i], xs_[i + 1]);
          best_impurity = impurity;
        }
      }
    }
    if (use_order) {
      for (auto r : rows) --multiplicity_[r];
    }
    return best;
  }

  const ColumnMajor& X_;
  std::span<const double> y_;
  const TreeParams& p_;
  Rng rng_;
  std::vector<RegressionTree::Node> nodes_;
  std::vector<std::uint32_t> multiplicity_;  // per row, for the current node
  std::vector<std::size_t> perm_, swaps_, chosen_, idx_;
  std::vector<double> xs_, vs_;
};

}  // namespace detail

// Fits on the given rows of (X, y); duplicates (bootstrap draws) allowed.
inline RegressionTree tree_fit(const ColumnMajor& X, std::span<const double> y, std::vector<std::size_t> rows,
                               const TreeParams& p) {
  p.validate();
  if (rows.empty()) throw ValidationError("tree_fit: no rows");
  if (y.size() != X.rows()) throw ShapeError("tree_fit: X and y row counts differ");
  return detail::TreeBuilder(X, y, p).build(std::move(rows));
}

inline RegressionTree tree_fit(const Matrix& X, std::span<const double> y, std::vector<std::size_t> rows,
                               const TreeParams& p) {
  return tree_fit(ColumnMajor(X), y, std::move(rows), p);
}

inline RegressionTree tree_fit(const FeatureMatrix& data, const TreeParams& p = {}) {
  data.validate();
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return tree_fit(data.X, data.y, std::move(rows), p);
}

// Nested-node JSON: {"feature":i,"threshold":t,"left":...,"right":...} / {"leaf":v}
inline json tree_to_json(const RegressionTree& t, std::size_t node = 0) {
  const auto& n = t.nodes()[node];
  if (n.leaf()) return {{"leaf", n.value}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", tree_to_json(t, static_cast<std::size_t>(n.left))},
          {"right", tree_to_json(t, static_cast<std::size_t>(n.right))}};
}

namespace detail {
inline int tree_nodes_from_json(const json& j, std::vector<RegressionTree::Node>& out) {
  const int id = static_cast<int>(out.size());
  out.emplace_back();
  if (j.contains("leaf")) {
    out[static_cast<std::size_t>(id)].value = j.at("leaf").get<double>();
    return id;
  }
  const int l = tree_nodes_from_json(j.at("left"), out);
  const int r = tree_nodes_from_json(j.at("right"), out);
  auto& n = out[static_cast<std::size_t>(id)];
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  n.left = l;
  n.right = r;
  return id;
}
}  // namespace detail

inline RegressionTree tree_from_json(const json& j, std::size_t n_features) {
  std::vector<RegressionTree::Node> nodes;
  detail::tree_nodes_from_json(j, nodes);
  for (const auto& n : nodes) {
    if (!n.leaf() && static_cast<std::size_t>(n.feature) >= n_features) {
      throw ValidationError("tree node references feature beyond input dimension");
    }
  }
  return RegressionTree(std::move(nodes), n_features);
}

}  // namespace autograde::tabular
