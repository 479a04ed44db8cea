#pragma once

// Gradient-boosted regression trees on squared loss. Each round fits a CART
// tree to the current residuals and replaces its leaf values with the
// L2-shrunk mean  sum(residual) / (count + leaf_l2).

#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "autograde/tree.hpp"

namespace autograde::tabular {

struct GbtParams {
  std::size_t n_rounds = 100;
  double learning_rate = 0.1;
  std::optional<int> max_depth = 3;
  double leaf_l2 = 1.0;

  void validate() const {
    if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) throw ValidationError("learning_rate must be in [0,1]");
    if (!(leaf_l2 >= 0.0)) throw ValidationError("leaf_l2 must be >= 0");
    if (max_depth && *max_depth < 0) throw ValidationError("max_depth must be >= 0");
  }
};

struct GbtModel {
  double base = 0.0;
  std::vector<RegressionTree> trees;
  GbtParams params;

  double predict_raw(std::span<const double> x) const {
    double s = base;
    for (const auto& t : trees) s += params.learning_rate * t.predict(x);
    return s;
  }
};

// `on_round(round, training_predictions)` is called after every round.
template <class OnRound>
GbtModel gbt_fit(const FeatureMatrix& data, const GbtParams& p, OnRound&& on_round) {
  data.validate();
  p.validate();
  const std::size_t n = data.rows();
  GbtModel m;
  m.params = p;
  m.base = std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> pred(n, m.base);
  std::vector<double> residual(n);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  TreeParams tp;
  tp.max_depth = p.max_depth;
  const ColumnMajor columns(data.X);

  for (std::size_t round = 0; round < p.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = data.y[i] - pred[i];
    RegressionTree tree = tree_fit(columns, residual, rows, tp);

    std::vector<double> leaf_sum(tree.nodes().size(), 0.0);
    std::vector<double> leaf_count(tree.nodes().size(), 0.0);
    std::vector<std::size_t> leaf_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      leaf_of[i] = tree.leaf_of(data.X.row(i));
      leaf_sum[leaf_of[i]] += residual[i];
      leaf_count[leaf_of[i]] += 1.0;
    }
    for (std::size_t j = 0; j < tree.nodes().size(); ++j) {
      auto& node = tree.nodes()[j];
      if (node.leaf() && leaf_count[j] > 0.0) node.value = leaf_sum[j] / (leaf_count[j] + p.leaf_l2);
    }
    for (std::size_t i = 0; i < n; ++i) pred[i] += p.learning_rate * tree.nodes()[leaf_of[i]].value;
    m.trees.push_back(std::move(tree));
    on_round(round, std::span<const double>(pred));
  }
  return m;
}

inline GbtModel gbt_fit(const FeatureMatrix& data, const GbtParams& p = {}) {
  return gbt_fit(data, p, [](std::size_t, std::span<const double>) {});
}

inline double gbt_predict(const GbtModel& m, std::span<const double> x) { return clamp_score(m.predict_raw(x)); }

}  // namespace autograde::tabular
