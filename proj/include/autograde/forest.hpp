#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "autograde/rng.hpp"
#include "autograde/tree.hpp"

namespace autograde::tabular {

struct ForestParams {
  std::size_t n_trees = 100;
  TreeParams tree = [] {
    TreeParams t;
    t.feature_subsample = 1.0 / 3.0;
    return t;
  }();
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw ValidationError("n_trees must be >= 1");
    tree.validate();
  }
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestParams params;

  std::size_t n_features() const { return trees.empty() ? 0 : trees.front().n_features(); }

  // Mean of tree outputs, before clamping.
  double predict_raw(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
  }
};

// Tree t uses seed derive_seed(seed, t) for its bootstrap draw and its
// per-node feature sampling.
inline ForestModel rf_fit(const FeatureMatrix& data, const ForestParams& p = {}) {
  data.validate();
  p.validate();
  const std::size_t n = data.rows();
  ForestModel m;
  m.params = p;
  m.trees.reserve(p.n_trees);
  const ColumnMajor columns(data.X);
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(p.seed, t);
    std::vector<std::size_t> rows(n);
    if (p.bootstrap) {
      Rng rng(tree_seed);
      for (auto& r : rows) r = rng.uniform_index(n);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    TreeParams tp = p.tree;
    tp.seed = derive_seed(tree_seed, 1);
    m.trees.push_back(tree_fit(columns, data.y, std::move(rows), tp));
  }
  return m;
}

inline double rf_predict(const ForestModel& m, std::span<const double> x) {
  return clamp_score(m.predict_raw(x));
}

}  // namespace autograde::tabular
