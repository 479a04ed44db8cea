#pragma once

// Statistical regressors behind one value type, their hyperparameters as
// JSON objects, k-fold splitting and grid-search cross-validation.

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "autograde/forest.hpp"
#include "autograde/gbt.hpp"
#include "autograde/knn.hpp"
#include "autograde/ridge.hpp"
#include "autograde/rng.hpp"
#include "autograde/tree.hpp"

namespace autograde::tabular {

enum class Family { RandomForest, Ridge, Gbt, Knn };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::RandomForest: return "rf";
    case Family::Ridge: return "ridge";
    case Family::Gbt: return "gbt";
    case Family::Knn: return "knn";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "rf") return Family::RandomForest;
  if (s == "ridge") return Family::Ridge;
  if (s == "gbt") return Family::Gbt;
  if (s == "knn") return Family::Knn;
  throw ValidationError("unknown tabular model family '" + s + "'");
}

using TabularModel = std::variant<ForestModel, RidgeModel, GbtModel, KnnModel>;

inline double predict(const TabularModel& m, std::span<const double> x) {
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, ForestModel>) return rf_predict(model, x);
        if constexpr (std::is_same_v<T, RidgeModel>) return ridge_predict(model, x);
        if constexpr (std::is_same_v<T, GbtModel>) return gbt_predict(model, x);
        if constexpr (std::is_same_v<T, KnnModel>) return knn_predict(model, x);
      },
      m);
}

// ---------------------------------------------------------------------------
// Hyperparameters <-> JSON

namespace detail {

inline void reject_unknown(const json& params, std::initializer_list<const char*> allowed, Family f) {
  if (!params.is_object()) throw ValidationError("params for " + to_string(f) + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : params.items()) {
    if (!ok.contains(key)) throw ValidationError("unknown " + to_string(f) + " parameter '" + key + "'");
  }
}

inline std::optional<int> optional_depth(const json& params, const char* key, std::optional<int> fallback) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<int>();
}

inline json depth_json(const std::optional<int>& d) { return d ? json(*d) : json(nullptr); }

}  // namespace detail

inline ForestParams forest_params(const json& p) {
  detail::reject_unknown(p, {"n_trees", "max_depth", "min_samples_split", "min_samples_leaf", "feature_subsample",
                             "bootstrap", "seed"},
                         Family::RandomForest);
  ForestParams fp;
  fp.n_trees = p.value("n_trees", fp.n_trees);
  fp.tree.max_depth = detail::optional_depth(p, "max_depth", fp.tree.max_depth);
  fp.tree.min_samples_split = p.value("min_samples_split", fp.tree.min_samples_split);
  fp.tree.min_samples_leaf = p.value("min_samples_leaf", fp.tree.min_samples_leaf);
  fp.tree.feature_subsample = p.value("feature_subsample", fp.tree.feature_subsample);
  fp.bootstrap = p.value("bootstrap", fp.bootstrap);
  fp.seed = p.value("seed", fp.seed);
  return fp;
}

inline json to_json(const ForestParams& fp) {
  return {{"n_trees", fp.n_trees},
          {"max_depth", detail::depth_json(fp.tree.max_depth)},
          {"min_samples_split", fp.tree.min_samples_split},
          {"min_samples_leaf", fp.tree.min_samples_leaf},
          {"feature_subsample", fp.tree.feature_subsample},
          {"bootstrap", fp.bootstrap},
          {"seed", fp.seed}};
}

inline GbtParams gbt_params(const json& p) {
  detail::reject_unknown(p, {"n_rounds", "learning_rate", "max_depth", "leaf_l2"}, Family::Gbt);
  GbtParams gp;
  gp.n_rounds = p.value("n_rounds", gp.n_rounds);
  gp.learning_rate = p.value("learning_rate", gp.learning_rate);
  gp.max_depth = detail::optional_depth(p, "max_depth", gp.max_depth);
  gp.leaf_l2 = p.value("leaf_l2", gp.leaf_l2);
  return gp;
}

inline json to_json(const GbtParams& gp) {
  return {{"n_rounds", gp.n_rounds},
          {"learning_rate", gp.learning_rate},
          {"max_depth", detail::depth_json(gp.max_depth)},
          {"leaf_l2", gp.leaf_l2}};
}

inline double ridge_lambda(const json& p) {
  detail::reject_unknown(p, {"lambda"}, Family::Ridge);
  return p.value("lambda", 1.0);
}

inline std::size_t knn_k(const json& p) {
  detail::reject_unknown(p, {"k"}, Family::Knn);
  return p.value("k", std::size_t{5});
}

inline TabularModel fit(Family f, const json& params, const FeatureMatrix& data) {
  switch (f) {
    case Family::RandomForest: return rf_fit(data, forest_params(params));
    case Family::Ridge: return ridge_fit(data, ridge_lambda(params));
    case Family::Gbt: return gbt_fit(data, gbt_params(params));
    case Family::Knn: return knn_fit(data, knn_k(params));
  }
  throw ValidationError("unreachable model family");
}

// Grids used when none is configured.
inline json default_grid(Family f) {
  switch (f) {
    case Family::RandomForest:
      return {{"n_trees", {100}},
              {"max_depth", {nullptr, 8}},
              {"min_samples_split", {2, 4}},
              {"min_samples_leaf", {1, 2}}};
    case Family::Ridge: return {{"lambda", {0.01, 0.1, 1.0, 10.0, 100.0}}};
    case Family::Gbt:
      return {{"n_rounds", {100}}, {"learning_rate", {0.05, 0.1}}, {"max_depth", {2, 3}}, {"leaf_l2", {1.0}}};
    case Family::Knn: return {{"k", {3, 5, 7, 11}}};
  }
  return json::object();
}

// ---------------------------------------------------------------------------
// Model state <-> JSON

inline json state_to_json(const TabularModel& m) {
  return std::visit(
      [](const auto& model) -> json {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, ForestModel>) {
          json trees = json::array();
          for (const auto& t : model.trees) trees.push_back(tree_to_json(t));
          return {{"n_features", model.n_features()}, {"trees", trees}};
        } else if constexpr (std::is_same_v<T, RidgeModel>) {
          return {{"weights", model.weights}, {"bias", model.bias}};
        } else if constexpr (std::is_same_v<T, GbtModel>) {
          json trees = json::array();
          for (const auto& t : model.trees) trees.push_back(tree_to_json(t));
          const std::size_t nf = model.trees.empty() ? 0 : model.trees.front().n_features();
          return {{"base", model.base}, {"n_features", nf}, {"trees", trees}};
        } else {
          json rows = json::array();
          for (std::size_t i = 0; i < model.X.rows(); ++i) {
            auto r = model.X.row(i);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
          }
          return {{"X", rows}, {"y", model.y}};
        }
      },
      m);
}

inline json params_to_json(const TabularModel& m) {
  return std::visit(
      [](const auto& model) -> json {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, ForestModel>) return to_json(model.params);
        if constexpr (std::is_same_v<T, RidgeModel>) return {{"lambda", model.lambda}};
        if constexpr (std::is_same_v<T, GbtModel>) return to_json(model.params);
        if constexpr (std::is_same_v<T, KnnModel>) return {{"k", model.k}};
      },
      m);
}

inline Family family_of(const TabularModel& m) {
  switch (m.index()) {
    case 0: return Family::RandomForest;
    case 1: return Family::Ridge;
    case 2: return Family::Gbt;
    default: return Family::Knn;
  }
}

inline TabularModel from_json(Family f, const json& params, const json& state) {
  switch (f) {
    case Family::RandomForest: {
      ForestModel m;
      m.params = forest_params(params);
      const auto nf = state.at("n_features").get<std::size_t>();
      for (const auto& t : state.at("trees")) m.trees.push_back(tree_from_json(t, nf));
      return m;
    }
    case Family::Ridge: {
      RidgeModel m;
      m.lambda = ridge_lambda(params);
      m.weights = state.at("weights").get<std::vector<double>>();
      m.bias = state.at("bias").get<double>();
      return m;
    }
    case Family::Gbt: {
      GbtModel m;
      m.params = gbt_params(params);
      m.base = state.at("base").get<double>();
      const auto nf = state.at("n_features").get<std::size_t>();
      for (const auto& t : state.at("trees")) m.trees.push_back(tree_from_json(t, nf));
      return m;
    }
    case Family::Knn: {
      KnnModel m;
      m.k = knn_k(params);
      m.X = Matrix::from_rows(state.at("X").get<std::vector<std::vector<double>>>());
      m.y = state.at("y").get<std::vector<double>>();
      if (m.y.size() != m.X.rows()) throw ValidationError("knn state: X and y sizes differ");
      return m;
    }
  }
  throw ValidationError("unreachable model family");
}

// ---------------------------------------------------------------------------
// Cross-validation

// Seeded shuffle of [0,n), then contiguous chunks; the first n mod k folds
// get one extra index.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k = 5, std::uint64_t seed = 0) {
  if (k < 1) throw ValidationError("kfold: k must be >= 1");
  if (k > n) throw ValidationError("kfold: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

// Cartesian product of a {param: [values]} object. Keys iterate in sorted
// order and the last key varies fastest.
inline std::vector<json> expand_grid(const json& grid) {
  if (!grid.is_object() || grid.empty()) throw ValidationError("grid must be a non-empty object");
  std::vector<json> combos{json::object()};
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw ValidationError("grid entry '" + key + "' must be a non-empty array");
    }
    std::vector<json> next;
    for (const auto& c : combos) {
      for (const auto& v : values) {
        json e = c;
        e[key] = v;
        next.push_back(std::move(e));
      }
    }
    combos = std::move(next);
  }
  return combos;
}

struct GridEntry {
  json params;
  std::vector<double> fold_rmse;
  double mean_rmse = 0.0;
};

struct GridSearchResult {
  json best_params;
  std::vector<GridEntry> table;
};

inline double rmse_of(const TabularModel& m, const FeatureMatrix& held_out) {
  double s = 0.0;
  for (std::size_t i = 0; i < held_out.rows(); ++i) {
    const double e = predict(m, held_out.X.row(i)) - held_out.y[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(held_out.rows()));
}

// `base` supplies fixed params (e.g. a forest seed) that every combo inherits.
inline GridSearchResult grid_search_cv(Family family, const json& grid, const FeatureMatrix& data, std::size_t k = 5,
                                       std::uint64_t seed = 0, const json& base = json::object()) {
  data.validate();
  const auto folds = kfold_split(data.rows(), k, seed);
  GridSearchResult result;
  double best = 0.0;
  for (const auto& combo : expand_grid(grid)) {
    json params = base;
    params.update(combo);
    GridEntry entry{params, {}, 0.0};
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train_idx;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
      }
      try {
        const auto model = fit(family, params, data.subset(train_idx));
        entry.fold_rmse.push_back(rmse_of(model, data.subset(folds[f])));
      } catch (const Error& e) {
        throw Error(std::string(e.what()) + " [" + to_string(family) + " params " + params.dump() + "]");
      }
    }
    entry.mean_rmse = std::accumulate(entry.fold_rmse.begin(), entry.fold_rmse.end(), 0.0) /
                      static_cast<double>(entry.fold_rmse.size());
    if (result.table.empty() || entry.mean_rmse < best) {
      best = entry.mean_rmse;
      result.best_params = params;
    }
    result.table.push_back(std::move(entry));
  }
  return result;
}

}  // namespace autograde::tabular
