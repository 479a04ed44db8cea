#pragma once

// Neural feature extractor with its dense head replaced by a random forest.
// Stage 1 trains the full network, stage 2 extracts frozen features over the
// training split, stage 3 fits the forest on them.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "autograde/forest.hpp"
#include "autograde/tabular.hpp"
#include "autograde/train.hpp"

namespace autograde::hybrid {

using json = nlohmann::json;

using tabular::ForestModel;
using tabular::ForestParams;

enum class HybridKind { CnnRf, LstmRf };

inline std::string to_string(HybridKind k) { return k == HybridKind::CnnRf ? "cnn_rf" : "lstm_rf"; }

using FeatureNet = std::variant<nn::Cnn, nn::Lstm>;

inline std::vector<double> extract_features(const FeatureNet& net, const Sequence& x) {
  return std::visit([&](const auto& n) { return n.features(x); }, net);
}

inline std::size_t feature_length(const FeatureNet& net) {
  if (const auto* c = std::get_if<nn::Cnn>(&net)) return c->feature_length();
  return std::get<nn::Lstm>(net).spec().units;
}

struct HybridModel {
  HybridKind kind = HybridKind::CnnRf;
  FeatureNet feature_net;
  ForestModel head;
};

struct HybridFit {
  HybridModel model;
  nn::TrainingHistory history;
  tabular::GridSearchResult head_search;  // empty table when the head params were given
};

// Runs `f` and prefixes any library error with the stage label.
template <class F>
decltype(auto) staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const TrainingError& e) {
    throw TrainingError(std::string(stage) + ": " + e.what(), e.epoch());
  } catch (const Error& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

inline tabular::FeatureMatrix feature_matrix(const FeatureNet& net, std::span<const Sequence> xs,
                                             std::span<const double> ys) {
  std::vector<std::vector<double>> rows;
  if (const auto* lstm = std::get_if<nn::Lstm>(&net)) {
    rows = lstm->features_many(xs);
  } else {
    rows.reserve(xs.size());
    for (const auto& x : xs) rows.push_back(extract_features(net, x));
  }
  return {Matrix::from_rows(rows), std::vector<double>(ys.begin(), ys.end())};
}

// Stages 2 and 3 on an already trained network. The head is fitted with
// `head_params` when given, otherwise chosen by grid search over the default
// forest grid.
inline HybridFit hybrid_from_trained(HybridKind kind, FeatureNet net, std::span<const Sequence> train_x,
                                     std::span<const double> train_y, const std::optional<json>& head_params,
                                     std::uint64_t seed, std::size_t cv_folds = 5,
                                     const json& grid = tabular::default_grid(tabular::Family::RandomForest)) {
  if ((kind == HybridKind::CnnRf) != std::holds_alternative<nn::Cnn>(net)) {
    throw ValidationError("hybrid kind does not match the feature network");
  }
  HybridFit out;
  const auto features = staged("feature extraction", [&] { return feature_matrix(net, train_x, train_y); });
  json params;
  if (head_params) {
    params = *head_params;
  } else {
    out.head_search = staged("head grid search", [&] {
      return tabular::grid_search_cv(tabular::Family::RandomForest, grid, features, cv_folds, seed,
                                     json{{"seed", seed}});
    });
    params = out.head_search.best_params;
  }
  out.model.head = staged("head fit", [&] { return tabular::rf_fit(features, tabular::forest_params(params)); });
  out.model.kind = kind;
  out.model.feature_net = std::move(net);
  return out;
}

// Full three-stage fit. `net` is the untrained network.
inline HybridFit hybrid_fit(HybridKind kind, FeatureNet net, std::span<const Sequence> train_x,
                            std::span<const double> train_y, std::span<const Sequence> val_x,
                            std::span<const double> val_y, const nn::TrainConfig& cfg,
                            const std::optional<json>& head_params = std::nullopt, std::size_t cv_folds = 5) {
  if (train_x.empty() || val_x.empty()) throw ValidationError("hybrid_fit: empty split");
  nn::TrainingHistory history = staged("network training", [&] {
    return std::visit([&](auto& n) { return nn::train(n, train_x, train_y, val_x, val_y, cfg); }, net);
  });
  auto out = hybrid_from_trained(kind, std::move(net), train_x, train_y, head_params, cfg.seed, cv_folds);
  out.history = std::move(history);
  return out;
}

inline double hybrid_predict(const HybridModel& m, const Sequence& x) {
  return tabular::rf_predict(m.head, extract_features(m.feature_net, x));
}

inline json to_json(const HybridModel& m) {
  return {{"kind", to_string(m.kind)},
          {"feature_net", std::visit([](const auto& n) { return n.to_json(); }, m.feature_net)},
          {"head", {{"params", tabular::to_json(m.head.params)}, {"state", tabular::state_to_json(m.head)}}}};
}

inline HybridModel hybrid_from_json(const json& j) {
  HybridModel m;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "cnn_rf") {
    m.kind = HybridKind::CnnRf;
    m.feature_net = nn::Cnn::from_json(j.at("feature_net"));
  } else if (kind == "lstm_rf") {
    m.kind = HybridKind::LstmRf;
    m.feature_net = nn::Lstm::from_json(j.at("feature_net"));
  } else {
    throw ValidationError("unknown hybrid kind '" + kind + "'");
  }
  const auto& head = j.at("head");
  m.head = std::get<ForestModel>(
      tabular::from_json(tabular::Family::RandomForest, head.at("params"), head.at("state")));
  if (m.head.n_features() != feature_length(m.feature_net)) {
    throw ValidationError("hybrid head width does not match the feature length");
  }
  return m;
}

}  // namespace autograde::hybrid
