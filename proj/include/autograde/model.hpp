#pragma once

// One persisted grading model: an embedding provider plus any of the eight
// regressor kinds. Tabular kinds read the pooled vector, neural and hybrid
// kinds read the token sequence.

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>

#include "autograde/embed.hpp"
#include "autograde/hybrid.hpp"
#include "autograde/tabular.hpp"

namespace autograde {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

enum class ModelKind { Rf, Ridge, Gbt, Knn, Cnn, Lstm, CnnRf, LstmRf };

inline const std::vector<std::string>& model_kind_names() {
  static const std::vector<std::string> names = {"rf", "ridge", "gbt", "knn", "cnn", "lstm", "cnn_rf", "lstm_rf"};
  return names;
}

inline std::string to_string(ModelKind k) { return model_kind_names()[static_cast<std::size_t>(k)]; }

inline ModelKind model_kind_from_string(const std::string& s) {
  const auto& names = model_kind_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == s) return static_cast<ModelKind>(i);
  }
  throw ValidationError("unknown model kind '" + s + "'");
}

inline bool is_tabular(ModelKind k) { return k <= ModelKind::Knn; }
inline bool needs_sequence(ModelKind k) { return !is_tabular(k); }

inline tabular::Family tabular_family(ModelKind k) {
  switch (k) {
    case ModelKind::Rf: return tabular::Family::RandomForest;
    case ModelKind::Ridge: return tabular::Family::Ridge;
    case ModelKind::Gbt: return tabular::Family::Gbt;
    case ModelKind::Knn: return tabular::Family::Knn;
    default: throw ValidationError(to_string(k) + " is not a tabular model");
  }
}

using Regressor = std::variant<tabular::TabularModel, nn::Cnn, nn::Lstm, hybrid::HybridModel>;

struct GradingModel {
  ModelKind kind = ModelKind::Rf;
  std::shared_ptr<const embed::EmbeddingProvider> provider;
  Regressor regressor;

  // Score in [0,10].
  double predict(const embed::Embedding& e) const {
    return std::visit(
        [&](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, tabular::TabularModel>) {
            return tabular::predict(r, e.pooled);
          } else {
            if (!e.sequence) throw ShapeError(to_string(kind) + " needs a token sequence embedding");
            if constexpr (std::is_same_v<T, hybrid::HybridModel>) {
              return hybrid::hybrid_predict(r, *e.sequence);
            } else {
              return tabular::clamp_score(r.predict(*e.sequence));
            }
          }
        },
        regressor);
  }

  double grade_code(std::string_view code) const { return predict(provider->embed_code(code)); }
};

inline json to_json(const GradingModel& m) {
  json j{{"format_version", kModelFormatVersion}, {"model", to_string(m.kind)}, {"embedding", m.provider->config()}};
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, tabular::TabularModel>) {
          j["params"] = tabular::params_to_json(r);
          j["state"] = tabular::state_to_json(r);
        } else if constexpr (std::is_same_v<T, hybrid::HybridModel>) {
          j["state"] = hybrid::to_json(r);
        } else {
          j["state"] = r.to_json();
        }
      },
      m.regressor);
  return j;
}

inline GradingModel model_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("unsupported model format_version " + std::to_string(version), 0);
    }
    GradingModel m;
    m.kind = model_kind_from_string(j.at("model").get<std::string>());
    m.provider = embed::provider_from_config(j.at("embedding"));
    const auto& state = j.at("state");
    switch (m.kind) {
      case ModelKind::Cnn: m.regressor = nn::Cnn::from_json(state); break;
      case ModelKind::Lstm: m.regressor = nn::Lstm::from_json(state); break;
      case ModelKind::CnnRf:
      case ModelKind::LstmRf: {
        auto h = hybrid::hybrid_from_json(state);
        if (hybrid::to_string(h.kind) != to_string(m.kind)) throw FormatError("hybrid kind mismatch", 0);
        m.regressor = std::move(h);
        break;
      }
      default: m.regressor = tabular::from_json(tabular_family(m.kind), j.at("params"), state);
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what(), 0);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes `path` via a sibling temporary and a rename.
inline void write_file_atomic(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename '" + tmp + "' to '" + path + "'");
}

inline void save_model(const GradingModel& m, const std::string& path) {
  write_file_atomic(path, to_json(m).dump() + "\n");
}

inline GradingModel load_model(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("model file '" + path + "' is not valid JSON: " + e.what(), 0);
  }
  return model_from_json(j);
}

}  // namespace autograde
