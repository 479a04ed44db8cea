#pragma once

// End-to-end comparative run: one shared split, one embedding, all model
// kinds, a metrics report, loss curves and persisted models.
//
// Config (JSON, unknown keys rejected; relative paths resolve against the
// config file's directory):
//
//   {
//     "data": "corpus.csv",
//     "seed": 42,
//     "embedding": {"provider": "tfidf", "dim": 256, "seq_len": 512},
//     "split": {"ratios": [0.5, 0.25, 0.25], "seed": 42},
//     "grids": {"rf": {...}, "ridge": {...}, "gbt": {...}, "knn": {...}},
//     "train": {"max_epochs": 50, "batch_size": 64, "learning_rate": 0.001,
//               "patience": 5, "seed": 42},
//     "cv_folds": 5,
//     "models": ["rf", "ridge", ...],
//     "output": {"report": "report.csv", "curves": "curves.csv",
//                "models_dir": "models", "predictions": "predictions"}
//   }

#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "autograde/clex.hpp"
#include "autograde/corpus.hpp"
#include "autograde/metrics.hpp"
#include "autograde/model.hpp"

namespace autograde::experiment {

namespace fs = std::filesystem;

struct EmbeddingConfig {
  std::string provider = "tfidf";
  std::size_t dim = embed::kTfIdfDefaultDim;
  std::size_t seq_len = embed::kTfIdfDefaultSeqLen;
  std::string vectors;  // external provider only
};

struct OutputConfig {
  std::string report = "report.csv";
  std::string curves = "curves.csv";
  std::string models_dir = "models";
  std::string predictions;  // directory; empty = not written
};

struct ExperimentConfig {
  std::string data;
  std::uint64_t seed = 0;
  EmbeddingConfig embedding;
  corpus::SplitRatios ratios;
  std::uint64_t split_seed = 0;
  std::map<std::string, json> grids;  // by tabular kind
  nn::TrainConfig train;
  std::size_t cv_folds = 5;
  std::vector<ModelKind> models;
  OutputConfig output;
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.contains(key)) throw ValidationError("unknown config key '" + (where.empty() ? "" : where + ".") + key + "'");
  }
}

inline std::string resolve(const std::string& path, const fs::path& base) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
}

}  // namespace detail

// Throws ValidationError on schema problems; json type errors are mapped to
// ValidationError as well.
inline ExperimentConfig parse_config(const json& j, const fs::path& base_dir = {}) {
  using detail::check_keys;
  ExperimentConfig c;
  try {
    check_keys(j, {"data", "seed", "embedding", "split", "grids", "train", "cv_folds", "models", "output"}, "");
    if (!j.contains("data")) throw ValidationError("config needs 'data'");
    c.data = detail::resolve(j.at("data").get<std::string>(), base_dir);
    c.seed = j.value("seed", std::uint64_t{0});

    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      check_keys(e, {"provider", "dim", "seq_len", "vectors"}, "embedding");
      c.embedding.provider = e.value("provider", c.embedding.provider);
      c.embedding.dim = e.value("dim", c.embedding.dim);
      if (c.embedding.provider == "external") c.embedding.seq_len = embed::kExternalDefaultSeqLen;
      c.embedding.seq_len = e.value("seq_len", c.embedding.seq_len);
      c.embedding.vectors = detail::resolve(e.value("vectors", std::string{}), base_dir);
      if (c.embedding.provider != "tfidf" && c.embedding.provider != "external") {
        throw ValidationError("embedding.provider must be 'tfidf' or 'external'");
      }
      if (c.embedding.provider == "external" && c.embedding.vectors.empty()) {
        throw ValidationError("embedding.vectors is required for the external provider");
      }
    }

    c.split_seed = c.seed;
    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, {"ratios", "seed"}, "split");
      if (s.contains("ratios")) {
        const auto r = s.at("ratios").get<std::vector<double>>();
        if (r.size() != 3) throw ValidationError("split.ratios must have three entries");
        c.ratios = {r[0], r[1], r[2]};
      }
      c.split_seed = s.value("seed", c.split_seed);
    }

    if (j.contains("grids")) {
      const auto& g = j.at("grids");
      check_keys(g, {"rf", "ridge", "gbt", "knn"}, "grids");
      for (const auto& [kind, grid] : g.items()) {
        tabular::expand_grid(grid);  // shape check
        c.grids[kind] = grid;
      }
    }

    c.train.seed = c.seed;
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, {"max_epochs", "batch_size", "learning_rate", "patience", "seed"}, "train");
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.patience = t.value("patience", c.train.patience);
      c.train.seed = t.value("seed", c.train.seed);
    }
    c.train.validate();

    c.cv_folds = j.value("cv_folds", c.cv_folds);
    if (c.cv_folds < 2) throw ValidationError("cv_folds must be >= 2");

    if (j.contains("models")) {
      for (const auto& m : j.at("models")) {
        const auto kind = model_kind_from_string(m.get<std::string>());
        if (std::find(c.models.begin(), c.models.end(), kind) != c.models.end()) {
          throw ValidationError("model '" + to_string(kind) + "' listed twice");
        }
        c.models.push_back(kind);
      }
      if (c.models.empty()) throw ValidationError("models must not be empty");
    } else {
      for (const auto& name : model_kind_names()) c.models.push_back(model_kind_from_string(name));
    }

    if (j.contains("output")) {
      const auto& o = j.at("output");
      check_keys(o, {"report", "curves", "models_dir", "predictions"}, "output");
      c.output.report = o.value("report", c.output.report);
      c.output.curves = o.value("curves", c.output.curves);
      c.output.models_dir = o.value("models_dir", c.output.models_dir);
      c.output.predictions = o.value("predictions", c.output.predictions);
    }
    c.output.report = detail::resolve(c.output.report, base_dir);
    c.output.curves = detail::resolve(c.output.curves, base_dir);
    c.output.models_dir = detail::resolve(c.output.models_dir, base_dir);
    c.output.predictions = detail::resolve(c.output.predictions, base_dir);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, fs::path(path).parent_path());
}

// Embedded split: pooled features and token sequences side by side.
struct EmbeddedSplit {
  std::vector<std::string> ids;
  std::vector<embed::Embedding> embeddings;
  std::vector<double> y;

  tabular::FeatureMatrix features() const {
    std::vector<std::vector<double>> rows;
    rows.reserve(embeddings.size());
    for (const auto& e : embeddings) rows.push_back(e.pooled);
    return {Matrix::from_rows(rows), y};
  }

  std::vector<Sequence> sequences() const {
    std::vector<Sequence> out;
    out.reserve(embeddings.size());
    for (const auto& e : embeddings) {
      if (!e.sequence) throw ShapeError("embedding for '" + ids[out.size()] + "' has no token sequence");
      out.push_back(*e.sequence);
    }
    return out;
  }
};

inline EmbeddedSplit embed_split(const embed::EmbeddingProvider& p, const corpus::Dataset& ds) {
  EmbeddedSplit out;
  for (const auto& r : ds.rows) {
    out.ids.push_back(r.id);
    out.embeddings.push_back(p.embed(r.id, r.code));
    out.y.push_back(r.score);
  }
  return out;
}

inline std::shared_ptr<const embed::EmbeddingProvider> make_provider(const EmbeddingConfig& c,
                                                                     const corpus::Dataset& train) {
  if (c.provider == "external") {
    return embed::load_external_embeddings(c.vectors, c.seq_len, c.dim);
  }
  std::vector<clex::TokenStream> streams;
  streams.reserve(train.size());
  for (const auto& r : train.rows) streams.push_back(clex::tokenize(r.code));
  return std::make_shared<embed::TfIdfProvider>(embed::tfidf_fit(streams, c.dim, c.seq_len));
}

struct ModelOutcome {
  ModelKind kind = ModelKind::Rf;
  std::optional<GradingModel> model;
  std::optional<nn::TrainingHistory> history;
  std::optional<json> chosen_params;
  std::vector<double> train_predictions;
  std::vector<double> test_predictions;
  std::optional<std::string> error;
};

struct ExperimentResult {
  metrics::Report report;
  std::vector<ModelOutcome> outcomes;
  bool any_failed() const {
    return std::any_of(outcomes.begin(), outcomes.end(), [](const ModelOutcome& o) { return o.error.has_value(); });
  }
};

// Stream ids for seeds derived from the master seed.
inline constexpr std::uint64_t kCnnInitStream = 101;
inline constexpr std::uint64_t kLstmInitStream = 102;
inline constexpr std::uint64_t kCvStream = 103;
inline constexpr std::uint64_t kForestStream = 104;

struct Progress {
  virtual ~Progress() = default;
  virtual void message(const std::string&) {}
};

// Fits every configured model; per-model failures are captured, never
// thrown. Data, split and embedding errors propagate.
inline ExperimentResult run_models(const ExperimentConfig& cfg, const corpus::SplitDataset& parts,
                                   std::shared_ptr<const embed::EmbeddingProvider> provider,
                                   Progress* progress = nullptr) {
  Progress silent;
  Progress& log = progress ? *progress : silent;
  const auto train = embed_split(*provider, parts.train);
  const auto val = embed_split(*provider, parts.validation);
  const auto test = embed_split(*provider, parts.test);
  const auto train_fm = train.features();
  const double train_mean = std::accumulate(train.y.begin(), train.y.end(), 0.0) / static_cast<double>(train.y.size());
  const std::uint64_t cv_seed = derive_seed(cfg.seed, kCvStream);
  const std::uint64_t forest_seed = derive_seed(cfg.seed, kForestStream);

  auto grid_for = [&](ModelKind k) {
    const auto it = cfg.grids.find(to_string(k));
    return it != cfg.grids.end() ? it->second : tabular::default_grid(tabular_family(k));
  };
  auto wants = [&](ModelKind k) { return std::find(cfg.models.begin(), cfg.models.end(), k) != cfg.models.end(); };

  std::vector<Sequence> train_seq, val_seq;
  const bool any_neural = std::any_of(cfg.models.begin(), cfg.models.end(), needs_sequence);
  if (any_neural) {
    train_seq = train.sequences();
    val_seq = val.sequences();
  }

  // Each network is trained once and shared by its plain and hybrid rows;
  // the hybrid's first stage with the same seed and config is the same run.
  std::optional<nn::Cnn> cnn;
  std::optional<nn::Lstm> lstm;
  std::optional<nn::TrainingHistory> cnn_history, lstm_history;
  std::optional<std::string> cnn_error, lstm_error;

  auto train_net = [&](auto net, auto& slot, auto& history, auto& error, const char* name) {
    try {
      log.message(std::string("training ") + name);
      history = nn::train(net, train_seq, train.y, val_seq, val.y, cfg.train);
      slot = std::move(net);
    } catch (const Error& e) {
      error = std::string("network training: ") + e.what();
    }
  };
  auto input_dim = [&] { return provider->dimension(); };
  if (wants(ModelKind::Cnn) || wants(ModelKind::CnnRf)) {
    try {
      train_net(nn::Cnn(nn::CnnSpec{}, input_dim(), train_seq.front().rows(), derive_seed(cfg.seed, kCnnInitStream),
                        train_mean),
                cnn, cnn_history, cnn_error, "cnn");
    } catch (const Error& e) {
      cnn_error = std::string("network setup: ") + e.what();
    }
  }
  if (wants(ModelKind::Lstm) || wants(ModelKind::LstmRf)) {
    try {
      train_net(nn::Lstm(nn::LstmSpec{}, input_dim(), derive_seed(cfg.seed, kLstmInitStream), train_mean), lstm,
                lstm_history, lstm_error, "lstm");
    } catch (const Error& e) {
      lstm_error = std::string("network setup: ") + e.what();
    }
  }

  ExperimentResult result;
  for (const auto kind : cfg.models) {
    ModelOutcome o;
    o.kind = kind;
    try {
      log.message("fitting " + to_string(kind));
      GradingModel m;
      m.kind = kind;
      m.provider = provider;
      if (is_tabular(kind)) {
        const auto family = tabular_family(kind);
        const json base = family == tabular::Family::RandomForest ? json{{"seed", forest_seed}} : json::object();
        const auto search = tabular::grid_search_cv(family, grid_for(kind), train_fm, cfg.cv_folds, cv_seed, base);
        o.chosen_params = search.best_params;
        m.regressor = tabular::fit(family, search.best_params, train_fm);
      } else if (kind == ModelKind::Cnn || kind == ModelKind::Lstm) {
        const bool is_cnn = kind == ModelKind::Cnn;
        const auto& error = is_cnn ? cnn_error : lstm_error;
        if (error) throw Error(*error);
        if (is_cnn) {
          m.regressor = *cnn;
        } else {
          m.regressor = *lstm;
        }
        o.history = is_cnn ? cnn_history : lstm_history;
      } else {
        const bool is_cnn = kind == ModelKind::CnnRf;
        const auto& error = is_cnn ? cnn_error : lstm_error;
        if (error) throw Error(*error);
        hybrid::FeatureNet net;
        if (is_cnn) {
          net = *cnn;
        } else {
          net = *lstm;
        }
        auto fit = hybrid::hybrid_from_trained(is_cnn ? hybrid::HybridKind::CnnRf : hybrid::HybridKind::LstmRf,
                                               std::move(net), train_seq, train.y, std::nullopt, forest_seed,
                                               cfg.cv_folds, grid_for(ModelKind::Rf));
        o.chosen_params = fit.head_search.best_params;
        m.regressor = std::move(fit.model);
        o.history = is_cnn ? cnn_history : lstm_history;
      }
      for (const auto& e : train.embeddings) o.train_predictions.push_back(m.predict(e));
      for (const auto& e : test.embeddings) o.test_predictions.push_back(m.predict(e));
      result.report.rows.push_back(metrics::compute(to_string(kind), metrics::Split::Train, train.y, o.train_predictions));
      result.report.rows.push_back(metrics::compute(to_string(kind), metrics::Split::Test, test.y, o.test_predictions));
      o.model = std::move(m);
    } catch (const Error& e) {
      o.error = e.what();
      o.model.reset();
      // Drop any half-recorded rows for this model.
      std::erase_if(result.report.rows, [&](const metrics::MetricsRow& r) { return r.model_name == to_string(kind); });
      for (auto split : {metrics::Split::Train, metrics::Split::Test}) {
        metrics::MetricsRow r;
        r.model_name = to_string(kind);
        r.split = split;
        r.error = o.error;
        result.report.rows.push_back(std::move(r));
      }
    }
    result.outcomes.push_back(std::move(o));
  }
  return result;
}

inline std::string render_curves(const ExperimentResult& r) {
  std::string out = nn::curves_header();
  for (const auto& name : metrics::model_order()) {
    for (const auto& o : r.outcomes) {
      if (to_string(o.kind) == name && o.history && !o.error) out += nn::curves_rows(name, *o.history);
    }
  }
  return out;
}

// Writes report, curves, one model file per fitted kind and, when
// configured, per-model test predictions.
inline void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& r, const corpus::Dataset& test) {
  auto ensure_parent = [](const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
  };
  ensure_parent(cfg.output.report);
  write_file_atomic(cfg.output.report, metrics::render_report(r.report));
  ensure_parent(cfg.output.curves);
  write_file_atomic(cfg.output.curves, render_curves(r));
  fs::create_directories(cfg.output.models_dir);
  for (const auto& o : r.outcomes) {
    if (o.model) save_model(*o.model, (fs::path(cfg.output.models_dir) / (to_string(o.kind) + ".json")).string());
  }
  if (!cfg.output.predictions.empty()) {
    fs::create_directories(cfg.output.predictions);
    std::vector<std::string> ids;
    std::vector<double> actual;
    for (const auto& row : test.rows) {
      ids.push_back(row.id);
      actual.push_back(row.score);
    }
    for (const auto& o : r.outcomes) {
      if (!o.model) continue;
      write_file_atomic((fs::path(cfg.output.predictions) / (to_string(o.kind) + "_test.csv")).string(),
                        metrics::render_predictions(ids, actual, o.test_predictions));
    }
  }
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, Progress* progress = nullptr) {
  const auto ds = corpus::load_dataset(cfg.data);
  const auto parts = corpus::split(ds, cfg.ratios, cfg.split_seed);
  auto provider = make_provider(cfg.embedding, parts.train);
  auto result = run_models(cfg, parts, provider, progress);
  result.report.metadata = {cfg.data, cfg.seed, {}};
  write_outputs(cfg, result, parts.test);
  return result;
}

}  // namespace autograde::experiment
