// autograde: synthesize rubric-scored corpora, train grading models, grade
// single files and run the full comparative experiment.
//
// Exit codes: 0 success, 1 partial experiment failure, 2 usage/config
// error, 3 fit error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autograde/experiment.hpp"
#include "autograde/synth.hpp"

namespace fs = std::filesystem;
using namespace autograde;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kUsage = 2;
constexpr int kFit = 3;

int fail(int code, const std::string& msg) {
  std::cerr << "autograde: " << msg << "\n";
  return code;
}

struct StderrProgress : experiment::Progress {
  void message(const std::string& m) override { std::cerr << "[autograde] " << m << "\n"; }
};

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string seeds_dir;
  std::size_t count = 0;
  std::string out;
  std::uint64_t seed = 0;
  std::string plans;
};

int cmd_synth(const SynthArgs& a) {
  std::vector<corpus::Submission> seeds;
  try {
    if (!fs::is_directory(a.seeds_dir)) return fail(kUsage, "seed directory '" + a.seeds_dir + "' not found");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.seeds_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".c") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) seeds.push_back({f.stem().string(), read_file(f.string()), 10.0});
  } catch (const std::exception& e) {
    return fail(kUsage, e.what());
  }
  if (seeds.empty()) return fail(kUsage, "no .c files in '" + a.seeds_dir + "'");

  synth::SynthResult result;
  try {
    result = synth::synthesize(seeds, a.count, synth::Rubric{}, a.seed);
  } catch (const NotMutable& e) {
    return fail(kUsage, e.what());
  } catch (const ValidationError& e) {
    return fail(kUsage, e.what());
  }

  try {
    write_file_atomic(a.out, corpus::to_csv(result.dataset));
    if (!a.plans.empty()) write_file_atomic(a.plans, synth::plans_to_csv(result));
  } catch (const Error& e) {
    return fail(kUsage, e.what());
  }

  const auto stats = corpus::dataset_stats(result.dataset);
  std::cout << "rows " << stats.row_count << "\n";
  for (const auto& [score, n] : stats.score_histogram) {
    std::cout << "score " << corpus::detail::format_score(score) << " " << n << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string model;
  std::string embedding = "tfidf";
  std::size_t dim = embed::kTfIdfDefaultDim;
  std::size_t seq_len = embed::kTfIdfDefaultSeqLen;
  std::string vectors;
  std::string split = "0.5,0.25,0.25";
  std::uint64_t seed = 0;
  std::string out;
  std::string grid;
  nn::TrainConfig train;
  std::size_t cv_folds = 5;
};

corpus::SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> r;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw ValidationError("bad split ratio '" + part + "'");
    r.push_back(v);
  }
  if (r.size() != 3) throw ValidationError("--split needs three comma-separated ratios");
  return {r[0], r[1], r[2]};
}

void print_metrics(const metrics::MetricsRow& r, const char* split) {
  std::printf("%s %s rmse=%s mae=%s r2=%s mape=%s\n", r.model_name.c_str(), split, metrics::format_fixed(r.rmse).c_str(),
              metrics::format_fixed(r.mae).c_str(), metrics::format_fixed(r.r2).c_str(),
              metrics::format_fixed(r.mape).c_str());
}

int cmd_train(TrainArgs a) {
  experiment::ExperimentConfig cfg;
  corpus::SplitDataset parts;
  std::shared_ptr<const embed::EmbeddingProvider> provider;
  ModelKind kind{};
  try {
    kind = model_kind_from_string(a.model);
    cfg.data = a.data;
    cfg.seed = a.seed;
    cfg.embedding = {a.embedding, a.dim, a.seq_len, a.vectors};
    if (a.embedding != "tfidf" && a.embedding != "external") throw ValidationError("--embedding must be tfidf or external");
    if (a.embedding == "external" && a.vectors.empty()) throw ValidationError("--vectors is required with --embedding external");
    cfg.ratios = parse_ratios(a.split);
    cfg.split_seed = a.seed;
    a.train.seed = a.seed;
    a.train.validate();
    cfg.train = a.train;
    cfg.cv_folds = a.cv_folds;
    cfg.models = {kind};
    if (!a.grid.empty()) {
      json grid;
      try {
        grid = json::parse(read_file(a.grid));
      } catch (const json::parse_error& e) {
        throw ValidationError("grid file is not valid JSON: " + std::string(e.what()));
      }
      tabular::expand_grid(grid);
      cfg.grids[is_tabular(kind) ? to_string(kind) : std::string("rf")] = grid;
    }
    const auto ds = corpus::load_dataset(cfg.data);
    parts = corpus::split(ds, cfg.ratios, cfg.split_seed);
    provider = experiment::make_provider(cfg.embedding, parts.train);
  } catch (const Error& e) {
    return fail(kUsage, e.what());
  }

  StderrProgress progress;
  experiment::ExperimentResult result;
  try {
    result = experiment::run_models(cfg, parts, provider, &progress);
  } catch (const Error& e) {
    return fail(kFit, e.what());
  }
  const auto& outcome = result.outcomes.front();
  if (outcome.error) return fail(kFit, *outcome.error);

  try {
    const auto val = experiment::embed_split(*provider, parts.validation);
    std::vector<double> val_pred;
    for (const auto& e : val.embeddings) val_pred.push_back(outcome.model->predict(e));
    const auto& train_row = result.report.rows.front();
    print_metrics(train_row, "train");
    print_metrics(metrics::compute(to_string(kind), metrics::Split::Test, val.y, val_pred), "validation");
    if (outcome.chosen_params) std::printf("params %s\n", outcome.chosen_params->dump().c_str());
    save_model(*outcome.model, a.out);
  } catch (const Error& e) {
    return fail(kFit, e.what());
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_grade(const std::string& model_path, const std::string& code_path) {
  GradingModel model;
  std::string code;
  try {
    model = load_model(model_path);
    code = read_file(code_path);
  } catch (const Error& e) {
    return fail(kUsage, e.what());
  }
  if (!model.provider->supports_code()) {
    return fail(kUsage, "model uses precomputed external embeddings and cannot embed new code; "
                        "train it with the tfidf provider to grade ad-hoc files");
  }
  try {
    std::printf("%.2f\n", model.grade_code(code));
  } catch (const LookupError& e) {
    return fail(kUsage, e.what());
  } catch (const Error& e) {
    return fail(kFit, e.what());
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_experiment(const std::string& config_path) {
  experiment::ExperimentConfig cfg;
  try {
    cfg = experiment::load_config(config_path);
  } catch (const Error& e) {
    return fail(kUsage, e.what());
  }
  StderrProgress progress;
  experiment::ExperimentResult result;
  try {
    result = experiment::run_experiment(cfg, &progress);
  } catch (const ValidationError& e) {
    return fail(kUsage, e.what());
  } catch (const ParseError& e) {
    return fail(kUsage, e.what());
  } catch (const LookupError& e) {
    return fail(kUsage, e.what());
  } catch (const Error& e) {
    return fail(kFit, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kUsage, e.what());
  }
  std::cout << metrics::render_report(result.report);
  if (result.any_failed()) return fail(kPartial, "one or more models failed; see the error column");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-grading pipeline for C programming assignments"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a rubric-scored corpus by fault injection");
  synth->add_option("--seeds", synth_args.seeds_dir, "Directory of correct .c programs")->required();
  synth->add_option("--count", synth_args.count, "Number of rows")->required();
  synth->add_option("--out", synth_args.out, "Output corpus CSV")->required();
  synth->add_option("--seed", synth_args.seed, "Random seed")->required();
  synth->add_option("--plans", synth_args.plans, "Optional mutation plan sidecar CSV");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Fit one model and persist it");
  train->add_option("--data", train_args.data, "Corpus CSV")->required();
  train->add_option("--model", train_args.model, "rf|ridge|gbt|knn|cnn|lstm|cnn_rf|lstm_rf")->required();
  train->add_option("--embedding", train_args.embedding, "tfidf|external");
  train->add_option("--dim", train_args.dim, "Embedding dimension");
  train->add_option("--seq-len", train_args.seq_len, "Token sequence length");
  train->add_option("--vectors", train_args.vectors, "JSONL vectors for the external provider");
  train->add_option("--split", train_args.split, "train,validation,test ratios");
  train->add_option("--seed", train_args.seed, "Random seed")->required();
  train->add_option("--out", train_args.out, "Output model JSON")->required();
  train->add_option("--grid", train_args.grid, "Hyperparameter grid JSON");
  train->add_option("--max-epochs", train_args.train.max_epochs, "Neural max epochs");
  train->add_option("--batch-size", train_args.train.batch_size, "Neural batch size");
  train->add_option("--learning-rate", train_args.train.learning_rate, "Adam learning rate");
  train->add_option("--patience", train_args.train.patience, "Early-stopping patience");
  train->add_option("--cv-folds", train_args.cv_folds, "Grid-search folds");

  std::string model_path, code_path;
  auto* grade = app.add_subcommand("grade", "Predict the score of one C file");
  grade->add_option("--model", model_path, "Model JSON")->required();
  grade->add_option("--code", code_path, "C source file")->required();

  std::string config_path;
  auto* exp = app.add_subcommand("experiment", "Run every model on one shared split");
  exp->add_option("--config", config_path, "Experiment config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*synth) return cmd_synth(synth_args);
  if (*train) return cmd_train(train_args);
  if (*grade) return cmd_grade(model_path, code_path);
  return cmd_experiment(config_path);
}
