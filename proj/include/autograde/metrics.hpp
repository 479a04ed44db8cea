#pragma once

// Regression metrics and the per-model report table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autograde/csv.hpp"
#include "autograde/error.hpp"

namespace autograde::metrics {

namespace detail {
inline void check_lengths(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw ShapeError("metric inputs differ in length (" + std::to_string(y.size()) + " vs " +
                     std::to_string(yhat.size()) + ")");
  }
  if (y.empty()) throw ShapeError("metric inputs are empty");
}
}  // namespace detail

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

inline double mae(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

// Percent. A zero target is a hard error; valid grades never reach 0.
inline double mape(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) throw UndefinedMetricError("mape: target " + std::to_string(i) + " is zero");
    s += std::abs(y[i] - yhat[i]) / std::abs(y[i]);
  }
  return 100.0 * s / static_cast<double>(y.size());
}

inline double r2(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  if (y.size() < 2) throw UndefinedMetricError("r2: need at least 2 points");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  if (ss_tot == 0.0) throw UndefinedMetricError("r2: targets are constant");
  return 1.0 - ss_res / ss_tot;
}

enum class Split { Train, Test };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

struct MetricsRow {
  std::string model_name;
  Split split = Split::Train;
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double mape = 0.0;
  std::optional<std::string> error;  // set when the model failed
};

inline MetricsRow compute(std::string model_name, Split split, std::span<const double> y,
                          std::span<const double> yhat) {
  return {std::move(model_name), split, rmse(y, yhat), mae(y, yhat), r2(y, yhat), mape(y, yhat), std::nullopt};
}

// Predicts every row with `predict(i)` and scores the results.
template <class Predict>
MetricsRow evaluate(std::string model_name, Split split, std::span<const double> y, Predict&& predict,
                    std::vector<double>* predictions_out = nullptr) {
  std::vector<double> yhat;
  yhat.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) yhat.push_back(predict(i));
  auto row = compute(std::move(model_name), split, y, yhat);
  if (predictions_out) *predictions_out = std::move(yhat);
  return row;
}

struct ReportMetadata {
  std::string dataset_path;
  std::uint64_t seed = 0;
  std::string timestamp;
};

struct Report {
  std::vector<MetricsRow> rows;
  ReportMetadata metadata;
};

// Fixed model order of the report.
inline const std::vector<std::string>& model_order() {
  static const std::vector<std::string> order = {"rf", "ridge", "gbt", "knn", "cnn", "lstm", "cnn_rf", "lstm_rf"};
  return order;
}

inline std::string format_fixed(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

// `model,split,rmse,mae,r2,mape` (+ `error` when any row failed); rows
// sorted by model order then train before test.
inline std::string render_report(const Report& rep) {
  const bool with_error = std::any_of(rep.rows.begin(), rep.rows.end(), [](const MetricsRow& r) { return r.error.has_value(); });
  auto rank = [](const std::string& name) {
    const auto& order = model_order();
    auto it = std::find(order.begin(), order.end(), name);
    return static_cast<std::size_t>(it - order.begin());
  };
  std::vector<const MetricsRow*> rows;
  for (const auto& r : rep.rows) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [&](const MetricsRow* a, const MetricsRow* b) {
    const auto ra = rank(a->model_name), rb = rank(b->model_name);
    if (ra != rb) return ra < rb;
    if (ra == model_order().size() && a->model_name != b->model_name) return a->model_name < b->model_name;
    return a->split == Split::Train && b->split == Split::Test;
  });

  std::string out = with_error ? "model,split,rmse,mae,r2,mape,error\n" : "model,split,rmse,mae,r2,mape\n";
  for (const auto* r : rows) {
    std::vector<std::string> fields{r->model_name, std::string(to_string(r->split))};
    if (r->error) {
      fields.insert(fields.end(), {"", "", "", "", *r->error});
    } else {
      fields.insert(fields.end(), {format_fixed(r->rmse), format_fixed(r->mae), format_fixed(r->r2), format_fixed(r->mape)});
      if (with_error) fields.emplace_back();
    }
    out += csv::join_row(fields);
  }
  return out;
}

inline Report parse_report(std::string_view text) {
  auto records = csv::parse(text);
  if (records.empty()) throw ParseError("empty report", 1);
  const auto& header = records.front().fields;
  const bool with_error = header.size() == 7;
  if (header.size() < 6 || header[0] != "model" || header[5] != "mape") {
    throw ParseError("unexpected report header", 1);
  }
  Report rep;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != header.size()) throw ParseError("wrong field count", records[i].line);
    MetricsRow r;
    r.model_name = f[0];
    if (f[1] == "train") {
      r.split = Split::Train;
    } else if (f[1] == "test") {
      r.split = Split::Test;
    } else {
      throw ParseError("unknown split '" + f[1] + "'", records[i].line);
    }
    if (with_error && !f[6].empty()) {
      r.error = f[6];
    } else {
      r.rmse = std::stod(f[2]);
      r.mae = std::stod(f[3]);
      r.r2 = std::stod(f[4]);
      r.mape = std::stod(f[5]);
    }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

// `id,actual,predicted` audit dump.
inline std::string render_predictions(std::span<const std::string> ids, std::span<const double> actual,
                                      std::span<const double> predicted) {
  std::string out = "id,actual,predicted\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    char a[64], p[64];
    std::snprintf(a, sizeof a, "%.17g", actual[i]);
    std::snprintf(p, sizeof p, "%.17g", predicted[i]);
    out += csv::join_row({ids[i], a, p});
  }
  return out;
}

}  // namespace autograde::metrics
