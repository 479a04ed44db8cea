#pragma once

// Shared pieces of the neural stack: parameter tensors, initialisation,
// loss, optimizer, early stopping and loss-curve records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "autograde/csv.hpp"
#include "autograde/error.hpp"
#include "autograde/rng.hpp"
#include "json.hpp"

namespace autograde::nn {

using json = nlohmann::json;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), 0.0);
  }

  std::size_t size() const noexcept { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline json to_json(const Tensor& t) { return {{"shape", t.shape}, {"data", t.data}}; }

inline Tensor tensor_from_json(const json& j) {
  Tensor t(j.at("shape").get<std::vector<std::size_t>>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != t.size()) throw ValidationError("tensor data does not match its shape");
  t.data = std::move(data);
  return t;
}

inline std::vector<Tensor> zeros_like(const std::vector<Tensor>& ts) {
  std::vector<Tensor> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.emplace_back(t.shape);
  return out;
}

// Glorot/Xavier uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-a, a);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // dLoss/dPred
};

// Mean squared error; gradient 2 (pred - target) / n.
inline LossAndGrad mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("mse_loss: length mismatch");
  if (pred.empty()) throw ShapeError("mse_loss: empty input");
  const double n = static_cast<double>(pred.size());
  LossAndGrad out;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    out.loss += e * e;
    out.grad[i] = 2.0 * e / n;
  }
  out.loss /= n;
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(AdamConfig cfg, const std::vector<Tensor>& params) : cfg_(cfg), m_(zeros_like(params)), v_(zeros_like(params)) {}

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& w = params[p].data;
      const auto& g = grads[p].data;
      auto& m = m_[p].data;
      auto& v = v_[p].data;
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

// Tracks the best validation loss. Stops once `patience` consecutive epochs
// pass without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ValidationError("patience must be >= 1");
  }

  enum class Decision { Improved, Continue, Stop };

  Decision update(double val_loss) {
    ++epoch_;
    if (best_epoch_ == 0 || val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
      return Decision::Improved;
    }
    return epoch_ - best_epoch_ >= patience_ ? Decision::Stop : Decision::Continue;
  }

  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }
  int epoch() const noexcept { return epoch_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct EpochLoss {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  friend bool operator==(const EpochLoss&, const EpochLoss&) = default;
};

struct TrainingHistory {
  std::vector<EpochLoss> epochs;
  int best_epoch = 0;
  int stopped_epoch = 0;
  friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

inline json to_json(const TrainingHistory& h) {
  json e = json::array();
  for (const auto& r : h.epochs) e.push_back({r.epoch, r.train_loss, r.val_loss});
  return {{"epochs", e}, {"best_epoch", h.best_epoch}, {"stopped_epoch", h.stopped_epoch}};
}

inline TrainingHistory history_from_json(const json& j) {
  TrainingHistory h;
  for (const auto& r : j.at("epochs")) h.epochs.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>()});
  h.best_epoch = j.at("best_epoch").get<int>();
  h.stopped_epoch = j.at("stopped_epoch").get<int>();
  return h;
}

inline std::string curves_header() { return "model,epoch,train_loss,val_loss\n"; }

// Rows of the `model,epoch,train_loss,val_loss` loss-curve CSV.
inline std::string curves_rows(const std::string& model, const TrainingHistory& h) {
  std::string out;
  for (const auto& r : h.epochs) {
    char a[64], b[64];
    std::snprintf(a, sizeof a, "%.10g", r.train_loss);
    std::snprintf(b, sizeof b, "%.10g", r.val_loss);
    out += csv::join_row({model, std::to_string(r.epoch), a, b});
  }
  return out;
}

}  // namespace autograde::nn
