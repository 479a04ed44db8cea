#pragma once

// Mini-batch Adam training with early stopping on validation MSE.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <type_traits>
#include <vector>

#include "autograde/cnn.hpp"
#include "autograde/lstm.hpp"
#include "autograde/nn.hpp"

namespace autograde::nn {

struct TrainConfig {
  int max_epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (patience < 1) throw ValidationError("patience must be >= 1");
    if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
  }
};

inline json to_json(const TrainConfig& c) {
  return {{"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"patience", c.patience},
          {"seed", c.seed}};
}

template <class Net>
concept SequenceRegressor = std::is_same_v<Net, Cnn> || std::is_same_v<Net, Lstm>;

// MSE of inference-mode predictions.
template <SequenceRegressor Net>
double evaluate_loss(const Net& net, std::span<const Sequence> xs, std::span<const double> ys) {
  std::vector<double> pred;
  if constexpr (std::is_same_v<Net, Lstm>) {
    pred = net.predict_many(xs);
  } else {
    pred.reserve(xs.size());
    for (const auto& x : xs) pred.push_back(net.predict(x));
  }
  return mse_loss(pred, ys).loss;
}

// Adds the gradient of the batch MSE to `grads` and returns the batch loss.
// `dropout` supplies per-sequence masks in training mode; null disables them.
template <SequenceRegressor Net>
double accumulate_batch_gradients(const Net& net, std::span<const Sequence* const> xs, std::span<const double> ys,
                                  Rng* dropout, std::vector<Tensor>& grads) {
  const double n = static_cast<double>(xs.size());
  double loss = 0.0;
  typename Net::Cache cache;
  if constexpr (std::is_same_v<Net, Lstm>) {
    std::vector<Lstm::Masks> masks;
    if (dropout) {
      for (std::size_t i = 0; i < xs.size(); ++i) masks.push_back(net.draw_masks(*dropout));
    }
    net.forward_batch(xs, masks, cache);
    std::vector<double> d(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double e = cache.output[i] - ys[i];
      loss += e * e;
      d[i] = 2.0 * e / n;
    }
    net.backward_batch(xs, masks, cache, d, grads);
  } else {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Sequence& x = *xs[i];
      const double p = net.forward(x, cache);
      loss += (p - ys[i]) * (p - ys[i]);
      net.backward(x, cache, 2.0 * (p - ys[i]) / n, grads);
    }
  }
  return loss / n;
}

// Trains `net` in place and leaves it holding the best-validation weights.
// Per epoch: seeded shuffle, Adam step per mini-batch, then train and
// validation MSE in inference mode.
template <SequenceRegressor Net>
TrainingHistory train(Net& net, std::span<const Sequence> train_x, std::span<const double> train_y,
                      std::span<const Sequence> val_x, std::span<const double> val_y, const TrainConfig& cfg) {
  cfg.validate();
  if (train_x.empty() || val_x.empty()) throw ValidationError("train: empty train or validation split");
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size()) throw ShapeError("train: input/target mismatch");

  Adam adam(AdamConfig{.learning_rate = cfg.learning_rate}, net.params());
  EarlyStopping stopper(cfg.patience);
  TrainingHistory history;
  std::vector<Tensor> best = net.params();
  std::vector<Tensor> grads = zeros_like(net.params());
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Sequence*> batch_x;
  std::vector<double> batch_y;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(epoch)));
    Rng dropout_rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(epoch) + 1));
    shuffle_rng.shuffle(order);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_x.push_back(&train_x[order[i]]);
        batch_y.push_back(train_y[order[i]]);
      }
      for (auto& g : grads) g.zero();
      const double loss = accumulate_batch_gradients(net, batch_x, batch_y, &dropout_rng, grads);
      if (!std::isfinite(loss)) throw TrainingError("training diverged: non-finite batch loss", epoch);
      adam.step(net.params(), grads);
    }

    const double train_loss = evaluate_loss(net, train_x, train_y);
    const double val_loss = evaluate_loss(net, val_x, val_y);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw TrainingError("training diverged: non-finite epoch loss", epoch);
    }
    history.epochs.push_back({epoch, train_loss, val_loss});
    history.stopped_epoch = epoch;

    const auto decision = stopper.update(val_loss);
    if (decision == EarlyStopping::Decision::Improved) best = net.params();
    if (decision == EarlyStopping::Decision::Stop) break;
  }
  history.best_epoch = stopper.best_epoch();
  net.params() = std::move(best);
  return history;
}

}  // namespace autograde::nn
