#include <gtest/gtest.h>

#include <random>

#include "autograde/train.hpp"
#include "oracles.hpp"

using namespace autograde;
using namespace autograde::nn;

namespace {

Sequence column_sequence(const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return Sequence::from_dense(m);
}

void zero_all(std::vector<Tensor>& params) {
  for (auto& t : params) t.zero();
}

bool all_zero(const std::vector<Tensor>& ts) {
  for (const auto& t : ts) {
    for (double v : t.data) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

struct ToyData {
  std::vector<Sequence> x;
  std::vector<double> y;
};

ToyData toy_data(std::uint64_t seed, std::size_t n, std::size_t L = 6, std::size_t d = 4) {
  std::mt19937_64 rng(seed);
  ToyData out;
  for (std::size_t i = 0; i < n; ++i) {
    out.x.push_back(oracle::random_dense_sequence(rng, L, d));
    out.y.push_back(std::uniform_int_distribution<int>(3, 10)(rng));
  }
  return out;
}

CnnSpec small_cnn() {
  CnnSpec s;
  s.conv_filters = 4;
  s.dense_units = 8;
  return s;
}

LstmSpec small_lstm() {
  LstmSpec s;
  s.units = 6;
  s.dense_units = 5;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Loss, optimizer, early stopping

TEST(Loss, MseExamples) {
  const std::vector<double> p = {0}, t = {2};
  const auto r = mse_loss(p, t);
  EXPECT_EQ(r.loss, 4.0);
  EXPECT_EQ(r.grad, std::vector<double>{-4.0});
  const std::vector<double> same = {3, 4};
  EXPECT_EQ(mse_loss(same, same).loss, 0.0);
  EXPECT_THROW(mse_loss(p, same), ShapeError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params{Tensor({2})};
  params[0].data = {1.0, -1.0};
  std::vector<Tensor> grads{Tensor({2})};
  grads[0].data = {0.5, -3.0};
  Adam adam({.learning_rate = 0.01}, params);
  adam.step(params, grads);
  // Bias-corrected m/sqrt(v) is sign(g) on the first step.
  EXPECT_NEAR(params[0][0], 0.99, 1e-9);
  EXPECT_NEAR(params[0][1], -0.99, 1e-9);
}

TEST(EarlyStopping, IncreasingTraceStopsAtTwo) {
  EarlyStopping es(1);
  EXPECT_EQ(es.update(1.0), EarlyStopping::Decision::Improved);
  EXPECT_EQ(es.update(2.0), EarlyStopping::Decision::Stop);
  EXPECT_EQ(es.best_epoch(), 1);
  EXPECT_EQ(es.epoch(), 2);
  EXPECT_THROW(EarlyStopping(0), ValidationError);
}

TEST(EarlyStopping, MatchesReplayOracleOnRandomTraces) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int patience = 1 + static_cast<int>(rng() % 6);
    const int max_epochs = 1 + static_cast<int>(rng() % 40);
    std::vector<double> val(static_cast<std::size_t>(max_epochs));
    // Mostly decreasing with noise, and some exact repeats.
    double level = 5.0;
    for (auto& v : val) {
      level *= 0.9 + 0.2 * u(rng);
      v = rng() % 7 == 0 ? level : std::round(level * 4.0) / 4.0;
    }
    const auto ref = oracle::replay_early_stopping(val, patience, max_epochs);
    EarlyStopping es(patience);
    int stopped = 0;
    for (int e = 1; e <= max_epochs; ++e) {
      stopped = e;
      if (es.update(val[static_cast<std::size_t>(e - 1)]) == EarlyStopping::Decision::Stop) break;
    }
    ASSERT_EQ(es.best_epoch(), ref.best_epoch);
    ASSERT_EQ(stopped, ref.stopped_epoch);
    EXPECT_LE(stopped - es.best_epoch(), patience);
  }
}

TEST(Curves, CsvRows) {
  TrainingHistory h;
  h.epochs = {{1, 2.5, 3.0}, {2, 1.25, 2.0}};
  EXPECT_EQ(curves_header(), "model,epoch,train_loss,val_loss\n");
  EXPECT_EQ(curves_rows("cnn", h), "cnn,1,2.5,3\ncnn,2,1.25,2\n");
  h.best_epoch = 2;
  h.stopped_epoch = 2;
  EXPECT_EQ(history_from_json(to_json(h)), h);
}

// ---------------------------------------------------------------------------
// CNN

TEST(Cnn, HandEvaluatedConvAndPool) {
  CnnSpec s;
  s.conv_filters = 1;
  s.kernel_size = 1;
  s.dense_units = 1;
  Cnn net(s, 1, 4, 0);
  zero_all(net.params());
  net.params()[Cnn::kConvW][0] = 1.0;
  EXPECT_EQ(net.features(column_sequence({1, 3, 2, 0})), (std::vector<double>{3, 2}));
}

TEST(Cnn, ZeroWeightsPredictZero) {
  Cnn net(small_cnn(), 4, 6, 3);
  zero_all(net.params());
  Matrix zeros(6, 4);
  EXPECT_EQ(net.predict(Sequence::from_dense(zeros)), 0.0);
  EXPECT_EQ(net.predict(toy_data(1, 1).x[0]), 0.0);
}

TEST(Cnn, ShapeAlgebra) {
  for (std::size_t L = 3; L <= 23; ++L) {
    EXPECT_EQ(conv_output_length(L, 3, 1), L - 2);
    EXPECT_EQ(conv_output_length(L, 3, 2), (L - 3) / 2 + 1);
    if (L < 4) {
      EXPECT_THROW(Cnn(CnnSpec{}, 2, L, 0), ShapeError);
      continue;
    }
    Cnn net(CnnSpec{}, 2, L, 0);
    EXPECT_EQ(net.conv_length(), L - 2);
    EXPECT_EQ(net.pool_length(), (L - 2) / 2);
    EXPECT_EQ(net.feature_length(), 32 * ((L - 2) / 2));
  }
  CnnSpec strided;
  strided.stride = 2;
  for (std::size_t L = 3; L <= 23; ++L) {
    if (conv_output_length(L, 3, 2) < 2) continue;
    Cnn net(strided, 2, L, 0);
    EXPECT_EQ(net.conv_length(), (L - 3) / 2 + 1);
  }
  EXPECT_THROW(Cnn(CnnSpec{}, 2, 2, 0), ShapeError);
}

TEST(Cnn, FeatureLengthOfRealInput) {
  Cnn net(CnnSpec{}, 4, 10, 1);
  EXPECT_EQ(net.features(toy_data(2, 1, 10).x[0]).size(), 32u * 4u);
  EXPECT_THROW(net.predict(toy_data(2, 1, 9).x[0]), ShapeError);
}

TEST(Cnn, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = oracle::check_cnn_gradients(seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
    EXPECT_GT(r.nonzero, r.checked / 4) << "seed " << seed;
  }
}

TEST(Cnn, ZeroUpstreamGradientGivesZeroGradients) {
  Cnn net(small_cnn(), 4, 6, 5);
  const auto x = toy_data(3, 1).x[0];
  Cnn::Cache c;
  net.forward(x, c);
  auto grads = zeros_like(net.params());
  net.backward(x, c, 0.0, grads);
  EXPECT_TRUE(all_zero(grads));
}

TEST(Cnn, DeadInputPathHasZeroFilterGradient) {
  Cnn net(small_cnn(), 4, 6, 6);
  for (auto& v : net.params()[Cnn::kConvB].data) v = 0.5;
  for (auto& v : net.params()[Cnn::kDenseB].data) v = 0.5;
  const Sequence x = Sequence::from_dense(Matrix(6, 4));
  Cnn::Cache c;
  net.forward(x, c);
  auto grads = zeros_like(net.params());
  net.backward(x, c, 1.0, grads);
  for (double g : grads[Cnn::kConvW].data) EXPECT_EQ(g, 0.0);
  double bias_grad = 0.0;
  for (double g : grads[Cnn::kConvB].data) bias_grad += std::abs(g);
  EXPECT_GT(bias_grad, 0.0);
}

TEST(Cnn, JsonRoundTrip) {
  Cnn net(small_cnn(), 4, 6, 7);
  const auto back = Cnn::from_json(json::parse(net.to_json().dump()));
  EXPECT_EQ(back, net);
  const auto x = toy_data(4, 1).x[0];
  EXPECT_EQ(back.predict(x), net.predict(x));
  auto bad = net.to_json();
  bad["params"].erase(bad["params"].size() - 1);
  EXPECT_THROW(Cnn::from_json(bad), ValidationError);
}

TEST(Cnn, OverfitsEightPoints) {
  const auto d = toy_data(5, 8);
  double mean = 0.0;
  for (double v : d.y) mean += v / 8.0;
  Cnn net(CnnSpec{}, 4, 6, 8, mean);
  TrainConfig cfg;
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.batch_size = 8;
  const auto h = train(net, std::span<const Sequence>(d.x), d.y, std::span<const Sequence>(d.x), d.y, cfg);
  EXPECT_LT(evaluate_loss(net, std::span<const Sequence>(d.x), std::span<const double>(d.y)), 1e-2);
  EXPECT_EQ(h.stopped_epoch, 500);
}

// ---------------------------------------------------------------------------
// LSTM

TEST(Lstm, ZeroWeightsGiveZeroHiddenState) {
  Lstm net(small_lstm(), 4, 1);
  zero_all(net.params());
  const auto h = net.features(toy_data(6, 1).x[0]);
  EXPECT_EQ(h, std::vector<double>(6, 0.0));
  EXPECT_EQ(net.predict(toy_data(6, 1).x[0]), 0.0);
}

TEST(Lstm, DefaultFeatureLengthIs128) {
  Lstm net(LstmSpec{}, 4, 1);
  EXPECT_EQ(net.feature_length(), 128u);
  EXPECT_EQ(net.features(toy_data(7, 1).x[0]).size(), 128u);
}

TEST(Lstm, InferenceIsDeterministic) {
  Lstm net(small_lstm(), 4, 2, 3.0);
  const auto x = toy_data(8, 1).x[0];
  EXPECT_EQ(net.predict(x), net.predict(x));
}

TEST(Lstm, ZeroDropoutTrainingEqualsInference) {
  LstmSpec s = small_lstm();
  s.dropout = 0.0;
  s.recurrent_dropout = 0.0;
  Lstm net(s, 4, 3, 3.0);
  Rng rng(1);
  const auto masks = net.draw_masks(rng);
  EXPECT_TRUE(masks.input.empty());
  EXPECT_TRUE(masks.recurrent.empty());
  const auto x = toy_data(9, 1).x[0];
  Lstm::Cache c;
  EXPECT_EQ(net.forward(x, masks, c), net.predict(x));
}

TEST(Lstm, MasksUseInvertedScaling) {
  Lstm net(LstmSpec{}, 64, 4);
  Rng rng(2);
  const auto m = net.draw_masks(rng);
  ASSERT_EQ(m.input.size(), 64u);
  ASSERT_EQ(m.recurrent.size(), 128u);
  std::size_t dropped = 0;
  for (double v : m.recurrent) {
    EXPECT_TRUE(v == 0.0 || v == 1.0 / 0.8);
    dropped += v == 0.0;
  }
  EXPECT_GT(dropped, 0u);
  EXPECT_LT(dropped, 128u);
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = oracle::check_lstm_gradients(seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
    EXPECT_GT(r.nonzero, r.checked / 4) << "seed " << seed;
  }
  EXPECT_LT(oracle::check_lstm_gradients(42, 0.0).max_rel_error, 1e-4);
}

TEST(Reference, ExtendedPrecisionForwardsAgree) {
  const auto d = toy_data(14, 5);
  CnnSpec cs = small_cnn();
  Cnn cnn(cs, 4, 6, 9, 1.5);
  LstmSpec ls = small_lstm();
  Lstm lstm(ls, 4, 9, 3.0);
  Rng rng(5);
  for (const auto& x : d.x) {
    EXPECT_NEAR(static_cast<double>(oracle::cnn_forward_ld(cnn, x)), cnn.predict(x), 1e-12);
    EXPECT_NEAR(static_cast<double>(oracle::lstm_forward_ld(lstm, x, {})), lstm.predict(x), 1e-12);
    const auto m = lstm.draw_masks(rng);
    Lstm::Cache c;
    EXPECT_NEAR(static_cast<double>(oracle::lstm_forward_ld(lstm, x, m)), lstm.forward(x, m, c), 1e-12);
  }
}

TEST(Lstm, BatchedBackwardEqualsSumOfSingles) {
  Lstm net(small_lstm(), 4, 5, 3.0);
  const auto d = toy_data(10, 4);
  Rng rng(3);
  std::vector<Lstm::Masks> masks;
  for (std::size_t i = 0; i < 4; ++i) masks.push_back(net.draw_masks(rng));
  std::vector<const Sequence*> ptrs;
  for (const auto& x : d.x) ptrs.push_back(&x);
  const std::vector<double> upstream = {0.3, -1.2, 0.7, 2.0};

  Lstm::Cache cb;
  net.forward_batch(ptrs, masks, cb);
  auto batched = zeros_like(net.params());
  net.backward_batch(ptrs, masks, cb, upstream, batched);

  auto summed = zeros_like(net.params());
  for (std::size_t i = 0; i < 4; ++i) {
    Lstm::Cache c;
    EXPECT_NEAR(net.forward(d.x[i], masks[i], c), cb.output[i], 1e-12);
    net.backward(d.x[i], masks[i], c, upstream[i], summed);
  }
  for (std::size_t p = 0; p < batched.size(); ++p) {
    for (std::size_t i = 0; i < batched[p].size(); ++i) {
      EXPECT_NEAR(batched[p][i], summed[p][i], 1e-12 * std::max(1.0, std::abs(summed[p][i])));
    }
  }
}

TEST(Lstm, ZeroUpstreamGradientGivesZeroGradients) {
  Lstm net(small_lstm(), 4, 6, 3.0);
  const auto x = toy_data(11, 1).x[0];
  Rng rng(4);
  const auto m = net.draw_masks(rng);
  Lstm::Cache c;
  net.forward(x, m, c);
  auto grads = zeros_like(net.params());
  net.backward(x, m, c, 0.0, grads);
  EXPECT_TRUE(all_zero(grads));
}

TEST(Lstm, PredictManyMatchesSingles) {
  Lstm net(small_lstm(), 4, 7, 3.0);
  const auto d = toy_data(12, 9);
  const auto many = net.predict_many(d.x, 4);
  const auto feats = net.features_many(d.x, 4);
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    EXPECT_NEAR(many[i], net.predict(d.x[i]), 1e-12);
    const auto f = net.features(d.x[i]);
    for (std::size_t j = 0; j < f.size(); ++j) EXPECT_NEAR(feats[i][j], f[j], 1e-12);
  }
}

TEST(Lstm, JsonRoundTrip) {
  Lstm net(small_lstm(), 4, 8, 2.0);
  const auto back = Lstm::from_json(json::parse(net.to_json().dump()));
  EXPECT_EQ(back, net);
  const auto x = toy_data(13, 1).x[0];
  EXPECT_EQ(back.predict(x), net.predict(x));
}

// ---------------------------------------------------------------------------
// Training loop

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto tr = toy_data(20, 10), va = toy_data(21, 5);
  Cnn net(small_cnn(), 4, 6, 1, 6.0);
  const auto before = net.params();
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 4;
  cfg.patience = 10;
  cfg.batch_size = 3;
  const auto h = train(net, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(va.x), va.y, cfg);
  EXPECT_EQ(net.params(), before);
  ASSERT_EQ(h.epochs.size(), 4u);
  for (const auto& e : h.epochs) EXPECT_EQ(e.train_loss, h.epochs[0].train_loss);
}

TEST(Train, SameSeedSameHistoryAndWeights) {
  const auto tr = toy_data(22, 12), va = toy_data(23, 6);
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.batch_size = 5;
  cfg.seed = 9;
  Lstm a(small_lstm(), 4, 2, 6.0), b(small_lstm(), 4, 2, 6.0);
  const auto ha = train(a, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(va.x), va.y, cfg);
  const auto hb = train(b, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(va.x), va.y, cfg);
  EXPECT_EQ(ha, hb);
  EXPECT_EQ(a, b);
}

TEST(Train, RestoredWeightsReproduceBestValidationLoss) {
  const auto tr = toy_data(24, 16), va = toy_data(25, 8);
  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.batch_size = 4;
  cfg.patience = 3;
  cfg.learning_rate = 0.05;
  {
    Cnn net(small_cnn(), 4, 6, 3, 6.0);
    const auto h = train(net, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(va.x), va.y, cfg);
    ASSERT_GE(h.best_epoch, 1);
    EXPECT_LE(h.stopped_epoch - h.best_epoch, cfg.patience);
    EXPECT_EQ(evaluate_loss(net, std::span<const Sequence>(va.x), std::span<const double>(va.y)),
              h.epochs[static_cast<std::size_t>(h.best_epoch - 1)].val_loss);
    for (const auto& e : h.epochs) EXPECT_GE(e.val_loss, h.epochs[static_cast<std::size_t>(h.best_epoch - 1)].val_loss);
  }
  {
    Lstm net(small_lstm(), 4, 3, 6.0);
    const auto h = train(net, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(va.x), va.y, cfg);
    EXPECT_LE(h.stopped_epoch - h.best_epoch, cfg.patience);
    EXPECT_EQ(evaluate_loss(net, std::span<const Sequence>(va.x), std::span<const double>(va.y)),
              h.epochs[static_cast<std::size_t>(h.best_epoch - 1)].val_loss);
  }
}

TEST(Train, DivergenceReportsEpoch) {
  const auto tr = toy_data(26, 8), va = toy_data(27, 4);
  Cnn net(small_cnn(), 4, 6, 1);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.max_epochs = 5;
  try {
    train(net, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(va.x), va.y, cfg);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_GE(e.epoch(), 1);
  }
}

TEST(Train, RejectsBadConfig) {
  const auto tr = toy_data(28, 4);
  Cnn net(small_cnn(), 4, 6, 1);
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train(net, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(tr.x), tr.y, cfg),
               ValidationError);
  cfg = {};
  EXPECT_THROW(train(net, std::span<const Sequence>(tr.x), tr.y, std::span<const Sequence>(), std::span<const double>(), cfg),
               ValidationError);
}
