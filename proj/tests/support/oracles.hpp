#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. None of them reuse library internals beyond the data
// types needed to talk to the code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "autograde/cnn.hpp"
#include "autograde/lstm.hpp"
#include "autograde/train.hpp"
#include "autograde/sequence.hpp"
#include "autograde/synth.hpp"
#include "autograde/tree.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Exhaustive CART

struct TreeNode {
  bool leaf = true;
  double value = 0.0;
  int feature = -1;
  double threshold = 0.0;
  std::unique_ptr<TreeNode> left, right;

  double predict(const std::vector<double>& x) const {
    if (leaf) return value;
    return x[static_cast<std::size_t>(feature)] <= threshold ? left->predict(x) : right->predict(x);
  }
};

struct TreeOptions {
  std::optional<int> max_depth;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
};

inline double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s;
}

// Tries every (feature, midpoint) pair and recurses. Ties within a relative
// 1e-9 of the node SSE go to the earliest candidate in (feature, threshold)
// order. `rows` stays in ascending order so leaf means sum in row order.
inline std::unique_ptr<TreeNode> brute_tree(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                                            const std::vector<std::size_t>& rows, const TreeOptions& o, int depth = 0) {
  auto node = std::make_unique<TreeNode>();
  double sum = 0.0;
  for (auto r : rows) sum += y[r];
  node->value = sum / static_cast<double>(rows.size());

  bool constant = true;
  for (auto r : rows) constant = constant && y[r] == y[rows[0]];
  if (constant || static_cast<int>(rows.size()) < o.min_samples_split || (o.max_depth && depth >= *o.max_depth)) {
    return node;
  }

  std::vector<double> node_y;
  for (auto r : rows) node_y.push_back(y[r]);
  const double tol = 1e-9 * sse(node_y);

  struct Cand {
    int feature;
    double threshold;
    double impurity;
  };
  std::vector<Cand> cands;
  const std::size_t d = X.front().size();
  for (std::size_t f = 0; f < d; ++f) {
    std::set<double> values;
    for (auto r : rows) values.insert(X[r][f]);
    std::vector<double> v(values.begin(), values.end());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const double t = (v[i] + v[i + 1]) / 2.0;
      std::vector<double> ly, ry;
      for (auto r : rows) (X[r][f] <= t ? ly : ry).push_back(y[r]);
      if (static_cast<int>(ly.size()) < o.min_samples_leaf || static_cast<int>(ry.size()) < o.min_samples_leaf) continue;
      cands.push_back({static_cast<int>(f), t, sse(ly) + sse(ry)});
    }
  }
  if (cands.empty()) return node;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) best = std::min(best, c.impurity);
  const Cand* pick = nullptr;
  for (const auto& c : cands) {
    if (c.impurity <= best + tol) {
      pick = &c;
      break;
    }
  }

  std::vector<std::size_t> lrows, rrows;
  for (auto r : rows) (X[r][static_cast<std::size_t>(pick->feature)] <= pick->threshold ? lrows : rrows).push_back(r);
  node->leaf = false;
  node->feature = pick->feature;
  node->threshold = pick->threshold;
  node->left = brute_tree(X, y, lrows, o, depth + 1);
  node->right = brute_tree(X, y, rrows, o, depth + 1);
  return node;
}

inline std::unique_ptr<TreeNode> brute_tree(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                                            const TreeOptions& o = {}) {
  std::vector<std::size_t> rows(X.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return brute_tree(X, y, rows, o);
}

// Random dataset with n distinct rows of d features drawn from a small
// integer grid (to provoke ties) and integer targets in [3,10].
struct SmallData {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
};

inline SmallData random_small_data(std::mt19937_64& rng, std::size_t n, std::size_t d, int grid = 4) {
  std::uniform_int_distribution<int> cell(0, grid - 1);
  std::uniform_int_distribution<int> score(3, 10);
  SmallData out;
  std::set<std::vector<double>> seen;
  while (out.X.size() < n) {
    std::vector<double> row(d);
    for (auto& v : row) v = cell(rng);
    if (!seen.insert(row).second) continue;
    out.X.push_back(row);
    out.y.push_back(score(rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ridge by gradient descent on the uncentred objective
//   sum (b + w.x_i - y_i)^2 + lambda |w|^2

struct RidgeSolution {
  std::vector<double> w;
  double b = 0.0;
  int iterations = 0;
};

inline RidgeSolution ridge_gradient_descent(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                                            double lambda, double grad_tol = 1e-11, int max_iter = 5'000'000) {
  const std::size_t n = X.size(), d = X.front().size();
  // Step 1/L with L bounded by twice the trace of the augmented Gram matrix.
  double trace = static_cast<double>(n);
  for (const auto& row : X) {
    for (double v : row) trace += v * v;
  }
  const double step = 1.0 / (2.0 * (trace + lambda));

  RidgeSolution s;
  s.w.assign(d, 0.0);
  // Nesterov momentum keeps the iteration count modest on ill-conditioned
  // draws; the fixed point is the same minimizer.
  std::vector<double> w_prev = s.w, v(d), gw(d);
  double b_prev = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const double mom = static_cast<double>(it - 1) / static_cast<double>(it + 2);
    for (std::size_t j = 0; j < d; ++j) v[j] = s.w[j] + mom * (s.w[j] - w_prev[j]);
    const double vb = s.b + mom * (s.b - b_prev);
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = vb - y[i];
      for (std::size_t j = 0; j < d; ++j) r += v[j] * X[i][j];
      gb += 2.0 * r;
      for (std::size_t j = 0; j < d; ++j) gw[j] += 2.0 * r * X[i][j];
    }
    double gnorm = gb * gb;
    for (std::size_t j = 0; j < d; ++j) {
      gw[j] += 2.0 * lambda * v[j];
      gnorm += gw[j] * gw[j];
    }
    w_prev = s.w;
    b_prev = s.b;
    for (std::size_t j = 0; j < d; ++j) s.w[j] = v[j] - step * gw[j];
    s.b = vb - step * gb;
    s.iterations = it;
    if (std::sqrt(gnorm) < grad_tol) break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rubric enumeration

// Every valid plan: each subset of {NoOutput, SyntaxError, LogicError} with
// multiplicity one, plus the lone HalfCompleted plan.
inline std::vector<autograde::synth::MutationPlan> all_valid_plans() {
  using autograde::synth::MutationKind;
  const MutationKind singles[] = {MutationKind::NoOutput, MutationKind::SyntaxError, MutationKind::LogicError};
  std::vector<autograde::synth::MutationPlan> plans;
  for (int mask = 0; mask < 8; ++mask) {
    autograde::synth::MutationPlan p;
    for (int b = 0; b < 3; ++b) {
      if (mask & (1 << b)) p.kinds.push_back(singles[b]);
    }
    plans.push_back(p);
  }
  plans.push_back({{MutationKind::HalfCompleted}, 0});
  return plans;
}

// Deduction table written out by hand.
inline double rubric_score(const autograde::synth::MutationPlan& p) {
  using autograde::synth::MutationKind;
  if (p.contains(MutationKind::HalfCompleted)) return 3.0;
  double s = 10.0;
  if (p.contains(MutationKind::NoOutput)) s -= 2.0;
  if (p.contains(MutationKind::SyntaxError)) s -= 1.0;
  if (p.contains(MutationKind::LogicError)) s -= 3.0;
  return s < 3.0 ? 3.0 : s;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-10) return 0.0;  // both vanish
  return std::abs(analytic - numeric) / scale;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t nonzero = 0;
};

// Central differences of `loss` over every entry of `params`, compared with
// `analytic` (same layout). The loss is evaluated in extended precision so
// that roundoff stays far below the tiniest gradients being checked.
inline GradCheck compare_gradients(std::vector<autograde::nn::Tensor>& params,
                                   const std::vector<autograde::nn::Tensor>& analytic,
                                   const std::function<long double()>& loss, double eps = 1e-5) {
  GradCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + eps;
      const long double up = loss();
      params[p][i] = saved - eps;
      const long double down = loss();
      params[p][i] = saved;
      const auto numeric = static_cast<double>((up - down) / (2.0L * static_cast<long double>(eps)));
      out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[p][i], numeric));
      ++out.checked;
      if (analytic[p][i] != 0.0) ++out.nonzero;
    }
  }
  return out;
}

// Reference forward passes written directly from the layer equations, in
// long double, reading the networks' parameter tensors.

inline long double relu_ld(long double v) { return v > 0.0L ? v : 0.0L; }
inline long double sigmoid_ld(long double v) { return 1.0L / (1.0L + std::exp(-v)); }

inline long double cnn_forward_ld(const autograde::nn::Cnn& net, const autograde::Sequence& seq) {
  using autograde::nn::Cnn;
  const auto x = seq.to_dense();
  const auto& s = net.spec();
  const std::size_t K = s.kernel_size, F = s.conv_filters, U = s.dense_units, D = net.input_dim();
  const std::size_t T = net.conv_length(), P = net.pool_length();
  const auto& W = net.params()[Cnn::kConvW];
  const auto& B = net.params()[Cnn::kConvB];
  std::vector<long double> conv(T * F);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      long double z = B[f];
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < D; ++d) z += static_cast<long double>(x(t * s.stride + k, d)) * W[(k * D + d) * F + f];
      }
      conv[t * F + f] = relu_ld(z);
    }
  }
  std::vector<long double> flat(P * F);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t f = 0; f < F; ++f) {
      long double m = conv[(p * s.pool_size) * F + f];
      for (std::size_t j = 1; j < s.pool_size; ++j) m = std::max(m, conv[(p * s.pool_size + j) * F + f]);
      flat[p * F + f] = m;
    }
  }
  const auto& DW = net.params()[Cnn::kDenseW];
  long double out = net.params()[Cnn::kOutB][0];
  for (std::size_t u = 0; u < U; ++u) {
    long double h = net.params()[Cnn::kDenseB][u];
    for (std::size_t i = 0; i < flat.size(); ++i) h += flat[i] * DW[i * U + u];
    out += relu_ld(h) * net.params()[Cnn::kOutW][u];
  }
  return out;
}

inline long double lstm_forward_ld(const autograde::nn::Lstm& net, const autograde::Sequence& seq,
                                   const autograde::nn::Lstm::Masks& masks) {
  using autograde::nn::Lstm;
  const auto x = seq.to_dense();
  const std::size_t H = net.spec().units, U = net.spec().dense_units, D = net.input_dim(), G = 4 * H;
  const auto& Wx = net.params()[Lstm::kInputW];
  const auto& Wh = net.params()[Lstm::kRecurrentW];
  const auto& bias = net.params()[Lstm::kGateB];
  std::vector<long double> h(H, 0.0L), c(H, 0.0L), z(G);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    for (std::size_t g = 0; g < G; ++g) {
      long double v = bias[g];
      for (std::size_t d = 0; d < D; ++d) {
        const long double m = masks.input.empty() ? 1.0L : masks.input[d];
        v += static_cast<long double>(x(t, d)) * m * Wx[d * G + g];
      }
      for (std::size_t j = 0; j < H; ++j) {
        const long double m = masks.recurrent.empty() ? 1.0L : masks.recurrent[j];
        v += h[j] * m * Wh[j * G + g];
      }
      z[g] = v;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const long double i = sigmoid_ld(z[j]), f = sigmoid_ld(z[H + j]);
      const long double gg = std::tanh(z[2 * H + j]), o = sigmoid_ld(z[3 * H + j]);
      c[j] = f * c[j] + i * gg;
      h[j] = o * std::tanh(c[j]);
    }
  }
  long double out = net.params()[Lstm::kOutB][0];
  for (std::size_t u = 0; u < U; ++u) {
    long double a = net.params()[Lstm::kDenseB][u];
    for (std::size_t j = 0; j < H; ++j) a += h[j] * net.params()[Lstm::kDenseW][j * U + u];
    out += relu_ld(a) * net.params()[Lstm::kOutW][u];
  }
  return relu_ld(out);
}

inline autograde::Sequence random_dense_sequence(std::mt19937_64& rng, std::size_t L, std::size_t d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  autograde::Matrix m(L, d);
  for (auto& v : m.data()) v = u(rng);
  return autograde::Sequence::from_dense(m);
}

// Toy sizes: L=6, d=4; CNN with 3 filters, LSTM with 5 units.
inline constexpr std::size_t kToyLen = 6;
inline constexpr std::size_t kToyDim = 4;
inline constexpr std::size_t kToyBatch = 3;

inline GradCheck check_cnn_gradients(std::uint64_t seed) {
  using namespace autograde;
  std::mt19937_64 rng(seed);
  nn::CnnSpec spec;
  spec.conv_filters = 3;
  spec.dense_units = 4;
  nn::Cnn net(spec, kToyDim, kToyLen, seed * 7 + 1, 0.5);
  // Non-zero conv and dense biases so every parameter is exercised.
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& v : net.params()[nn::Cnn::kConvB].data) v = u(rng);
  for (auto& v : net.params()[nn::Cnn::kDenseB].data) v = u(rng);

  std::vector<Sequence> xs;
  std::vector<double> ys;
  for (std::size_t b = 0; b < kToyBatch; ++b) {
    xs.push_back(random_dense_sequence(rng, kToyLen, kToyDim));
    ys.push_back(std::uniform_real_distribution<double>(3.0, 10.0)(rng));
  }
  std::vector<const Sequence*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);

  auto grads = nn::zeros_like(net.params());
  nn::accumulate_batch_gradients(net, ptrs, ys, nullptr, grads);

  auto loss = [&] {
    long double s = 0.0L;
    for (std::size_t b = 0; b < xs.size(); ++b) {
      const long double e = cnn_forward_ld(net, xs[b]) - ys[b];
      s += e * e;
    }
    return s / static_cast<long double>(xs.size());
  };
  return compare_gradients(net.params(), grads, loss);
}

// Dropout masks are drawn once and replayed in both the analytic and the
// numeric passes.
inline GradCheck check_lstm_gradients(std::uint64_t seed, double dropout = 0.2) {
  using namespace autograde;
  std::mt19937_64 rng(seed);
  nn::LstmSpec spec;
  spec.units = 5;
  spec.dense_units = 4;
  spec.dropout = dropout;
  spec.recurrent_dropout = dropout;
  nn::Lstm net(spec, kToyDim, seed * 7 + 2, 2.0);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& v : net.params()[nn::Lstm::kGateB].data) v += u(rng);
  for (auto& v : net.params()[nn::Lstm::kDenseB].data) v = 0.1 + u(rng);

  std::vector<Sequence> xs;
  std::vector<double> ys;
  for (std::size_t b = 0; b < kToyBatch; ++b) {
    xs.push_back(random_dense_sequence(rng, kToyLen, kToyDim));
    ys.push_back(std::uniform_real_distribution<double>(3.0, 10.0)(rng));
  }
  Rng mask_rng(seed);
  std::vector<nn::Lstm::Masks> masks;
  for (std::size_t b = 0; b < kToyBatch; ++b) masks.push_back(net.draw_masks(mask_rng));

  std::vector<const Sequence*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  nn::Lstm::Cache cache;
  net.forward_batch(ptrs, masks, cache);
  std::vector<double> d(kToyBatch);
  for (std::size_t b = 0; b < kToyBatch; ++b) d[b] = 2.0 * (cache.output[b] - ys[b]) / static_cast<double>(kToyBatch);
  auto grads = nn::zeros_like(net.params());
  net.backward_batch(ptrs, masks, cache, d, grads);

  auto loss = [&] {
    long double s = 0.0L;
    for (std::size_t b = 0; b < xs.size(); ++b) {
      const long double e = lstm_forward_ld(net, xs[b], masks[b]) - ys[b];
      s += e * e;
    }
    return s / static_cast<long double>(xs.size());
  };
  return compare_gradients(net.params(), grads, loss);
}

// ---------------------------------------------------------------------------
// Early stopping rule, replayed on a plain list of validation losses.

struct StopTrace {
  int best_epoch = 0;
  int stopped_epoch = 0;
};

inline StopTrace replay_early_stopping(const std::vector<double>& val, int patience, int max_epochs) {
  StopTrace t;
  double best = std::numeric_limits<double>::infinity();
  int since = 0;
  for (int e = 1; e <= max_epochs && e <= static_cast<int>(val.size()); ++e) {
    t.stopped_epoch = e;
    if (t.best_epoch == 0 || val[static_cast<std::size_t>(e - 1)] < best) {
      best = val[static_cast<std::size_t>(e - 1)];
      t.best_epoch = e;
      since = 0;
    } else if (++since >= patience) {
      break;
    }
  }
  return t;
}

}  // namespace oracle
