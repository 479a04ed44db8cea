#pragma once

// LSTM regressor: one LSTM layer -> dense (ReLU) -> dense 1 (ReLU).
//
//   i, f, o = sigmoid(z), g = tanh(z),  z = b + Wx' (x_t * mx) + Wh' (h_{t-1} * mh)
//   c_t = f * c_{t-1} + i * g
//   h_t = o * tanh(c_t)
//
// mx / mh are inverted-dropout masks drawn once per sequence and reused at
// every step; they are all-ones at inference. Items of a batch run in lock
// step so the recurrent products are matrix products.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autograde/nn.hpp"
#include "autograde/sequence.hpp"

namespace autograde::nn {

struct LstmSpec {
  std::size_t units = 128;
  double dropout = 0.2;
  double recurrent_dropout = 0.2;
  std::size_t dense_units = 64;
};

inline json to_json(const LstmSpec& s) {
  return {{"units", s.units}, {"dropout", s.dropout}, {"recurrent_dropout", s.recurrent_dropout}, {"dense_units", s.dense_units}};
}

inline LstmSpec lstm_spec_from_json(const json& j) {
  LstmSpec s;
  s.units = j.at("units").get<std::size_t>();
  s.dropout = j.at("dropout").get<double>();
  s.recurrent_dropout = j.at("recurrent_dropout").get<double>();
  s.dense_units = j.at("dense_units").get<std::size_t>();
  return s;
}

class Lstm {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<RowMatrix>;
  using ConstMap = Eigen::Map<const RowMatrix>;

 public:
  // Gate blocks within the 4H pre-activation vector.
  enum Gate : std::size_t { kI, kF, kG, kO };
  enum Param : std::size_t { kInputW, kRecurrentW, kGateB, kDenseW, kDenseB, kOutW, kOutB, kParamCount };

  struct Masks {
    std::vector<double> input;      // d entries, empty = identity
    std::vector<double> recurrent;  // H entries, empty = identity
  };

  // Activations of a lock-step batch pass. Per-step blocks are stored as
  // [step][item][unit].
  struct Cache {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::vector<double> gates;       // steps x B x 4H, after activation
    std::vector<double> cell;        // steps x B x H
    std::vector<double> tanh_c;      // steps x B x H
    std::vector<double> hidden;      // steps x B x H
    std::vector<double> rec_mask;    // B x H
    std::vector<double> dense;       // B x U, after ReLU
    std::vector<double> output_pre;  // B
    std::vector<double> output;      // B
  };

  Lstm() = default;

  Lstm(LstmSpec spec, std::size_t input_dim, std::uint64_t init_seed, double output_bias = 0.0)
      : spec_(spec), input_dim_(input_dim) {
    if (spec.units < 1 || spec.dense_units < 1) throw ValidationError("lstm: sizes must be >= 1");
    if (!(spec.dropout >= 0.0 && spec.dropout < 1.0) ||
        !(spec.recurrent_dropout >= 0.0 && spec.recurrent_dropout < 1.0)) {
      throw ValidationError("lstm: dropout rates must be in [0,1)");
    }
    const std::size_t H = spec.units, D = input_dim, U = spec.dense_units;
    params_.resize(kParamCount);
    params_[kInputW] = Tensor({D, 4 * H});
    params_[kRecurrentW] = Tensor({H, 4 * H});
    params_[kGateB] = Tensor({4 * H});
    params_[kDenseW] = Tensor({H, U});
    params_[kDenseB] = Tensor({U});
    params_[kOutW] = Tensor({U});
    params_[kOutB] = Tensor({1});
    Rng rng(init_seed);
    glorot_uniform(params_[kInputW], D, 4 * H, rng);
    glorot_uniform(params_[kRecurrentW], H, 4 * H, rng);
    for (std::size_t j = 0; j < H; ++j) params_[kGateB][kF * H + j] = 1.0;  // forget-gate bias
    glorot_uniform(params_[kDenseW], H, U, rng);
    glorot_uniform(params_[kOutW], U, 1, rng);
    params_[kOutB][0] = output_bias;
  }

  const LstmSpec& spec() const noexcept { return spec_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t feature_length() const noexcept { return spec_.units; }
  std::vector<Tensor>& params() noexcept { return params_; }
  const std::vector<Tensor>& params() const noexcept { return params_; }

  Masks draw_masks(Rng& rng) const {
    Masks m;
    auto draw = [&](std::size_t n, double rate) {
      std::vector<double> mask;
      if (rate <= 0.0) return mask;
      mask.resize(n);
      const double keep = 1.0 / (1.0 - rate);
      for (auto& v : mask) v = rng.bernoulli(rate) ? 0.0 : keep;
      return mask;
    };
    m.input = draw(input_dim_, spec_.dropout);
    m.recurrent = draw(spec_.units, spec_.recurrent_dropout);
    return m;
  }

  void check_input(const Sequence& x, std::size_t steps) const {
    if (x.cols() != input_dim_) {
      throw ShapeError("lstm expects input width " + std::to_string(input_dim_) + ", got " + std::to_string(x.cols()));
    }
    if (x.rows() < 1) throw ShapeError("lstm: empty sequence");
    if (x.rows() != steps) throw ShapeError("lstm: batch items differ in length");
  }

  double forward(const Sequence& x, const Masks& masks, Cache& c) const {
    const Sequence* xs[] = {&x};
    const Masks ms[] = {masks};
    forward_batch(xs, ms, c);
    return c.output[0];
  }

  // Backpropagation through time with the forward pass's masks.
  void backward(const Sequence& x, const Masks& masks, const Cache& c, double d_output,
                std::vector<Tensor>& grads) const {
    const Sequence* xs[] = {&x};
    const Masks ms[] = {masks};
    const double d[] = {d_output};
    backward_batch(xs, ms, c, d, grads);
  }

  // Runs all items in lock step; they must share one length. Empty `masks`
  // means inference for every item.
  void forward_batch(std::span<const Sequence* const> xs, std::span<const Masks> masks, Cache& c) const {
    const std::size_t B = xs.size();
    if (B == 0) throw ShapeError("lstm: empty batch");
    if (!masks.empty() && masks.size() != B) throw ShapeError("lstm: mask count differs from batch size");
    const std::size_t L = xs[0]->rows();
    for (const auto* x : xs) check_input(*x, L);
    const std::size_t H = spec_.units, G = 4 * H, U = spec_.dense_units;
    const auto& Wx = params_[kInputW].data;
    const auto& bias = params_[kGateB].data;
    const ConstMap Wh(params_[kRecurrentW].data.data(), H, G);

    c.batch = B;
    c.steps = L;
    c.gates.assign(L * B * G, 0.0);
    c.cell.assign(L * B * H, 0.0);
    c.tanh_c.assign(L * B * H, 0.0);
    c.hidden.assign(L * B * H, 0.0);
    c.rec_mask.assign(B * H, 1.0);
    for (std::size_t b = 0; b < masks.size(); ++b) {
      if (!masks[b].recurrent.empty()) std::copy(masks[b].recurrent.begin(), masks[b].recurrent.end(), &c.rec_mask[b * H]);
    }
    const ConstMap Mh(c.rec_mask.data(), B, H);
    RowMatrix h_masked(B, H);

    for (std::size_t t = 0; t < L; ++t) {
      Map Z(&c.gates[t * B * G], B, G);
      for (std::size_t b = 0; b < B; ++b) {
        double* z = &Z(static_cast<Eigen::Index>(b), 0);
        std::copy(bias.begin(), bias.end(), z);
        const auto* in_mask = masks.empty() || masks[b].input.empty() ? nullptr : &masks[b].input;
        for (const auto& e : xs[b]->row(t)) {
          const double v = in_mask ? e.value * (*in_mask)[e.col] : e.value;
          if (v == 0.0) continue;
          const double* w = &Wx[e.col * G];
          for (std::size_t g = 0; g < G; ++g) z[g] += v * w[g];
        }
      }
      if (t > 0) {
        const ConstMap h_prev(&c.hidden[(t - 1) * B * H], B, H);
        h_masked = h_prev.cwiseProduct(Mh);
        Z.noalias() += h_masked * Wh;
      }
      for (std::size_t b = 0; b < B; ++b) {
        double* gate = &c.gates[(t * B + b) * G];
        const std::size_t row = (t * B + b) * H;
        for (std::size_t j = 0; j < H; ++j) {
          gate[kI * H + j] = sigmoid(gate[kI * H + j]);
          gate[kF * H + j] = sigmoid(gate[kF * H + j]);
          gate[kG * H + j] = std::tanh(gate[kG * H + j]);
          gate[kO * H + j] = sigmoid(gate[kO * H + j]);
          const double c_prev = t > 0 ? c.cell[row - B * H + j] : 0.0;
          const double cell = gate[kF * H + j] * c_prev + gate[kI * H + j] * gate[kG * H + j];
          c.cell[row + j] = cell;
          c.tanh_c[row + j] = std::tanh(cell);
          c.hidden[row + j] = gate[kO * H + j] * c.tanh_c[row + j];
        }
      }
    }

    const auto& DW = params_[kDenseW].data;
    c.dense.assign(B * U, 0.0);
    c.output_pre.assign(B, 0.0);
    c.output.assign(B, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      const double* h_last = &c.hidden[((L - 1) * B + b) * H];
      double* dense = &c.dense[b * U];
      std::copy(params_[kDenseB].data.begin(), params_[kDenseB].data.end(), dense);
      for (std::size_t j = 0; j < H; ++j) {
        const double* w = &DW[j * U];
        for (std::size_t u = 0; u < U; ++u) dense[u] += h_last[j] * w[u];
      }
      double out = params_[kOutB][0];
      for (std::size_t u = 0; u < U; ++u) {
        dense[u] = relu(dense[u]);
        out += params_[kOutW][u] * dense[u];
      }
      c.output_pre[b] = out;
      c.output[b] = relu(out);
    }
  }

  // Accumulates sum_b dOutput_b/dParams * d_output[b] into grads.
  void backward_batch(std::span<const Sequence* const> xs, std::span<const Masks> masks, const Cache& c,
                      std::span<const double> d_output, std::vector<Tensor>& grads) const {
    const std::size_t H = spec_.units, G = 4 * H, U = spec_.dense_units, L = c.steps, B = c.batch;
    if (xs.size() != B || d_output.size() != B) throw ShapeError("lstm: backward batch differs from forward batch");
    const auto& DW = params_[kDenseW].data;
    auto& gDW = grads[kDenseW].data;

    RowMatrix dH = RowMatrix::Zero(B, H);
    std::vector<double> d_dense(U);
    bool any = false;
    for (std::size_t b = 0; b < B; ++b) {
      const double d_pre = c.output_pre[b] > 0.0 ? d_output[b] : 0.0;
      if (d_pre == 0.0) continue;
      any = true;
      const double* dense = &c.dense[b * U];
      grads[kOutB][0] += d_pre;
      for (std::size_t u = 0; u < U; ++u) {
        grads[kOutW][u] += d_pre * dense[u];
        d_dense[u] = dense[u] > 0.0 ? d_pre * params_[kOutW][u] : 0.0;
        grads[kDenseB][u] += d_dense[u];
      }
      const double* h_last = &c.hidden[((L - 1) * B + b) * H];
      for (std::size_t j = 0; j < H; ++j) {
        double s = 0.0;
        for (std::size_t u = 0; u < U; ++u) {
          gDW[j * U + u] += h_last[j] * d_dense[u];
          s += DW[j * U + u] * d_dense[u];
        }
        dH(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = s;
      }
    }
    if (!any) return;

    const ConstMap Wh(params_[kRecurrentW].data.data(), H, G);
    const ConstMap Mh(c.rec_mask.data(), B, H);
    Map gWh(grads[kRecurrentW].data.data(), H, G);
    auto& gWx = grads[kInputW].data;
    auto& gB = grads[kGateB].data;
    RowMatrix dC = RowMatrix::Zero(B, H);
    RowMatrix dZ(B, G);
    RowMatrix h_masked(B, H);

    for (std::size_t t = L; t-- > 0;) {
      for (std::size_t b = 0; b < B; ++b) {
        const double* gate = &c.gates[(t * B + b) * G];
        const std::size_t row = (t * B + b) * H;
        const auto bi = static_cast<Eigen::Index>(b);
        double* dz = &dZ(bi, 0);
        for (std::size_t j = 0; j < H; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          const double i = gate[kI * H + j], f = gate[kF * H + j], g = gate[kG * H + j], o = gate[kO * H + j];
          const double tc = c.tanh_c[row + j];
          const double c_prev = t > 0 ? c.cell[row - B * H + j] : 0.0;
          const double dh = dH(bi, jj);
          double& dc = dC(bi, jj);
          dc += dh * o * (1.0 - tc * tc);
          dz[kO * H + j] = dh * tc * o * (1.0 - o);
          dz[kI * H + j] = dc * g * i * (1.0 - i);
          dz[kG * H + j] = dc * i * (1.0 - g * g);
          dz[kF * H + j] = dc * c_prev * f * (1.0 - f);
          dc *= f;
        }
        for (std::size_t k = 0; k < G; ++k) gB[k] += dz[k];
        const auto* in_mask = masks.empty() || masks[b].input.empty() ? nullptr : &masks[b].input;
        for (const auto& e : xs[b]->row(t)) {
          const double v = in_mask ? e.value * (*in_mask)[e.col] : e.value;
          if (v == 0.0) continue;
          double* gw = &gWx[e.col * G];
          for (std::size_t k = 0; k < G; ++k) gw[k] += v * dz[k];
        }
      }
      if (t == 0) break;
      const ConstMap h_prev(&c.hidden[(t - 1) * B * H], B, H);
      h_masked = h_prev.cwiseProduct(Mh);
      gWh.noalias() += h_masked.transpose() * dZ;
      dH.noalias() = dZ * Wh.transpose();
      dH = dH.cwiseProduct(Mh);
    }
  }

  double predict(const Sequence& x) const {
    Cache c;
    return forward(x, Masks{}, c);
  }

  // Inference over many inputs of one length, in lock-step chunks.
  std::vector<double> predict_many(std::span<const Sequence> xs, std::size_t chunk = 64) const {
    std::vector<double> out;
    out.reserve(xs.size());
    Cache c;
    std::vector<const Sequence*> ptrs;
    for (std::size_t start = 0; start < xs.size(); start += chunk) {
      ptrs.clear();
      for (std::size_t i = start; i < std::min(xs.size(), start + chunk); ++i) ptrs.push_back(&xs[i]);
      forward_batch(ptrs, {}, c);
      out.insert(out.end(), c.output.begin(), c.output.end());
    }
    return out;
  }

  // Final hidden state h_L at inference.
  std::vector<double> features(const Sequence& x) const {
    Cache c;
    forward(x, Masks{}, c);
    const std::size_t H = spec_.units;
    return {c.hidden.end() - static_cast<std::ptrdiff_t>(H), c.hidden.end()};
  }

  // Features for many inputs of one length; row i belongs to xs[i].
  std::vector<std::vector<double>> features_many(std::span<const Sequence> xs, std::size_t chunk = 64) const {
    std::vector<std::vector<double>> out;
    out.reserve(xs.size());
    Cache c;
    std::vector<const Sequence*> ptrs;
    const std::size_t H = spec_.units;
    for (std::size_t start = 0; start < xs.size(); start += chunk) {
      ptrs.clear();
      for (std::size_t i = start; i < std::min(xs.size(), start + chunk); ++i) ptrs.push_back(&xs[i]);
      forward_batch(ptrs, {}, c);
      const std::size_t B = ptrs.size();
      for (std::size_t b = 0; b < B; ++b) {
        const double* h = &c.hidden[((c.steps - 1) * B + b) * H];
        out.emplace_back(h, h + H);
      }
    }
    return out;
  }

  json to_json() const {
    json p = json::array();
    for (const auto& t : params_) p.push_back(nn::to_json(t));
    return {{"spec", nn::to_json(spec_)}, {"input_dim", input_dim_}, {"params", p}};
  }

  static Lstm from_json(const json& j) {
    Lstm net(lstm_spec_from_json(j.at("spec")), j.at("input_dim").get<std::size_t>(), 0);
    const auto& p = j.at("params");
    if (p.size() != kParamCount) throw ValidationError("lstm: wrong parameter count");
    for (std::size_t i = 0; i < kParamCount; ++i) {
      Tensor t = tensor_from_json(p[i]);
      if (t.shape != net.params_[i].shape) throw ValidationError("lstm: parameter shape mismatch");
      net.params_[i] = std::move(t);
    }
    return net;
  }

  friend bool operator==(const Lstm& a, const Lstm& b) { return a.params_ == b.params_; }

 private:
  LstmSpec spec_;
  std::size_t input_dim_ = 0;
  std::vector<Tensor> params_;
};

}  // namespace autograde::nn
