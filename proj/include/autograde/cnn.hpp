#pragma once

// 1-D convolutional regressor:
//
//   input L x d  -> conv1d (filters, kernel, stride; valid; ReLU)
//                -> max pool (size p, stride p, floor length)
//                -> flatten -> dense (ReLU) -> dense 1 (linear)
//
// Gradients are derived by hand per layer.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autograde/nn.hpp"
#include "autograde/sequence.hpp"

namespace autograde::nn {

struct CnnSpec {
  std::size_t conv_filters = 32;
  std::size_t kernel_size = 3;
  std::size_t stride = 1;
  std::size_t pool_size = 2;
  std::size_t dense_units = 64;
};

inline json to_json(const CnnSpec& s) {
  return {{"conv_filters", s.conv_filters},
          {"kernel_size", s.kernel_size},
          {"stride", s.stride},
          {"pool_size", s.pool_size},
          {"dense_units", s.dense_units}};
}

inline CnnSpec cnn_spec_from_json(const json& j) {
  CnnSpec s;
  s.conv_filters = j.at("conv_filters").get<std::size_t>();
  s.kernel_size = j.at("kernel_size").get<std::size_t>();
  s.stride = j.at("stride").get<std::size_t>();
  s.pool_size = j.at("pool_size").get<std::size_t>();
  s.dense_units = j.at("dense_units").get<std::size_t>();
  return s;
}

inline std::size_t conv_output_length(std::size_t len, std::size_t kernel, std::size_t stride) {
  return (len - kernel) / stride + 1;
}

class Cnn {
 public:
  enum Param : std::size_t { kConvW, kConvB, kDenseW, kDenseB, kOutW, kOutB, kParamCount };

  // Activations of one forward pass, kept for backprop and feature
  // extraction.
  struct Cache {
    std::vector<double> conv;              // conv_len x F, after ReLU
    std::vector<std::size_t> pool_argmax;  // pool_len x F, row index into conv
    std::vector<double> flat;              // pool_len * F
    std::vector<double> hidden;            // dense units, after ReLU
    double output = 0.0;
  };

  Cnn() = default;

  Cnn(CnnSpec spec, std::size_t input_dim, std::size_t seq_len, std::uint64_t init_seed, double output_bias = 0.0)
      : spec_(spec), input_dim_(input_dim), seq_len_(seq_len) {
    if (spec.kernel_size < 1 || spec.stride < 1 || spec.pool_size < 1 || spec.conv_filters < 1 ||
        spec.dense_units < 1) {
      throw ValidationError("cnn: sizes must be >= 1");
    }
    if (seq_len < spec.kernel_size) {
      throw ShapeError("cnn: sequence length " + std::to_string(seq_len) + " is shorter than kernel " +
                       std::to_string(spec.kernel_size));
    }
    if (pool_length() < 1) throw ShapeError("cnn: pooled length is zero");
    const std::size_t K = spec.kernel_size, D = input_dim, F = spec.conv_filters, U = spec.dense_units;
    params_.resize(kParamCount);
    params_[kConvW] = Tensor({K, D, F});
    params_[kConvB] = Tensor({F});
    params_[kDenseW] = Tensor({feature_length(), U});
    params_[kDenseB] = Tensor({U});
    params_[kOutW] = Tensor({U});
    params_[kOutB] = Tensor({1});
    Rng rng(init_seed);
    glorot_uniform(params_[kConvW], K * D, K * F, rng);
    glorot_uniform(params_[kDenseW], feature_length(), U, rng);
    glorot_uniform(params_[kOutW], U, 1, rng);
    params_[kOutB][0] = output_bias;
  }

  const CnnSpec& spec() const noexcept { return spec_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t seq_len() const noexcept { return seq_len_; }
  std::size_t conv_length() const { return conv_output_length(seq_len_, spec_.kernel_size, spec_.stride); }
  std::size_t pool_length() const { return conv_length() / spec_.pool_size; }
  std::size_t feature_length() const { return pool_length() * spec_.conv_filters; }

  std::vector<Tensor>& params() noexcept { return params_; }
  const std::vector<Tensor>& params() const noexcept { return params_; }

  void check_input(const Sequence& x) const {
    if (x.rows() != seq_len_ || x.cols() != input_dim_) {
      throw ShapeError("cnn expects " + std::to_string(seq_len_) + "x" + std::to_string(input_dim_) + " input, got " +
                       std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
    }
  }

  double forward(const Sequence& x, Cache& c) const {
    check_input(x);
    const std::size_t K = spec_.kernel_size, F = spec_.conv_filters, U = spec_.dense_units;
    const std::size_t T = conv_length(), P = pool_length(), S = spec_.stride, Q = spec_.pool_size;
    const auto& W = params_[kConvW].data;
    const auto& B = params_[kConvB].data;

    c.conv.assign(T * F, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      double* out = &c.conv[t * F];
      for (std::size_t f = 0; f < F; ++f) out[f] = B[f];
      for (std::size_t k = 0; k < K; ++k) {
        for (const auto& e : x.row(t * S + k)) {
          const double* w = &W[(k * input_dim_ + e.col) * F];
          for (std::size_t f = 0; f < F; ++f) out[f] += e.value * w[f];
        }
      }
      for (std::size_t f = 0; f < F; ++f) out[f] = relu(out[f]);
    }

    c.pool_argmax.assign(P * F, 0);
    c.flat.assign(P * F, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t f = 0; f < F; ++f) {
        std::size_t arg = p * Q;
        for (std::size_t j = 1; j < Q; ++j) {
          if (c.conv[(p * Q + j) * F + f] > c.conv[arg * F + f]) arg = p * Q + j;
        }
        c.pool_argmax[p * F + f] = arg;
        c.flat[p * F + f] = c.conv[arg * F + f];
      }
    }

    const auto& DW = params_[kDenseW].data;
    c.hidden.assign(params_[kDenseB].data.begin(), params_[kDenseB].data.end());
    for (std::size_t i = 0; i < c.flat.size(); ++i) {
      const double v = c.flat[i];
      if (v == 0.0) continue;
      const double* w = &DW[i * U];
      for (std::size_t u = 0; u < U; ++u) c.hidden[u] += v * w[u];
    }
    for (auto& h : c.hidden) h = relu(h);

    double out = params_[kOutB][0];
    for (std::size_t u = 0; u < U; ++u) out += params_[kOutW][u] * c.hidden[u];
    c.output = out;
    return out;
  }

  // Accumulates dOutput/dParams * d_output into grads.
  void backward(const Sequence& x, const Cache& c, double d_output, std::vector<Tensor>& grads) const {
    const std::size_t F = spec_.conv_filters, U = spec_.dense_units, K = spec_.kernel_size, S = spec_.stride;

    grads[kOutB][0] += d_output;
    std::vector<double> d_hidden(U);
    for (std::size_t u = 0; u < U; ++u) {
      grads[kOutW][u] += d_output * c.hidden[u];
      d_hidden[u] = c.hidden[u] > 0.0 ? d_output * params_[kOutW][u] : 0.0;
    }

    auto& gDW = grads[kDenseW].data;
    const auto& DW = params_[kDenseW].data;
    for (std::size_t u = 0; u < U; ++u) grads[kDenseB][u] += d_hidden[u];

    // Pooled zeros come from ReLU-clipped windows and pass no gradient.
    auto& gW = grads[kConvW].data;
    auto& gB = grads[kConvB].data;
    for (std::size_t i = 0; i < c.flat.size(); ++i) {
      const double v = c.flat[i];
      if (v == 0.0) continue;
      double* g = &gDW[i * U];
      const double* w = &DW[i * U];
      double d_flat = 0.0;
      for (std::size_t u = 0; u < U; ++u) {
        g[u] += v * d_hidden[u];
        d_flat += w[u] * d_hidden[u];
      }
      const std::size_t f = i % F;
      const std::size_t t = c.pool_argmax[i];
      gB[f] += d_flat;
      for (std::size_t k = 0; k < K; ++k) {
        for (const auto& e : x.row(t * S + k)) gW[(k * input_dim_ + e.col) * F + f] += e.value * d_flat;
      }
    }
  }

  double predict(const Sequence& x) const {
    Cache c;
    return forward(x, c);
  }

  // Flatten-layer output, the vector that feeds the first dense layer.
  std::vector<double> features(const Sequence& x) const {
    Cache c;
    forward(x, c);
    return c.flat;
  }

  json to_json() const {
    json p = json::array();
    for (const auto& t : params_) p.push_back(nn::to_json(t));
    return {{"spec", nn::to_json(spec_)}, {"input_dim", input_dim_}, {"seq_len", seq_len_}, {"params", p}};
  }

  static Cnn from_json(const json& j) {
    Cnn net(cnn_spec_from_json(j.at("spec")), j.at("input_dim").get<std::size_t>(), j.at("seq_len").get<std::size_t>(), 0);
    const auto& p = j.at("params");
    if (p.size() != kParamCount) throw ValidationError("cnn: wrong parameter count");
    for (std::size_t i = 0; i < kParamCount; ++i) {
      Tensor t = tensor_from_json(p[i]);
      if (t.shape != net.params_[i].shape) throw ValidationError("cnn: parameter shape mismatch");
      net.params_[i] = std::move(t);
    }
    return net;
  }

  friend bool operator==(const Cnn& a, const Cnn& b) { return a.params_ == b.params_; }

 private:
  CnnSpec spec_;
  std::size_t input_dim_ = 0;
  std::size_t seq_len_ = 0;
  std::vector<Tensor> params_;
};

}  // namespace autograde::nn
