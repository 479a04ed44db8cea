#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <span>
#include <vector>

#include "autograde/tree.hpp"

namespace autograde::tabular {

struct RidgeModel {
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = 0.0;

  double predict_raw(std::span<const double> x) const {
    if (x.size() != weights.size()) {
      throw ShapeError("ridge expects " + std::to_string(weights.size()) + " features, got " +
                       std::to_string(x.size()));
    }
    double s = bias;
    for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
    return s;
  }
};

// Relative pivot size below which the unregularized system counts as singular.
inline constexpr double kRidgePivotTolerance = 1e-10;

// Solves (Xc'Xc + lambda I) w = Xc'yc on column-centred data; the bias is
// recovered from the means and is not penalized.
inline RidgeModel ridge_fit(const FeatureMatrix& data, double lambda) {
  data.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("ridge lambda must be >= 0");
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto d = static_cast<Eigen::Index>(data.cols());

  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = data.X(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    y(i) = data.y[static_cast<std::size_t>(i)];
  }
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  X.rowwise() -= x_mean;
  y.array() -= y_mean;

  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += lambda;
  const Eigen::VectorXd b = X.transpose() * y;

  Eigen::LLT<Eigen::MatrixXd> llt(A);
  bool singular = llt.info() != Eigen::Success;
  if (!singular && d > 0) {
    // Squared Cholesky pivots are Schur complements on the scale of A.
    const Eigen::VectorXd pivots = Eigen::MatrixXd(llt.matrixL()).diagonal().array().square();
    singular = pivots.minCoeff() <= kRidgePivotTolerance * std::max(1.0, A.diagonal().maxCoeff());
  }
  if (singular) {
    throw RankDeficientError("ridge: centred design is rank-deficient; use lambda > 0");
  }
  const Eigen::VectorXd w = llt.solve(b);

  RidgeModel m;
  m.lambda = lambda;
  m.weights.assign(w.data(), w.data() + w.size());
  m.bias = y_mean - x_mean.dot(w);
  for (double v : m.weights) {
    if (!std::isfinite(v)) throw RankDeficientError("ridge: non-finite weights");
  }
  return m;
}

inline double ridge_predict(const RidgeModel& m, std::span<const double> x) {
  return clamp_score(m.predict_raw(x));
}

// Sum of squared residuals plus lambda * |w|^2.
inline double ridge_objective(const FeatureMatrix& data, std::span<const double> w, double bias, double lambda) {
  double obj = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    double p = bias;
    for (std::size_t j = 0; j < w.size(); ++j) p += w[j] * data.X(i, j);
    obj += (p - data.y[i]) * (p - data.y[i]);
  }
  for (double v : w) obj += lambda * v * v;
  return obj;
}

}  // namespace autograde::tabular
