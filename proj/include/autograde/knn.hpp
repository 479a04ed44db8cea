#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "autograde/tree.hpp"

namespace autograde::tabular {

struct KnnModel {
  Matrix X;
  std::vector<double> y;
  std::size_t k = 5;
};

inline KnnModel knn_fit(const FeatureMatrix& data, std::size_t k) {
  data.validate();
  if (k < 1) throw ValidationError("knn: k must be >= 1");
  if (k > data.rows()) {
    throw ValidationError("knn: k=" + std::to_string(k) + " exceeds " + std::to_string(data.rows()) +
                          " stored rows");
  }
  return {data.X, data.y, k};
}

// Mean target of the k nearest rows (Euclidean); equal distances resolve to
// the lower stored index.
inline double knn_predict(const KnnModel& m, std::span<const double> x) {
  if (x.size() != m.X.cols()) {
    throw ShapeError("knn expects " + std::to_string(m.X.cols()) + " features, got " + std::to_string(x.size()));
  }
  const std::size_t n = m.X.rows();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = m.X.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (row[j] - x[j]) * (row[j] - x[j]);
    dist[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m.k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  double sum = 0.0;
  for (std::size_t i = 0; i < m.k; ++i) sum += m.y[order[i]];
  return clamp_score(sum / static_cast<double>(m.k));
}

}  // namespace autograde::tabular
