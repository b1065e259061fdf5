#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/tensor.hpp"
#include "bcqforge/random.hpp"

namespace bcqforge::sim {

struct ClusterModel {
  nn::Tensor centroids;                // [k, d]
  std::vector<std::size_t> assignment; // per point
  std::vector<double> wcss_history;    // after every assignment step
  std::size_t iterations = 0;

  std::size_t k() const { return centroids.rows(); }
  double wcss() const { return wcss_history.empty() ? 0.0 : wcss_history.back(); }
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid, lowest index on ties. Returns the total within-cluster sum of squares.
inline double assign(const nn::Tensor& points, const nn::Tensor& centroids, std::vector<std::size_t>& out) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      const double d = sq_dist(points.row_span(i), centroids.row_span(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    out[i] = arg;
    total += best;
  }
  return total;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. An empty cluster is re-seeded at the point
/// farthest from its current centroid.
inline ClusterModel kmeans(const nn::Tensor& points, std::size_t k, std::uint64_t seed, KMeansOptions opt = {}) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k == 0) throw InputError("kmeans: k must be positive");
  if (k > n) throw InputError("kmeans: k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
  if (!points.all_finite()) throw InputError("kmeans: non-finite input");

  Rng rng(derive_seed(seed, 0x4b));
  ClusterModel m;
  m.centroids = nn::Tensor::matrix(k, d);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(points.row_span(pick).begin(), d, m.centroids.row_span(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], detail::sq_dist(points.row_span(i), m.centroids.row_span(c)));
      total += dist[i];
    }
    if (c + 1 == k) break;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] > 0.0 && u < dist[i]) {
          pick = i;
          break;
        }
        u -= dist[i];
      }
      while (dist[pick] == 0.0) --pick;  // float round-off at the tail
    } else {
      pick = uniform_index(rng, n);  // all points coincide with a centroid
    }
  }

  m.assignment.assign(n, 0);
  for (;;) {
    m.wcss_history.push_back(detail::assign(points, m.centroids, m.assignment));
    if (m.iterations == opt.max_iterations) break;
    ++m.iterations;

    nn::Tensor next = nn::Tensor::matrix(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[m.assignment[i]];
      auto row = next.row_span(m.assignment[i]);
      auto p = points.row_span(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += p[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        for (auto& v : next.row_span(c)) v /= static_cast<double>(count[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dd = detail::sq_dist(points.row_span(i), m.centroids.row_span(m.assignment[i]));
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      std::copy_n(points.row_span(far).begin(), d, next.row_span(c).begin());
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(detail::sq_dist(next.row_span(c), m.centroids.row_span(c))));
    m.centroids = std::move(next);
    if (shift < opt.tolerance) {
      m.wcss_history.push_back(detail::assign(points, m.centroids, m.assignment));
      break;
    }
  }
  return m;
}

/// Column-wise z-scoring (population std, zero-variance columns left centered only).
inline nn::Tensor standardize_columns(nn::Tensor x) {
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x.at(i, j);
    mean /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.rows()));
    for (std::size_t i = 0; i < x.rows(); ++i) x.at(i, j) = sd > 0.0 ? (x.at(i, j) - mean) / sd : x.at(i, j) - mean;
  }
  return x;
}

}  // namespace bcqforge::sim
