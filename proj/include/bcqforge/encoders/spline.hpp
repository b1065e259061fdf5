#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "bcqforge/error.hpp"

namespace bcqforge::encoders {

/// Natural cubic spline through (times[i], values[i]). On interval i, with dx = x − times[i]:
///   S_i(x) = a[i] + b[i] dx + c[i] dx² + d[i] dx³
struct CubicSplineCoeffs {
  std::vector<double> times;
  std::vector<double> a, b, c, d;

  std::size_t intervals() const { return a.size(); }

  std::size_t interval(double x) const {
    const auto it = std::upper_bound(times.begin(), times.end(), x);
    const std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    return std::min(i, intervals() - 1);
  }

  /// Outside the knot range the end polynomials are extended.
  double operator()(double x) const {
    const std::size_t i = interval(x);
    const double dx = x - times[i];
    return a[i] + dx * (b[i] + dx * (c[i] + dx * d[i]));
  }

  double second_derivative(double x) const {
    const std::size_t i = interval(x);
    return 2.0 * c[i] + 6.0 * d[i] * (x - times[i]);
  }
};

inline CubicSplineCoeffs natural_cubic_spline(std::span<const double> times, std::span<const double> values) {
  const std::size_t n = times.size();
  if (n < 2) throw InputError("spline: need at least 2 knots");
  if (values.size() != n) throw InputError("spline: times/values length mismatch");
  for (std::size_t i = 1; i < n; ++i)
    if (!(times[i] > times[i - 1])) throw InputError("spline: knot times must be strictly increasing");

  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = times[i + 1] - times[i];

  // Second derivatives M with M_0 = M_{n−1} = 0; interior rows form a tridiagonal system
  //   h_{i−1} M_{i−1} + 2 (h_{i−1} + h_i) M_i + h_i M_{i+1} = 6 (slope_i − slope_{i−1})
  std::vector<double> m(n, 0.0);
  if (n > 2) {
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t i = j + 1;
      diag[j] = 2.0 * (h[i - 1] + h[i]);
      upper[j] = h[i];
      rhs[j] = 6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]);
    }
    // Thomas algorithm; sub-diagonal entry of row j is h[j].
    for (std::size_t j = 1; j < k; ++j) {
      const double w = h[j] / diag[j - 1];
      diag[j] -= w * upper[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t j = k - 1; j-- > 0;) m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
  }

  CubicSplineCoeffs s;
  s.times.assign(times.begin(), times.end());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    s.a.push_back(values[i]);
    s.b.push_back((values[i + 1] - values[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0);
    s.c.push_back(m[i] / 2.0);
    s.d.push_back((m[i + 1] - m[i]) / (6.0 * h[i]));
  }
  return s;
}

/// One natural spline per channel over shared knot times.
struct SplinePath {
  std::vector<CubicSplineCoeffs> channels;

  std::size_t num_channels() const { return channels.size(); }

  std::vector<double> operator()(double x) const {
    std::vector<double> out(channels.size());
    for (std::size_t c = 0; c < channels.size(); ++c) out[c] = channels[c](x);
    return out;
  }
};

/// knots: rows are time points, columns are channels.
inline SplinePath fit_path(std::span<const double> times, const std::vector<std::vector<double>>& knots) {
  SplinePath p;
  if (knots.empty()) throw InputError("spline path: no knots");
  const std::size_t channels = knots.front().size();
  std::vector<double> column(knots.size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t r = 0; r < knots.size(); ++r) column[r] = knots[r].at(c);
    p.channels.push_back(natural_cubic_spline(times, column));
  }
  return p;
}

}  // namespace bcqforge::encoders
