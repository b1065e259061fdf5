#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "bcqforge/error.hpp"

namespace bcqforge::sim {

/// Sample Pearson correlation. Throws InputError for mismatched or too-short inputs and when
/// either side has zero variance (the coefficient is undefined there).
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson: length mismatch");
  if (x.size() < 2) throw InputError("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw InputError("pearson: undefined correlation (zero variance)");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace bcqforge::sim
