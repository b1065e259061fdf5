#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/random.hpp"

namespace bcqforge::data {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Number of bins covering a stay of `duration_h` hours.
inline std::size_t bin_count(double duration_h, double bin_hours) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration_h / bin_hours - 1e-9)));
}

/// Averages in-range measurements per bin. Out-of-range values are dropped before averaging;
/// bins without any valid measurement are left as NaN for normalize() to impute. Stays shorter
/// than 24 h or longer than 168 h are removed.
inline Cohort bin_cohort(const RawCohort& raw) {
  const FeatureSchema& schema = raw.schema;
  schema.validate();
  Cohort out;
  out.schema = schema;
  const std::size_t nf = schema.num_temporal();
  std::size_t too_short = 0, too_long = 0;
  for (const auto& p : raw.patients) {
    if (p.statics.size() != schema.num_static()) throw InputError("patient " + p.id + ": static feature count mismatch");
    double duration = 0.0;
    for (const auto& m : p.measurements) duration = std::max(duration, m.time_h);
    if (p.measurements.empty() || duration < kMinStayHours) {
      ++too_short;
      continue;
    }
    if (duration > kMaxStayHours) {
      ++too_long;
      continue;
    }
    const std::size_t bins = bin_count(duration, schema.bin_hours);
    nn::Tensor sum = nn::Tensor::matrix(bins, nf);
    std::vector<std::size_t> count(bins * nf, 0);
    for (const auto& m : p.measurements) {
      const auto& range = schema.temporal_features.at(m.feature);
      if (!std::isfinite(m.value) || m.value < range.min || m.value > range.max) continue;
      const std::size_t b = std::min(bins - 1, static_cast<std::size_t>(m.time_h / schema.bin_hours));
      sum.at(b, m.feature) += m.value;
      ++count[b * nf + m.feature];
    }
    Trajectory t;
    t.patient_id = p.id;
    t.statics = p.statics;
    t.features = nn::Tensor::matrix(bins, nf);
    for (std::size_t i = 0; i < bins * nf; ++i) t.features[i] = count[i] ? sum[i] / static_cast<double>(count[i]) : kMissing;
    if (p.action_bins.size() + 1 < bins) {
      throw InputError("patient " + p.id + ": " + std::to_string(p.action_bins.size()) + " action bins for " +
                       std::to_string(bins) + " time bins");
    }
    t.actions.assign(p.action_bins.begin(), p.action_bins.begin() + static_cast<std::ptrdiff_t>(bins - 1));
    t.survived28 = p.survived28;
    out.trajectories.push_back(std::move(t));
  }
  if (too_short) out.warnings.push_back("excluded " + std::to_string(too_short) + " patients with < 24 h of data");
  if (too_long) out.warnings.push_back("excluded " + std::to_string(too_long) + " patients with > 168 h of data");
  return out;
}

/// Largest-remainder allocation of n patients to 70:15:15, ties resolved train → validation → test.
inline std::array<std::size_t, 3> split_sizes(std::size_t n) {
  constexpr std::array<double, 3> frac{0.70, 0.15, 0.15};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double q = frac[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(q + 1e-9));
    rem[i] = q - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

/// Patient-level random 70:15:15 partition, deterministic in `seed`.
inline Cohort split(Cohort cohort, std::uint64_t seed) {
  const std::size_t n = cohort.size();
  if (n < 10) throw InputError("split: need at least 10 patients, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5eed5));
  shuffle(perm, rng);
  const auto sizes = split_sizes(n);
  cohort.splits.assign(n, Split::train);
  for (std::size_t k = 0; k < n; ++k) {
    cohort.splits[perm[k]] = k < sizes[0] ? Split::train : (k < sizes[0] + sizes[1] ? Split::validation : Split::test);
  }
  return cohort;
}

/// Imputes (last observation carried forward, else train-split mean) and z-scores every
/// feature with train-split statistics. The acuity series is taken after imputation, before
/// z-scoring.
inline Cohort normalize(Cohort cohort) {
  if (!cohort.is_split()) throw InputError("normalize: cohort has no split assignment");
  const std::size_t nf = cohort.schema.num_temporal();
  const std::size_t ns = cohort.schema.num_static();
  const auto train = cohort.indices(Split::train);
  if (train.empty()) throw InputError("normalize: empty train split");

  std::vector<double> obs_mean(nf, 0.0);
  {
    std::vector<double> s(nf, 0.0);
    std::vector<std::size_t> c(nf, 0);
    for (std::size_t i : train) {
      const auto& f = cohort.trajectories[i].features;
      for (std::size_t r = 0; r < f.rows(); ++r)
        for (std::size_t j = 0; j < nf; ++j)
          if (!std::isnan(f.at(r, j))) {
            s[j] += f.at(r, j);
            ++c[j];
          }
    }
    for (std::size_t j = 0; j < nf; ++j) {
      if (c[j]) {
        obs_mean[j] = s[j] / static_cast<double>(c[j]);
      } else {
        cohort.warnings.push_back("feature " + cohort.schema.temporal_features[j].name +
                                  " has no train-split observations; imputing 0");
      }
    }
  }

  const std::size_t acuity = cohort.schema.acuity_index();
  for (auto& t : cohort.trajectories) {
    auto& f = t.features;
    for (std::size_t j = 0; j < nf; ++j) {
      double last = kMissing;
      for (std::size_t r = 0; r < f.rows(); ++r) {
        if (std::isnan(f.at(r, j))) {
          f.at(r, j) = std::isnan(last) ? obs_mean[j] : last;
        } else {
          last = f.at(r, j);
        }
      }
    }
    t.acuity.resize(f.rows());
    for (std::size_t r = 0; r < f.rows(); ++r) t.acuity[r] = f.at(r, acuity);
  }

  ZScoreStats st;
  st.temporal_mean.assign(nf, 0.0);
  st.temporal_std.assign(nf, 0.0);
  std::size_t bins = 0;
  for (std::size_t i : train) {
    const auto& f = cohort.trajectories[i].features;
    bins += f.rows();
    for (std::size_t r = 0; r < f.rows(); ++r)
      for (std::size_t j = 0; j < nf; ++j) st.temporal_mean[j] += f.at(r, j);
  }
  for (auto& m : st.temporal_mean) m /= static_cast<double>(bins);
  for (std::size_t i : train) {
    const auto& f = cohort.trajectories[i].features;
    for (std::size_t r = 0; r < f.rows(); ++r)
      for (std::size_t j = 0; j < nf; ++j) {
        const double d = f.at(r, j) - st.temporal_mean[j];
        st.temporal_std[j] += d * d;
      }
  }
  for (std::size_t j = 0; j < nf; ++j) {
    st.temporal_std[j] = std::sqrt(st.temporal_std[j] / static_cast<double>(bins));
    if (!(st.temporal_std[j] > 0.0)) {
      st.temporal_std[j] = 1.0;
      cohort.warnings.push_back("feature " + cohort.schema.temporal_features[j].name +
                                " has zero train-split variance; using std = 1");
    }
  }

  st.static_mean.assign(ns, 0.0);
  st.static_std.assign(ns, 0.0);
  for (std::size_t i : train)
    for (std::size_t j = 0; j < ns; ++j) st.static_mean[j] += cohort.trajectories[i].statics[j];
  for (auto& m : st.static_mean) m /= static_cast<double>(train.size());
  for (std::size_t i : train)
    for (std::size_t j = 0; j < ns; ++j) {
      const double d = cohort.trajectories[i].statics[j] - st.static_mean[j];
      st.static_std[j] += d * d;
    }
  for (std::size_t j = 0; j < ns; ++j) {
    st.static_std[j] = std::sqrt(st.static_std[j] / static_cast<double>(train.size()));
    if (!(st.static_std[j] > 0.0)) {
      st.static_std[j] = 1.0;
      cohort.warnings.push_back("static feature " + cohort.schema.static_features[j] +
                                " has zero train-split variance; using std = 1");
    }
  }

  for (auto& t : cohort.trajectories) {
    for (std::size_t r = 0; r < t.features.rows(); ++r)
      for (std::size_t j = 0; j < nf; ++j)
        t.features.at(r, j) = (t.features.at(r, j) - st.temporal_mean[j]) / st.temporal_std[j];
    for (std::size_t j = 0; j < ns; ++j) t.statics[j] = (t.statics[j] - st.static_mean[j]) / st.static_std[j];
  }
  cohort.stats = std::move(st);
  return cohort;
}

/// bin → length filter → split → impute → z-score.
inline Cohort preprocess(const RawCohort& raw, std::uint64_t split_seed) {
  return normalize(split(bin_cohort(raw), split_seed));
}

}  // namespace bcqforge::data
