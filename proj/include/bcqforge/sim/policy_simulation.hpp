#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/sim/kmeans.hpp"

namespace bcqforge::sim {

/// mortality: treated patients who died, matched against surviving controls.
/// acuity: treated patients whose acuity rose from admission to discharge, matched against
/// controls whose acuity did not.
enum class OutcomeVariant { mortality, acuity };

inline const char* variant_name(OutcomeVariant v) { return v == OutcomeVariant::mortality ? "mortality" : "acuity"; }

struct PolicySimOptions {
  OutcomeVariant variant = OutcomeVariant::mortality;
  std::size_t k = 10;
  double agreement_threshold = 0.5;
  std::uint64_t seed = 0;
};

struct PolicySimReport {
  OutcomeVariant variant = OutcomeVariant::mortality;
  std::size_t patients = 0;
  std::size_t selected = 0;
  std::size_t changed = 0;         // selected patients whose outcome was replaced
  std::size_t empty_controls = 0;  // selected patients left at their original outcome
  double observed_rate = 0.0;
  double simulated_rate = 0.0;

  /// e.g. "16.48% → 13.74%"
  std::string delta_string() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f%% → %.2f%%", 100.0 * observed_rate, 100.0 * simulated_rate);
    return buf;
  }

  nlohmann::json to_json() const {
    return {{"variant", variant_name(variant)}, {"patients", patients},
            {"selected", selected},             {"changed", changed},
            {"empty_control_groups", empty_controls}, {"observed_rate", observed_rate},
            {"simulated_rate", simulated_rate}, {"summary", delta_string()}};
  }
};

inline bool acuity_worsened(const data::Trajectory& t) {
  if (t.acuity.size() < 2) throw InputError("policy simulation: patient " + t.patient_id + " has no acuity series");
  return t.acuity.back() > t.acuity.front();
}

namespace detail {

inline bool bad_outcome(const data::Trajectory& t, OutcomeVariant v) {
  return v == OutcomeVariant::mortality ? !t.survived28 : acuity_worsened(t);
}

// Static features ++ per-feature temporal means over the features both cohorts share, one row
// per patient (target first, then source), standardized column-wise across the union.
inline nn::Tensor cluster_features(const data::Cohort& target, const data::Cohort& source) {
  std::vector<std::pair<std::size_t, std::size_t>> statics, temporal;
  for (std::size_t i = 0; i < target.schema.static_features.size(); ++i)
    for (std::size_t j = 0; j < source.schema.static_features.size(); ++j)
      if (target.schema.static_features[i] == source.schema.static_features[j]) statics.emplace_back(i, j);
  for (std::size_t i = 0; i < target.schema.temporal_features.size(); ++i)
    if (auto j = source.schema.temporal_index(target.schema.temporal_features[i].name)) temporal.emplace_back(i, *j);
  if (temporal.empty()) throw InputError("policy simulation: cohorts share no temporal features");

  const std::size_t n = target.size() + source.size();
  nn::Tensor x = nn::Tensor::matrix(n, statics.size() + temporal.size());
  auto fill = [&](const data::Trajectory& t, std::size_t row, bool is_target) {
    std::size_t c = 0;
    for (auto [a, b] : statics) x.at(row, c++) = t.statics.at(is_target ? a : b);
    for (auto [a, b] : temporal) {
      const std::size_t f = is_target ? a : b;
      double s = 0.0;
      for (std::size_t r = 0; r < t.length(); ++r) s += t.features.at(r, f);
      x.at(row, c++) = s / static_cast<double>(t.length());
    }
  };
  for (std::size_t i = 0; i < target.size(); ++i) fill(target.trajectories[i], i, true);
  for (std::size_t i = 0; i < source.size(); ++i) fill(source.trajectories[i], target.size() + i, false);
  if (!x.all_finite()) throw InputError("policy simulation: cohort features must be imputed first");
  return standardize_columns(std::move(x));
}

}  // namespace detail

/// Cluster-and-match estimate of outcome rates under an alternative policy.
///
/// `policy[i]` is the recommended action sequence for target patient i (one per transition).
/// A selected patient takes the control group's (good) outcome only when the recommendation
/// differs from what was logged and agrees with the per-bin control majority on at least
/// `agreement_threshold` of the comparable bins. Replaying the logged actions is therefore an
/// exact fixed point.
inline PolicySimReport policy_simulation(const data::Cohort& target, const data::Cohort& source,
                                         const std::vector<std::vector<int>>& policy, const PolicySimOptions& opt = {}) {
  if (target.size() == 0 || source.size() == 0) throw InputError("policy simulation: empty cohort");
  if (policy.size() != target.size()) throw InputError("policy simulation: one action sequence per target patient required");
  if (!(opt.agreement_threshold >= 0.0 && opt.agreement_threshold <= 1.0))
    throw ConfigError("policy simulation: agreement threshold must lie in [0, 1]");

  const nn::Tensor features = detail::cluster_features(target, source);
  const ClusterModel clusters = kmeans(features, std::min(opt.k, features.rows()), opt.seed);

  std::vector<std::vector<std::size_t>> controls(clusters.k());
  for (std::size_t j = 0; j < source.size(); ++j)
    if (!detail::bad_outcome(source.trajectories[j], opt.variant))
      controls[clusters.assignment[target.size() + j]].push_back(j);

  PolicySimReport rep;
  rep.variant = opt.variant;
  rep.patients = target.size();
  std::size_t observed_bad = 0, simulated_bad = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const data::Trajectory& t = target.trajectories[i];
    const bool bad = detail::bad_outcome(t, opt.variant);
    observed_bad += bad;
    if (!bad || !t.ever_treated()) {
      simulated_bad += bad;
      continue;
    }
    ++rep.selected;
    const auto& rec = policy[i];
    if (rec.size() != t.actions.size()) throw InputError("policy simulation: action count mismatch for " + t.patient_id);
    const auto& group = controls[clusters.assignment[i]];
    if (group.empty()) {
      ++rep.empty_controls;
      ++simulated_bad;
      continue;
    }
    const bool differs = rec != t.actions;
    std::size_t compared = 0, agree = 0;
    for (std::size_t b = 0; b < rec.size(); ++b) {
      std::size_t votes = 0, treat = 0;
      for (std::size_t j : group) {
        const auto& a = source.trajectories[j].actions;
        if (b < a.size()) {
          ++votes;
          treat += a[b] != 0;
        }
      }
      if (votes == 0) continue;
      const int majority = 2 * treat > votes ? 1 : 0;
      ++compared;
      agree += (rec[b] != 0 ? 1 : 0) == majority;
    }
    const bool adopt = differs && compared > 0 &&
                       static_cast<double>(agree) >= opt.agreement_threshold * static_cast<double>(compared);
    if (adopt) {
      ++rep.changed;
    } else {
      ++simulated_bad;
    }
  }
  rep.observed_rate = static_cast<double>(observed_bad) / static_cast<double>(target.size());
  rep.simulated_rate = static_cast<double>(simulated_bad) / static_cast<double>(target.size());
  return rep;
}

}  // namespace bcqforge::sim
