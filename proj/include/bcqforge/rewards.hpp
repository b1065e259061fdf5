#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/error.hpp"

namespace bcqforge::rewards {

/// R1: mortality only. R2: acuity deltas on interior transitions plus mortality at the end.
enum class Scheme { r1, r2 };

inline Scheme parse_scheme(const std::string& s) {
  if (s == "R1" || s == "r1") return Scheme::r1;
  if (s == "R2" || s == "r2") return Scheme::r2;
  throw ConfigError("unknown reward scheme: " + s);
}

inline const char* scheme_name(Scheme s) { return s == Scheme::r1 ? "R1" : "R2"; }

struct RewardConfig {
  Scheme scheme = Scheme::r2;
  double terminal_magnitude = 10.0;
  double step_magnitude = 1.0;

  void validate() const {
    if (!(terminal_magnitude > 0.0)) throw ConfigError("reward.terminal_magnitude must be > 0");
    if (!(step_magnitude > 0.0)) throw ConfigError("reward.step_magnitude must be > 0");
  }
};

/// Zero everywhere except the terminal transition, which gets ±terminal by 28-day survival.
inline std::vector<double> r1_rewards(std::size_t transitions, bool survived28, double terminal = 10.0) {
  std::vector<double> r(transitions, 0.0);
  if (!r.empty()) r.back() = survived28 ? terminal : -terminal;
  return r;
}

/// Transition t→t+1 earns +step if acuity falls, −step if it rises, 0 otherwise; the terminal
/// transition's delta is replaced by the mortality reward.
inline std::vector<double> r2_rewards(std::span<const double> acuity, bool survived28, double step = 1.0,
                                      double terminal = 10.0) {
  for (double a : acuity)
    if (std::isnan(a)) throw InputError("R2 reward: missing acuity bin");
  const std::size_t n = acuity.size() > 0 ? acuity.size() - 1 : 0;
  std::vector<double> r(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    if (acuity[t + 1] < acuity[t]) {
      r[t] = step;
    } else if (acuity[t + 1] > acuity[t]) {
      r[t] = -step;
    }
  }
  if (!r.empty()) r.back() = survived28 ? terminal : -terminal;
  return r;
}

inline std::vector<double> assign(const RewardConfig& cfg, const data::Trajectory& t) {
  if (cfg.scheme == Scheme::r1) return r1_rewards(t.num_transitions(), t.survived28, cfg.terminal_magnitude);
  if (t.acuity.size() != t.length()) throw InputError("R2 reward: acuity series length != bin count for " + t.patient_id);
  return r2_rewards(t.acuity, t.survived28, cfg.step_magnitude, cfg.terminal_magnitude);
}

}  // namespace bcqforge::rewards
