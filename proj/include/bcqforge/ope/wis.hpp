#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/error.hpp"

namespace bcqforge::ope {

/// Σ_t γ^t r_t
inline double trajectory_return(std::span<const double> rewards, double gamma) {
  double r = 0.0, g = 1.0;
  for (double x : rewards) {
    r += g * x;
    g *= gamma;
  }
  return r;
}

/// Self-normalized Σ w_n R_n / Σ w_n. Throws NumericalError when the weights sum to zero.
inline double wis_estimate(std::span<const double> returns, std::span<const double> weights) {
  if (returns.size() != weights.size()) throw InputError("wis: returns/weights length mismatch");
  if (returns.empty()) throw InputError("wis: no trajectories");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw InputError("wis: negative or NaN weight");
    num += weights[i] * returns[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw NumericalError("wis: degenerate estimate, all weights are zero");
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  return std::clamp(num / den, *lo, *hi);  // guards the convex-combination bound against round-off
}

struct WISOptions {
  double epsilon = 0.01;   // π(a|s) = 1 − ε for the greedy action, ε otherwise
  double mu_floor = 1e-6;
  double clip_low = 1e-4;  // per-step ratio bounds
  double clip_high = 1e4;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("wis.epsilon must lie in (0, 0.5)");
    if (!(mu_floor > 0.0)) throw ConfigError("wis.mu_floor must be > 0");
    if (!(clip_low > 0.0 && clip_low < clip_high)) throw ConfigError("wis clip bounds must satisfy 0 < low < high");
  }
};

/// One evaluation trajectory: logged actions, the evaluated policy's greedy actions, and μ's
/// probability of each logged action, all per decision step.
struct WISTrajectory {
  std::vector<int> logged;
  std::vector<int> greedy;
  std::vector<double> mu_logged;
  double ret = 0.0;
};

struct WISReport {
  double estimate = 0.0;
  std::vector<double> weights;
  std::vector<double> returns;
  double effective_sample_size = 0.0;
  std::size_t steps = 0;
  std::size_t clipped_low = 0;
  std::size_t clipped_high = 0;

  nlohmann::json to_json(bool with_vectors = false) const {
    nlohmann::json j{{"wis", estimate},
                     {"effective_sample_size", effective_sample_size},
                     {"trajectories", returns.size()},
                     {"steps", steps},
                     {"clipped_low", clipped_low},
                     {"clipped_high", clipped_high}};
    if (with_vectors) {
      j["weights"] = weights;
      j["returns"] = returns;
    }
    return j;
  }
};

/// w_n = Π_t clip(π(a_t|s_t) / max(μ(a_t|s_t), floor)); fixed summation order.
inline WISReport wis(const std::vector<WISTrajectory>& trajectories, const WISOptions& opt = {}) {
  opt.validate();
  WISReport rep;
  for (const auto& t : trajectories) {
    if (t.logged.size() != t.greedy.size() || t.logged.size() != t.mu_logged.size())
      throw InputError("wis: per-step vectors disagree in length");
    double w = 1.0;
    for (std::size_t s = 0; s < t.logged.size(); ++s) {
      const double pi = t.logged[s] == t.greedy[s] ? 1.0 - opt.epsilon : opt.epsilon;
      double ratio = pi / std::max(t.mu_logged[s], opt.mu_floor);
      if (ratio < opt.clip_low) {
        ratio = opt.clip_low;
        ++rep.clipped_low;
      } else if (ratio > opt.clip_high) {
        ratio = opt.clip_high;
        ++rep.clipped_high;
      }
      w *= ratio;
      ++rep.steps;
    }
    rep.weights.push_back(w);
    rep.returns.push_back(t.ret);
  }
  rep.estimate = wis_estimate(rep.returns, rep.weights);
  double s = 0.0, s2 = 0.0;
  for (double w : rep.weights) {
    s += w;
    s2 += w * w;
  }
  rep.effective_sample_size = s2 > 0.0 && std::isfinite(s2) ? s * s / s2 : 0.0;
  return rep;
}

/// Fraction of steps where the policy's action equals the logged one.
inline double accuracy_match(std::span<const int> policy, std::span<const int> logged) {
  if (policy.size() != logged.size()) throw InputError("accuracy: length mismatch");
  if (logged.empty()) throw InputError("accuracy: no steps to compare");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < logged.size(); ++i) hit += policy[i] == logged[i];
  return static_cast<double>(hit) / static_cast<double>(logged.size());
}

}  // namespace bcqforge::ope
