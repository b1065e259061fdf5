#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/random.hpp"

namespace bcqforge::sim {

using json = nlohmann::json;

// Latent model, per patient:
//   severity x_t in [0, severity_max], driven by a static-dependent drift and the treatment effect,
//     and pulled back toward its admission level at rate `reversion` so that stay length alone
//     does not move mortality
//   hemoglobin h_t, a separate latent process that transfusion raises by hb_boost
// Treating while h_t < theta_hb lowers severity by `benefit`; treating above it raises it by `harm`.
// The logged clinician acts only near the threshold with noise (|h_t − θ| ≤ behavior_band) and
// otherwise follows the rule. The band keeps ever-transfused prevalence tunable; hb_mean is
// calibrated so the realized prevalence hits prevalence_target.
struct SimConfig {
  std::size_t n_patients = 2000;
  std::size_t min_bins = 6;
  std::size_t max_bins = 42;
  double severity_max = 24.0;
  double drift_scale = 0.5;
  double reversion = 0.25;
  double benefit = 2.0;
  double harm = 1.0;
  double theta_hb = 7.0;
  double noise_std = 0.5;
  double alpha = 0.15;
  double beta = 0.1;
  double mortality_intercept = -3.4;
  double prevalence_target = 0.53;
  double behavior_noise = 0.2;
  double behavior_band = 1.0;
  double hb_boost = 1.0;
  double hb_decline = 0.1;
  double missing_rate = 0.1;
  double outlier_rate = 0.002;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_patients == 0) throw ConfigError("sim.n_patients must be positive");
    if (min_bins < 6 || max_bins > 42 || min_bins > max_bins) throw ConfigError("sim bin range must lie within [6, 42]");
    if (!(severity_max > 0.0)) throw ConfigError("sim.severity_max must be positive");
    if (benefit < 0.0 || harm < 0.0) throw ConfigError("sim treatment effects must be non-negative");
    if (!(reversion >= 0.0 && reversion < 1.0)) throw ConfigError("sim.reversion must lie in [0, 1)");
    if (!(noise_std >= 0.0)) throw ConfigError("sim.noise_std must be >= 0");
    const std::pair<const char*, double> probs[] = {{"prevalence_target", prevalence_target},
                                                    {"behavior_noise", behavior_noise},
                                                    {"missing_rate", missing_rate},
                                                    {"outlier_rate", outlier_rate}};
    for (const auto& [name, p] : probs)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("sim.") + name + " must lie in [0, 1]");
    if (!(behavior_band >= 0.0)) throw ConfigError("sim.behavior_band must be >= 0");
  }

  json to_json() const {
    return {{"n_patients", n_patients},       {"min_bins", min_bins},
            {"max_bins", max_bins},           {"severity_max", severity_max},
            {"drift_scale", drift_scale},     {"reversion", reversion},
            {"benefit", benefit},
            {"harm", harm},                   {"theta_hb", theta_hb},
            {"noise_std", noise_std},         {"alpha", alpha},
            {"beta", beta},                   {"mortality_intercept", mortality_intercept},
            {"prevalence_target", prevalence_target}, {"behavior_noise", behavior_noise},
            {"behavior_band", behavior_band}, {"hb_boost", hb_boost},
            {"hb_decline", hb_decline},       {"missing_rate", missing_rate},
            {"outlier_rate", outlier_rate},   {"seed", seed}};
  }

  static SimConfig from_json(const json& j) {
    SimConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "n_patients") c.n_patients = v.get<std::size_t>();
      else if (k == "min_bins") c.min_bins = v.get<std::size_t>();
      else if (k == "max_bins") c.max_bins = v.get<std::size_t>();
      else if (k == "severity_max") c.severity_max = v.get<double>();
      else if (k == "drift_scale") c.drift_scale = v.get<double>();
      else if (k == "reversion") c.reversion = v.get<double>();
      else if (k == "benefit") c.benefit = v.get<double>();
      else if (k == "harm") c.harm = v.get<double>();
      else if (k == "theta_hb") c.theta_hb = v.get<double>();
      else if (k == "noise_std") c.noise_std = v.get<double>();
      else if (k == "alpha") c.alpha = v.get<double>();
      else if (k == "beta") c.beta = v.get<double>();
      else if (k == "mortality_intercept") c.mortality_intercept = v.get<double>();
      else if (k == "prevalence_target") c.prevalence_target = v.get<double>();
      else if (k == "behavior_noise") c.behavior_noise = v.get<double>();
      else if (k == "behavior_band") c.behavior_band = v.get<double>();
      else if (k == "hb_boost") c.hb_boost = v.get<double>();
      else if (k == "hb_decline") c.hb_decline = v.get<double>();
      else if (k == "missing_rate") c.missing_rate = v.get<double>();
      else if (k == "outlier_rate") c.outlier_rate = v.get<double>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown sim config key: " + k);
    }
    c.validate();
    return c;
  }
};

/// Which rule picks the actions written into the log.
enum class ActionRule { behavior, oracle, random, never };

struct OracleLabel {
  std::string patient_id;
  std::vector<int> actions;  // one per transition: treat iff latent hb < θ
};

/// Ground truth kept alongside the observable cohort.
struct LatentPatient {
  std::vector<double> severity;  // T
  std::vector<double> hb;        // T
  double mortality_probability = 0.0;
};

struct SimResult {
  data::RawCohort raw;
  std::vector<OracleLabel> oracle;
  std::vector<LatentPatient> latent;
  double hb_mean = 0.0;  // calibrated initial hemoglobin mean
};

inline data::FeatureSchema simulator_schema() {
  data::FeatureSchema s;
  s.static_features = {"age", "weight", "sex"};
  s.temporal_features = {{"sofa", 0, 24},   {"hb", 2, 20},     {"hr", 20, 250}, {"map", 20, 200},
                         {"lactate", 0.1, 30}, {"temp", 30, 43}, {"wbc", 0.1, 100}};
  s.acuity_channel = "sofa";
  s.bin_hours = 4.0;
  return s;
}

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

inline double mortality_probability(const SimConfig& cfg, std::span<const double> severity) {
  double mean = 0.0;
  for (double x : severity) mean += x;
  mean /= static_cast<double>(severity.size());
  return sigmoid(cfg.alpha * mean + cfg.beta * severity.back() + cfg.mortality_intercept);
}

namespace detail {

enum Stream : std::uint64_t { kStatics = 1, kHb = 2, kSeverity = 3, kObserve = 4, kOutcome = 5, kPolicy = 6 };

inline constexpr std::uint64_t kPilotSalt = 0x9e11a7;

inline int choose_action(const SimConfig& cfg, ActionRule rule, double hb, Rng& rng) {
  const int oracle = hb < cfg.theta_hb ? 1 : 0;
  switch (rule) {
    case ActionRule::oracle: return oracle;
    case ActionRule::never: return 0;
    case ActionRule::random: return bernoulli(rng, 0.5) ? 1 : 0;
    case ActionRule::behavior: break;
  }
  if (std::abs(hb - cfg.theta_hb) > cfg.behavior_band) return oracle;
  return bernoulli(rng, cfg.behavior_noise) ? 1 - oracle : oracle;
}

// Stay length, hemoglobin path and actions; the part of the model prevalence depends on.
struct HbPath {
  std::size_t bins = 0;
  std::vector<double> hb;
  std::vector<int> actions;
};

inline HbPath simulate_hb(const SimConfig& cfg, ActionRule rule, double hb_mean, std::uint64_t patient_seed) {
  Rng rng(derive_seed(patient_seed, kHb));
  Rng policy_rng(derive_seed(patient_seed, kPolicy));
  HbPath p;
  p.bins = cfg.min_bins + uniform_index(rng, cfg.max_bins - cfg.min_bins + 1);
  p.hb.resize(p.bins);
  p.actions.resize(p.bins - 1);
  p.hb[0] = std::clamp(normal(rng, hb_mean, 1.5), 3.0, 17.0);
  for (std::size_t t = 0; t + 1 < p.bins; ++t) {
    p.actions[t] = choose_action(cfg, rule, p.hb[t], policy_rng);
    const double next = p.hb[t] - cfg.hb_decline + cfg.hb_boost * p.actions[t] + normal(rng, 0.0, 0.3);
    p.hb[t + 1] = std::clamp(next, 3.0, 17.0);
  }
  return p;
}

inline double pilot_prevalence(const SimConfig& cfg, double hb_mean, std::size_t n) {
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const HbPath p = simulate_hb(cfg, ActionRule::behavior, hb_mean, derive_seed(cfg.seed ^ kPilotSalt, i));
    treated += std::any_of(p.actions.begin(), p.actions.end(), [](int a) { return a != 0; });
  }
  return static_cast<double>(treated) / static_cast<double>(n);
}

}  // namespace detail

/// Initial hemoglobin mean whose pilot prevalence of ≥1 logged transfusion matches the target.
/// Bisection on a fixed pilot stream, so the answer is a deterministic function of the config.
inline double calibrate_hb_mean(const SimConfig& cfg, std::size_t pilot = 1000) {
  double lo = cfg.theta_hb - 4.0, hi = cfg.theta_hb + 8.0;  // prevalence falls as hb_mean rises
  for (int it = 0; it < 30; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::pilot_prevalence(cfg, mid, pilot) > cfg.prevalence_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Simulates a cohort in the raw ingest format. Each patient draws from its own streams derived
/// from (seed, index), so output is a pure function of the config.
inline SimResult generate_cohort(const SimConfig& cfg, ActionRule rule = ActionRule::behavior) {
  cfg.validate();
  SimResult out;
  out.raw.schema = simulator_schema();
  out.hb_mean = calibrate_hb_mean(cfg);
  const double bin = out.raw.schema.bin_hours;

  for (std::size_t i = 0; i < cfg.n_patients; ++i) {
    const std::uint64_t ps = derive_seed(cfg.seed, i);
    const detail::HbPath path = detail::simulate_hb(cfg, rule, out.hb_mean, ps);
    const std::size_t T = path.bins;

    Rng srng(derive_seed(ps, detail::kStatics));
    const double age = std::clamp(normal(srng, 65.0, 14.0), 18.0, 95.0);
    const double weight = std::clamp(normal(srng, 80.0, 18.0), 35.0, 200.0);
    const double sex = bernoulli(srng, 0.5) ? 1.0 : 0.0;
    const double z = 0.7 * (age - 65.0) / 14.0 + 0.3 * (weight - 80.0) / 18.0 + normal(srng, 0.0, 0.5);
    const double drift = cfg.drift_scale * std::tanh(z);

    Rng xrng(derive_seed(ps, detail::kSeverity));
    LatentPatient lat;
    lat.hb = path.hb;
    lat.severity.resize(T);
    lat.severity[0] = std::clamp(normal(xrng, 6.0 + 2.0 * z, 2.0), 0.0, cfg.severity_max);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      double effect = 0.0;
      if (path.actions[t]) effect = path.hb[t] < cfg.theta_hb ? -cfg.benefit : cfg.harm;
      const double pull = cfg.reversion * (lat.severity[0] - lat.severity[t]);
      const double next = lat.severity[t] + drift + pull + effect + normal(xrng, 0.0, cfg.noise_std);
      lat.severity[t + 1] = std::clamp(next, 0.0, cfg.severity_max);
    }
    lat.mortality_probability = mortality_probability(cfg, lat.severity);

    data::RawPatient p;
    p.id = "sim" + std::to_string(i);
    p.statics = {age, weight, sex};
    p.action_bins = path.actions;
    Rng orng(derive_seed(ps, detail::kOutcome));
    p.survived28 = uniform01(orng) >= lat.mortality_probability;

    Rng mrng(derive_seed(ps, detail::kObserve));
    auto emit = [&](double time, std::size_t feature, double value) {
      if (bernoulli(mrng, cfg.outlier_rate)) value = 9999.0;
      p.measurements.push_back({time, feature, value});
    };
    for (std::size_t t = 0; t < T; ++t) {
      const double x = lat.severity[t];
      const double t0 = bin * static_cast<double>(t);
      auto when = [&] { return t0 + uniform(mrng, 0.0, bin * 0.999); };
      // Acuity is always charted in the first bin so every stay has a starting score.
      if (t == 0 || !bernoulli(mrng, cfg.missing_rate))
        emit(t0, 0, std::clamp(std::round(x + normal(mrng, 0.0, 0.5)), 0.0, 24.0));
      if (!bernoulli(mrng, cfg.missing_rate)) emit(when(), 1, path.hb[t] + normal(mrng, 0.0, 0.3));
      const std::size_t hr_count = 1 + uniform_index(mrng, 3);
      for (std::size_t k = 0; k < hr_count; ++k) emit(when(), 2, 80.0 + 2.5 * x + normal(mrng, 0.0, 5.0));
      if (!bernoulli(mrng, cfg.missing_rate)) emit(when(), 3, 85.0 - 1.5 * x + normal(mrng, 0.0, 5.0));
      if (bernoulli(mrng, 0.5)) emit(when(), 4, std::max(0.3, 1.0 + 0.25 * x + normal(mrng, 0.0, 0.4)));
      if (bernoulli(mrng, 0.7)) emit(when(), 5, 37.0 + normal(mrng, 0.0, 0.5));
      if (bernoulli(mrng, 0.4)) emit(when(), 6, std::max(0.5, 9.0 + normal(mrng, 0.0, 2.0)));
    }
    // Discharge reading at the end of the stay fixes the duration at exactly T bins.
    p.measurements.push_back({bin * static_cast<double>(T), 0,
                              std::clamp(std::round(lat.severity[T - 1]), 0.0, 24.0)});
    std::stable_sort(p.measurements.begin(), p.measurements.end(),
                     [](const data::Measurement& a, const data::Measurement& b) { return a.time_h < b.time_h; });

    OracleLabel label{p.id, std::vector<int>(T - 1)};
    for (std::size_t t = 0; t + 1 < T; ++t) label.actions[t] = path.hb[t] < cfg.theta_hb ? 1 : 0;

    out.raw.patients.push_back(std::move(p));
    out.oracle.push_back(std::move(label));
    out.latent.push_back(std::move(lat));
  }
  return out;
}

inline double transfusion_prevalence(const data::RawCohort& raw) {
  if (raw.patients.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& p : raw.patients) n += std::any_of(p.action_bins.begin(), p.action_bins.end(), [](int a) { return a != 0; });
  return static_cast<double>(n) / static_cast<double>(raw.patients.size());
}

inline double survival_rate(const data::RawCohort& raw) {
  if (raw.patients.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& p : raw.patients) n += p.survived28;
  return static_cast<double>(n) / static_cast<double>(raw.patients.size());
}

inline void write_oracle_labels(const std::string& path, const std::vector<OracleLabel>& labels) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& l : labels) out << json{{"patient_id", l.patient_id}, {"oracle_actions", l.actions}}.dump() << '\n';
}

inline std::vector<OracleLabel> read_oracle_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<OracleLabel> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("patient_id").get<std::string>(), j.at("oracle_actions").get<std::vector<int>>()});
    } catch (const json::exception& e) {
      throw IngestionError(path + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace bcqforge::sim
