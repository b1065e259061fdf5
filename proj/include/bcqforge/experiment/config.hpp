#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/bcq/bcq.hpp"
#include "bcqforge/encoders/encoder.hpp"
#include "bcqforge/encoders/pretrain.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/ope/baselines.hpp"
#include "bcqforge/ope/wis.hpp"
#include "bcqforge/rewards.hpp"
#include "bcqforge/sim/policy_simulation.hpp"
#include "bcqforge/sim/simulator.hpp"
#include "bcqforge/transfer/transfer.hpp"

namespace bcqforge::experiment {

using json = nlohmann::json;

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// BCQ search space, row names as published.
inline json bcq_search_space() {
  return {{"Number of nodes per layer in Q-network", {32, 64, 128}},
          {"Batch size", {8, 16, 32, 64, 128, 256, 512}},
          {"Optimizer", {"SGD", "Adam"}},
          {"Discount factor γ", {0.97, 0.975, 0.98, 0.985, 0.99, 0.995}},
          {"Target Q-network update frequency", {1000, 2000, 4000, 8000}},  // training iterations
          {"Learning rate", {1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3}},
          {"Threshold τ", {0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5}},
          {"Huber loss κ", {0.8, 0.9, 1.0, 1.1, 1.2}}};
}

inline json search_space() {
  return {{"classification_baselines", ope::BaselineGrids{}.to_json()}, {"bcq", bcq_search_space()}};
}

struct OpeSettings {
  double epsilon = 0.01;
  bool discounted = true;  // false scores R_n with γ = 1
  double mu_floor = 1e-6;
  double clip_low = 1e-4;
  double clip_high = 1e4;

  ope::WISOptions wis_options() const { return {epsilon, mu_floor, clip_low, clip_high}; }
};

struct TransferSettings {
  std::vector<transfer::Mode> modes{transfer::Mode::qvt, transfer::Mode::wt, transfer::Mode::wtr};
  std::vector<std::string> reinit_layers{"q.fc2", "g.fc1"};
  double qvt_weight = 1.0;
  double target_fraction = 0.1;  // target cohort size relative to sim.n_patients
  double target_noise = 0.1;     // σ added to normalized target features
  std::size_t iterations = 0;    // target-task BCQ iterations; 0 uses bcq.iterations
};

struct SimulateSettings {
  std::size_t k = 10;
  double agreement_threshold = 0.5;
};

struct BaselineSettings {
  std::vector<double> lr_inverse_regularization = ope::BaselineGrids{}.lr_inverse_regularization;
  std::vector<std::size_t> mlp_hidden = ope::BaselineGrids{}.mlp_hidden;
  std::vector<std::string> mlp_activation = ope::BaselineGrids{}.mlp_activation;
  std::size_t mlp_batch = 64;
  std::string mlp_optimizer = "Adam";
  double mlp_learning_rate = 1e-3;
  std::size_t steps = 3000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::string out = "runs/default";
  std::string cohort;  // empty: <out>/cohort.jsonl
  std::string expert;  // empty: <out>/policy_seed<seed>.json
  sim::SimConfig sim;
  encoders::EncoderConfig encoder;
  encoders::PretrainConfig pretrain;
  rewards::RewardConfig reward;
  bcq::BCQConfig bcq;
  bcq::ClassifierConfig behavior_policy;  // μ
  OpeSettings ope;
  TransferSettings transfer;
  SimulateSettings simulate;
  BaselineSettings baselines;

  ExperimentConfig() {
    behavior_policy.hidden = 64;
    bcq.behavior.hidden = 64;
  }

  std::filesystem::path out_dir() const { return out; }
  std::filesystem::path cohort_path() const { return cohort.empty() ? out_dir() / "cohort.jsonl" : std::filesystem::path(cohort); }
  std::filesystem::path schema_path() const { return cohort_path().parent_path() / "schema.json"; }
  std::filesystem::path oracle_path() const { return cohort_path().parent_path() / "oracle.jsonl"; }
  std::filesystem::path expert_path() const {
    return expert.empty() ? out_dir() / ("policy_seed" + std::to_string(seed) + ".json") : std::filesystem::path(expert);
  }
  double return_gamma() const { return ope.discounted ? bcq.gamma : 1.0; }

  void validate() const {
    if (seeds == 0) throw ConfigError("seeds must be >= 1");
    if (out.empty()) throw ConfigError("paths.out must be set");
    sim.validate();
    encoder.validate();
    if (pretrain.steps > 0 && !(pretrain.learning_rate > 0.0)) throw ConfigError("pretrain.learning_rate must be > 0");
    reward.validate();
    bcq.validate();
    behavior_policy.validate();
    ope.wis_options().validate();
    if (transfer.modes.empty()) throw ConfigError("transfer.modes must list at least one mode");
    if (!(transfer.target_fraction > 0.0 && transfer.target_fraction <= 1.0))
      throw ConfigError("transfer.target_fraction must lie in (0, 1]");
    if (!(transfer.target_noise >= 0.0)) throw ConfigError("transfer.target_noise must be >= 0");
    for (auto m : transfer.modes)
      if (m == transfer::Mode::wtr && transfer.reinit_layers.empty())
        throw ConfigError("transfer.reinit_layers must be nonempty for wtr");
    if (simulate.k == 0) throw ConfigError("simulate.k must be positive");
    if (!(simulate.agreement_threshold >= 0.0 && simulate.agreement_threshold <= 1.0))
      throw ConfigError("simulate.agreement_threshold must lie in [0, 1]");
    if (baselines.lr_inverse_regularization.empty() || baselines.mlp_hidden.empty() || baselines.mlp_activation.empty())
      throw ConfigError("baselines grids must be nonempty");
    for (double c : baselines.lr_inverse_regularization)
      if (!(c > 0.0)) throw ConfigError("baselines.lr_inverse_regularization entries must be > 0");
    for (const auto& a : baselines.mlp_activation) ope::grid_activation(a);
    nn::parse_optimizer(baselines.mlp_optimizer);
  }

  json to_json() const;
  static ExperimentConfig from_json(const json& j);

  /// Canonical form: sorted keys, shortest round-trip doubles.
  std::string canonical() const { return to_json().dump(); }
  std::string hash() const { return fnv1a_hex(canonical()); }

  /// Hash over the sections that determine trained models; checkpoints carry it so that artifacts
  /// from different setups refuse to combine.
  std::string model_hash() const {
    const json j = to_json();
    json m{{"seed", j["seed"]},       {"cohort", cohort_path().string()}, {"sim", j["sim"]},
           {"encoder", j["encoder"]}, {"pretrain", j["pretrain"]},        {"reward", j["reward"]},
           {"bcq", j["bcq"]},         {"behavior_policy", j["behavior_policy"]}};
    return fnv1a_hex(m.dump());
  }
};

namespace detail {

inline json classifier_json(const bcq::ClassifierConfig& c) {
  return {{"hidden", c.hidden},
          {"activation", nn::activation_name(c.activation)},
          {"optimizer", nn::optimizer_name(c.optimizer)},
          {"learning_rate", c.learning_rate},
          {"batch", c.batch},
          {"steps", c.steps}};
}

inline bcq::ClassifierConfig classifier_from(const json& j) {
  bcq::ClassifierConfig c;
  c.hidden = j.at("hidden").get<std::size_t>();
  c.activation = nn::parse_activation(j.at("activation").get<std::string>());
  c.optimizer = nn::parse_optimizer(j.at("optimizer").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch = j.at("batch").get<std::size_t>();
  c.steps = j.at("steps").get<std::size_t>();
  return c;
}

inline bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

/// Copies `patch` onto `base`, refusing keys or value kinds the defaults do not have.
inline void overlay(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config section " + (path.empty() ? std::string("<root>") : path) + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key: " + key);
    json& slot = base[it.key()];
    if (slot.is_object()) {
      overlay(slot, it.value(), key);
    } else {
      if (!same_kind(slot, it.value())) throw ConfigError("config key " + key + " has the wrong type");
      slot = it.value();
    }
  }
}

template <class T>
T read(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key ") + section + "." + key + " is invalid");
  }
}

}  // namespace detail

inline json ExperimentConfig::to_json() const {
  json enc = encoder.to_json();
  enc.erase("seed");  // derived from the run seed
  json s = sim.to_json();
  s.erase("seed");
  std::vector<std::string> modes;
  for (auto m : transfer.modes) modes.emplace_back(transfer::mode_name(m));
  json b{{"gamma", bcq.gamma},
         {"tau", bcq.tau},
         {"kappa", bcq.kappa},
         {"hidden", bcq.hidden},
         {"batch", bcq.batch},
         {"learning_rate", bcq.learning_rate},
         {"optimizer", nn::optimizer_name(bcq.optimizer)},
         {"sync_every", bcq.sync_every},
         {"iterations", bcq.iterations},
         {"eval_stride", bcq.eval_stride},
         {"behavior", detail::classifier_json(bcq.behavior)}};
  return {{"seed", seed},
          {"seeds", seeds},
          {"paths", {{"out", out}, {"cohort", cohort}, {"expert", expert}}},
          {"sim", s},
          {"encoder", enc},
          {"pretrain", {{"steps", pretrain.steps}, {"learning_rate", pretrain.learning_rate}, {"eval_trajectories", pretrain.eval_trajectories}}},
          {"reward", {{"scheme", rewards::scheme_name(reward.scheme)}, {"terminal_magnitude", reward.terminal_magnitude}, {"step_magnitude", reward.step_magnitude}}},
          {"bcq", b},
          {"behavior_policy", detail::classifier_json(behavior_policy)},
          {"ope", {{"epsilon", ope.epsilon}, {"discounted", ope.discounted}, {"mu_floor", ope.mu_floor}, {"clip_low", ope.clip_low}, {"clip_high", ope.clip_high}}},
          {"transfer",
           {{"modes", modes},
            {"reinit_layers", transfer.reinit_layers},
            {"qvt_weight", transfer.qvt_weight},
            {"target_fraction", transfer.target_fraction},
            {"target_noise", transfer.target_noise},
            {"iterations", transfer.iterations}}},
          {"simulate", {{"k", simulate.k}, {"agreement_threshold", simulate.agreement_threshold}}},
          {"baselines",
           {{"lr_inverse_regularization", baselines.lr_inverse_regularization},
            {"mlp_hidden", baselines.mlp_hidden},
            {"mlp_activation", baselines.mlp_activation},
            {"mlp_batch", baselines.mlp_batch},
            {"mlp_optimizer", baselines.mlp_optimizer},
            {"mlp_learning_rate", baselines.mlp_learning_rate},
            {"steps", baselines.steps}}},
          {"search_space", search_space()}};
}

/// Accepts a partial document: missing keys keep their defaults, unknown keys are rejected.
inline ExperimentConfig ExperimentConfig::from_json(const json& patch) {
  json j = ExperimentConfig{}.to_json();
  detail::overlay(j, patch, "");
  if (j["search_space"] != search_space()) throw ConfigError("search_space is fixed and cannot be overridden");

  ExperimentConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.seeds = j.at("seeds").get<std::size_t>();
  } catch (const json::exception&) {
    throw ConfigError("config keys seed and seeds must be non-negative integers");
  }
  c.out = detail::read<std::string>(j, "paths", "out");
  c.cohort = detail::read<std::string>(j, "paths", "cohort");
  c.expert = detail::read<std::string>(j, "paths", "expert");
  try {
    c.sim = sim::SimConfig::from_json(j.at("sim"));
    json enc = j.at("encoder");
    enc["seed"] = 0;
    c.encoder = encoders::EncoderConfig::from_json(enc);
    c.behavior_policy = detail::classifier_from(j.at("behavior_policy"));
    c.bcq.behavior = detail::classifier_from(j.at("bcq").at("behavior"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.pretrain.steps = detail::read<std::size_t>(j, "pretrain", "steps");
  c.pretrain.learning_rate = detail::read<double>(j, "pretrain", "learning_rate");
  c.pretrain.eval_trajectories = detail::read<std::size_t>(j, "pretrain", "eval_trajectories");
  c.reward.scheme = rewards::parse_scheme(detail::read<std::string>(j, "reward", "scheme"));
  c.reward.terminal_magnitude = detail::read<double>(j, "reward", "terminal_magnitude");
  c.reward.step_magnitude = detail::read<double>(j, "reward", "step_magnitude");

  c.bcq.gamma = detail::read<double>(j, "bcq", "gamma");
  c.bcq.tau = detail::read<double>(j, "bcq", "tau");
  c.bcq.kappa = detail::read<double>(j, "bcq", "kappa");
  c.bcq.hidden = detail::read<std::size_t>(j, "bcq", "hidden");
  c.bcq.batch = detail::read<std::size_t>(j, "bcq", "batch");
  c.bcq.learning_rate = detail::read<double>(j, "bcq", "learning_rate");
  c.bcq.optimizer = nn::parse_optimizer(detail::read<std::string>(j, "bcq", "optimizer"));
  c.bcq.sync_every = detail::read<std::size_t>(j, "bcq", "sync_every");
  c.bcq.iterations = detail::read<std::size_t>(j, "bcq", "iterations");
  c.bcq.eval_stride = detail::read<std::size_t>(j, "bcq", "eval_stride");

  c.ope.epsilon = detail::read<double>(j, "ope", "epsilon");
  c.ope.discounted = detail::read<bool>(j, "ope", "discounted");
  c.ope.mu_floor = detail::read<double>(j, "ope", "mu_floor");
  c.ope.clip_low = detail::read<double>(j, "ope", "clip_low");
  c.ope.clip_high = detail::read<double>(j, "ope", "clip_high");

  c.transfer.modes.clear();
  for (const auto& m : detail::read<std::vector<std::string>>(j, "transfer", "modes")) c.transfer.modes.push_back(transfer::parse_mode(m));
  c.transfer.reinit_layers = detail::read<std::vector<std::string>>(j, "transfer", "reinit_layers");
  c.transfer.qvt_weight = detail::read<double>(j, "transfer", "qvt_weight");
  c.transfer.target_fraction = detail::read<double>(j, "transfer", "target_fraction");
  c.transfer.target_noise = detail::read<double>(j, "transfer", "target_noise");
  c.transfer.iterations = detail::read<std::size_t>(j, "transfer", "iterations");

  c.simulate.k = detail::read<std::size_t>(j, "simulate", "k");
  c.simulate.agreement_threshold = detail::read<double>(j, "simulate", "agreement_threshold");

  c.baselines.lr_inverse_regularization = detail::read<std::vector<double>>(j, "baselines", "lr_inverse_regularization");
  c.baselines.mlp_hidden = detail::read<std::vector<std::size_t>>(j, "baselines", "mlp_hidden");
  c.baselines.mlp_activation = detail::read<std::vector<std::string>>(j, "baselines", "mlp_activation");
  c.baselines.mlp_batch = detail::read<std::size_t>(j, "baselines", "mlp_batch");
  c.baselines.mlp_optimizer = detail::read<std::string>(j, "baselines", "mlp_optimizer");
  c.baselines.mlp_learning_rate = detail::read<double>(j, "baselines", "mlp_learning_rate");
  c.baselines.steps = detail::read<std::size_t>(j, "baselines", "steps");
  c.validate();
  return c;
}

/// Applies "a.b.c=value" to a config document. The value is parsed as JSON when it parses,
/// otherwise taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set: malformed key " + key);
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline json read_config_document(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Config file, then --set overrides, then an optional seed override (BCQFORGE_SEED).
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                                    const char* env_seed = nullptr) {
  json doc = read_config_document(path);
  for (const auto& o : overrides) apply_override(doc, o);
  if (env_seed && *env_seed) {
    try {
      const std::string text(env_seed);
      if (text.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument("not a number");
      const unsigned long long s = std::stoull(text);
      doc["seed"] = s;
    } catch (const std::exception&) {
      throw ConfigError(std::string("BCQFORGE_SEED must be a non-negative integer, got: ") + env_seed);
    }
  }
  return ExperimentConfig::from_json(doc);
}

}  // namespace bcqforge::experiment
