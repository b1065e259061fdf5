#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/data/ingest.hpp"
#include "bcqforge/data/preprocess.hpp"
#include "bcqforge/data/replay_buffer.hpp"
#include "bcqforge/experiment/config.hpp"
#include "bcqforge/nn/checkpoint.hpp"
#include "bcqforge/ope/baselines.hpp"
#include "bcqforge/ope/evaluation.hpp"

namespace bcqforge::experiment {

namespace fs = std::filesystem;

// Salts for seed derivation; changing one changes every downstream artifact.
inline constexpr std::uint64_t kSplitSalt = 0x5b17;
inline constexpr std::uint64_t kEncoderSalt = 0xe2c;
inline constexpr std::uint64_t kPretrainSalt = 0x9e7;
inline constexpr std::uint64_t kMuSalt = 0x3a0;
inline constexpr std::uint64_t kBehaviorSalt = 0x6b0;
inline constexpr std::uint64_t kTargetSalt = 0x7a69;
inline constexpr std::uint64_t kNoiseSalt = 0x4015e;
inline constexpr std::uint64_t kReinitSalt = 0x3e1;
inline constexpr std::uint64_t kClusterSalt = 0xc1u;

// ---------------------------------------------------------------- files

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << text;
}

inline void write_report(const fs::path& path, const json& j) { nn::write_json_file(path.string(), j); }

inline std::string curve_csv(const bcq::LearningCurve& c) {
  std::ostringstream os;
  bcq::write_curve_csv(os, c);
  return os.str();
}

inline std::string seed_tag(std::uint64_t s) { return "_seed" + std::to_string(s); }

// ---------------------------------------------------------------- cohorts

inline sim::SimResult simulate_cohort(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t n) {
  sim::SimConfig sc = cfg.sim;
  sc.seed = seed;
  sc.n_patients = n;
  return sim::generate_cohort(sc);
}

inline data::Cohort load_cohort(const ExperimentConfig& cfg) {
  const fs::path path = cfg.cohort_path();
  if (!fs::exists(path)) throw InputError("cohort file not found: " + path.string() + " (run generate first)");
  const fs::path schema = cfg.schema_path();
  if (!fs::exists(schema)) throw InputError("schema file not found: " + schema.string());
  return data::preprocess(data::read_cohort_jsonl(path.string(), data::read_schema(schema.string())),
                          derive_seed(cfg.seed, kSplitSalt));
}

/// Trajectories of one split, in cohort order, as a cohort of their own (all marked `as`).
inline data::Cohort subset(const data::Cohort& c, data::Split which, data::Split as) {
  data::Cohort out;
  out.schema = c.schema;
  out.stats = c.stats;
  for (std::size_t i : c.indices(which)) {
    out.trajectories.push_back(c.trajectories[i]);
    out.splits.push_back(as);
  }
  return out;
}

/// Adds N(0, σ²) to every normalized temporal feature; the acuity series used by rewards keeps
/// its clinical scale.
inline void add_feature_noise(data::Cohort& c, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  Rng rng(seed);
  for (auto& t : c.trajectories)
    for (auto& v : t.features.values()) v += normal(rng, 0.0, sigma);
}

/// Smaller, noisier draw of the same simulator: the transfer target task.
inline data::Cohort target_cohort(const ExperimentConfig& cfg) {
  const auto n = std::max<std::size_t>(
      10, static_cast<std::size_t>(std::llround(cfg.transfer.target_fraction * static_cast<double>(cfg.sim.n_patients))));
  const std::uint64_t s = derive_seed(cfg.seed, kTargetSalt);
  data::Cohort c = data::preprocess(simulate_cohort(cfg, s, n).raw, derive_seed(s, kSplitSalt));
  add_feature_noise(c, cfg.transfer.target_noise, derive_seed(s, kNoiseSalt));
  return c;
}

// ---------------------------------------------------------------- task preparation

/// Everything a BCQ run on one cohort needs: trained encoder, encoded splits, replay buffer,
/// behavior policy μ and the test-split evaluator.
struct PreparedTask {
  data::Cohort cohort;
  encoders::Encoder encoder;
  encoders::PretrainResult pretrain;
  std::vector<data::EncodedTrajectory> train, test;
  data::ReplayBuffer buffer;
  bcq::Classifier mu;
  std::unique_ptr<ope::PolicyEvaluator> evaluator;
  std::uint64_t seed = 0;
};

inline void encode_task(PreparedTask& t, const ExperimentConfig& cfg) {
  const data::EncodeFn enc = [&t](const data::Trajectory& tr) { return t.encoder.encode(tr); };
  const data::RewardFn rew = [&cfg](const data::Trajectory& tr) { return rewards::assign(cfg.reward, tr); };
  t.train = data::encode_split(t.cohort, data::Split::train, enc, rew);
  t.test = data::encode_split(t.cohort, data::Split::test, enc, rew);
  t.buffer = data::ReplayBuffer::from_encoded(t.train, &t.cohort.warnings);
  if (t.buffer.empty()) throw InputError("train split produced no transitions");
  if (t.test.empty()) throw InputError("test split is empty");
}

inline void fit_behavior_policy(PreparedTask& t, const ExperimentConfig& cfg) {
  bcq::ClassifierConfig mc = cfg.behavior_policy;
  mc.seed = derive_seed(t.seed, kMuSalt);
  t.mu = ope::train_behavior_policy(ope::decision_set(t.train, cfg.return_gamma()), mc);
  t.evaluator = std::make_unique<ope::PolicyEvaluator>(ope::decision_set(t.test, cfg.return_gamma()), t.mu,
                                                       cfg.ope.wis_options());
}

/// Fresh encoder pretrained on the cohort's train split.
inline std::unique_ptr<PreparedTask> prepare_task(data::Cohort cohort, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cohort.is_split()) throw InputError("cohort must be split before training");
  encoders::EncoderConfig ec = cfg.encoder;
  ec.seed = derive_seed(seed, kEncoderSalt);
  encoders::Encoder enc(ec, cohort.schema.num_temporal());
  auto t = std::make_unique<PreparedTask>(PreparedTask{std::move(cohort), std::move(enc), {}, {}, {}, {}, {}, nullptr, seed});
  encoders::PretrainConfig pc = cfg.pretrain;
  pc.seed = derive_seed(seed, kPretrainSalt);
  if (pc.steps > 0) t->pretrain = encoders::pretrain_encoder(t->encoder, t->cohort, pc);
  encode_task(*t, cfg);
  fit_behavior_policy(*t, cfg);
  return t;
}

/// Same, with an already-trained encoder (evaluation and simulation reuse the training encoder).
inline std::unique_ptr<PreparedTask> prepare_task(data::Cohort cohort, const ExperimentConfig& cfg, std::uint64_t seed,
                                                  encoders::Encoder encoder, std::optional<bcq::Classifier> mu = std::nullopt) {
  auto t = std::make_unique<PreparedTask>(PreparedTask{std::move(cohort), std::move(encoder), {}, {}, {}, {}, {}, nullptr, seed});
  encode_task(*t, cfg);
  if (mu) {
    t->mu = std::move(*mu);
    t->evaluator = std::make_unique<ope::PolicyEvaluator>(ope::decision_set(t->test, cfg.return_gamma()), t->mu,
                                                          cfg.ope.wis_options());
  } else {
    fit_behavior_policy(*t, cfg);
  }
  return t;
}

// ---------------------------------------------------------------- BCQ runs

struct RunResult {
  bcq::PolicyBundle bundle;
  bcq::LearningCurve curve;
  ope::WISReport final_wis;
  double final_accuracy = 0.0;
  std::uint64_t seed = 0;
};

inline bcq::BCQConfig run_config(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t iterations) {
  bcq::BCQConfig b = cfg.bcq;
  b.seed = seed;
  b.iterations = iterations;
  b.behavior.seed = derive_seed(seed, kBehaviorSalt);
  return b;
}

/// One BCQ training run. `init` (weight transfer) warm-starts Q, Q′ and G; G is then fine-tuned on
/// the task's buffer. `expert_q` switches the loss to Q-value transfer.
inline RunResult run_bcq(const PreparedTask& task, const ExperimentConfig& cfg, std::uint64_t seed, std::size_t iterations,
                         std::optional<bcq::PolicyBundle> init = std::nullopt, const nn::Mlp* expert_q = nullptr) {
  RunResult r;
  r.seed = seed;
  const bcq::BCQConfig bc = run_config(cfg, seed, iterations);
  if (init) {
    r.bundle = std::move(*init);
    r.bundle.config = bc;
  } else {
    r.bundle = bcq::PolicyBundle(bc, task.encoder.hidden());
  }
  bcq::train_behavior_model(r.bundle, task.buffer, init.has_value());
  bcq::TrainOptions opt;
  opt.expert_q = expert_q;
  opt.qvt_weight = cfg.transfer.qvt_weight;
  r.curve = bcq::train(r.bundle, task.buffer, task.evaluator->as_callback(), opt);
  const auto greedy = bcq::extract_policy(r.bundle, task.evaluator->split().states);
  r.final_wis = task.evaluator->wis_of(greedy);
  r.final_accuracy = ope::accuracy_match(greedy, task.evaluator->split().actions);
  return r;
}

inline json curve_points_json(const bcq::LearningCurve& c) { return bcq::curve_json(c); }

/// Per-run evaluation report.
inline json run_report(const RunResult& r, const ExperimentConfig& cfg) {
  return {{"seed", r.seed},
          {"config_hash", cfg.hash()},
          {"model_hash", cfg.model_hash()},
          {"final_wis", r.final_wis.estimate},
          {"final_accuracy", r.final_accuracy},
          {"wis_report", r.final_wis.to_json()},
          {"curve", curve_points_json(r.curve)}};
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(xs.size() - 1));
}

inline json aggregate(const std::vector<double>& xs) {
  return {{"mean", mean_of(xs)}, {"std", std_of(xs)}, {"n", xs.size()}, {"summary", ope::mean_std_string(xs)}, {"values", xs}};
}

// ---------------------------------------------------------------- commands

inline std::vector<std::uint64_t> run_seeds(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < cfg.seeds; ++i) s.push_back(cfg.seed + i);
  return s;
}

/// generate: simulator cohort, schema and oracle sidecar.
inline json cmd_generate(const ExperimentConfig& cfg) {
  const fs::path path = cfg.cohort_path();
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  ensure_dir(cfg.out_dir());
  const sim::SimResult res = simulate_cohort(cfg, cfg.seed, cfg.sim.n_patients);
  data::write_cohort_jsonl(path.string(), res.raw);
  data::write_schema(cfg.schema_path().string(), res.raw.schema);
  sim::write_oracle_labels(cfg.oracle_path().string(), res.oracle);
  json rep{{"command", "generate"},
           {"config_hash", cfg.hash()},
           {"patients", res.raw.patients.size()},
           {"transfusion_prevalence", sim::transfusion_prevalence(res.raw)},
           {"survival_rate", sim::survival_rate(res.raw)},
           {"hb_mean", res.hb_mean},
           {"cohort", path.string()},
           {"schema", cfg.schema_path().string()},
           {"oracle", cfg.oracle_path().string()}};
  write_report(cfg.out_dir() / "generate_report.json", rep);
  return rep;
}

/// preprocess: bins, splits and normalizes; reports what it did.
inline json cmd_preprocess(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir());
  const data::Cohort c = load_cohort(cfg);
  std::size_t bins = 0;
  for (const auto& t : c.trajectories) bins += t.length();
  json splits = json::object();
  for (auto s : {data::Split::train, data::Split::validation, data::Split::test}) splits[data::split_name(s)] = c.indices(s).size();
  json rep{{"command", "preprocess"},
           {"config_hash", cfg.hash()},
           {"patients", c.size()},
           {"bins", bins},
           {"splits", splits},
           {"temporal_mean", c.stats ? json(c.stats->temporal_mean) : json(nullptr)},
           {"temporal_std", c.stats ? json(c.stats->temporal_std) : json(nullptr)},
           {"warnings", c.warnings}};
  write_report(cfg.out_dir() / "preprocess_report.json", rep);
  return rep;
}

inline void save_run(const ExperimentConfig& cfg, const PreparedTask& task, const RunResult& r, const std::string& prefix) {
  const std::string tag = seed_tag(r.seed);
  nn::write_json_file((cfg.out_dir() / ("encoder" + tag + ".json")).string(), task.encoder.checkpoint(cfg.model_hash()));
  nn::write_json_file((cfg.out_dir() / ("mu" + tag + ".json")).string(),
                      nn::make_checkpoint("behavior_policy", cfg.model_hash(), task.mu.parameters(),
                                          {{"hidden", cfg.behavior_policy.hidden},
                                           {"activation", nn::activation_name(cfg.behavior_policy.activation)},
                                           {"state_dim", task.encoder.hidden()}}));
  nn::write_json_file((cfg.out_dir() / (prefix + tag + ".json")).string(), r.bundle.checkpoint(cfg.model_hash()));
  write_text(cfg.out_dir() / ("curve" + tag + ".csv"), curve_csv(r.curve));
  write_report(cfg.out_dir() / ("report" + tag + ".json"), run_report(r, cfg));
}

/// Calls `f`, dumping the last finite checkpoint before re-raising a training abort.
template <class F>
auto guarded(const fs::path& dump, F&& f) {
  try {
    return f();
  } catch (const bcq::TrainingAborted& e) {
    nn::write_json_file(dump.string(), e.checkpoint);
    throw;
  }
}

/// train: preprocess → pretrain encoder → μ → G → BCQ, once per seed.
inline json cmd_train(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir());
  const data::Cohort cohort = load_cohort(cfg);
  std::vector<double> wis, acc;
  json runs = json::array();
  for (std::uint64_t s : run_seeds(cfg)) {
    const auto task = prepare_task(cohort, cfg, s);
    const RunResult r = guarded(cfg.out_dir() / ("policy" + seed_tag(s) + ".aborted.json"),
                                [&] { return run_bcq(*task, cfg, s, cfg.bcq.iterations); });
    save_run(cfg, *task, r, "policy");
    wis.push_back(r.final_wis.estimate);
    acc.push_back(r.final_accuracy);
    runs.push_back({{"seed", s},
                    {"final_wis", r.final_wis.estimate},
                    {"final_accuracy", r.final_accuracy},
                    {"curve_points", r.curve.size()},
                    {"pretrain_initial_loss", task->pretrain.initial_loss},
                    {"pretrain_final_loss", task->pretrain.final_loss}});
  }
  json rep{{"command", "train"},
           {"config_hash", cfg.hash()},
           {"model_hash", cfg.model_hash()},
           {"runs", runs},
           {"wis", aggregate(wis)},
           {"accuracy", aggregate(acc)}};
  write_report(cfg.out_dir() / "train_report.json", rep);
  return rep;
}

inline json load_checked(const fs::path& path, const std::string& kind, const std::string& model_hash) {
  if (!fs::exists(path)) throw InputError("missing artifact " + path.string() + " (run train first)");
  json j = nn::read_checkpoint(path.string(), kind);
  if (j.value("config_hash", std::string{}) != model_hash)
    throw ConfigError(path.string() + " was produced under a different configuration (hash " +
                      j.value("config_hash", std::string{}) + ", expected " + model_hash + ")");
  return j;
}

struct TrainedArtifacts {
  encoders::Encoder encoder;
  bcq::Classifier mu;
  bcq::PolicyBundle bundle;
};

inline TrainedArtifacts load_trained(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::string tag = seed_tag(seed);
  const std::string h = cfg.model_hash();
  const json ej = load_checked(cfg.out_dir() / ("encoder" + tag + ".json"), "encoder", h);
  const json mj = load_checked(cfg.out_dir() / ("mu" + tag + ".json"), "behavior_policy", h);
  const json pj = load_checked(cfg.out_dir() / ("policy" + tag + ".json"), "policy_bundle", h);
  const auto& mm = mj.at("metadata");
  bcq::Classifier mu("mu", mm.at("state_dim").get<std::size_t>(), bcq::kActions, mm.at("hidden").get<std::size_t>(),
                     nn::parse_activation(mm.at("activation").get<std::string>()));
  nn::parameters_from_json(mj.at("parameters"), mu.parameters());
  return {encoders::Encoder::from_checkpoint(ej), std::move(mu), bcq::PolicyBundle::from_checkpoint(pj, run_config(cfg, seed, 0))};
}

/// evaluate: reloads each seed's artifacts and scores the policy on the test split.
inline json cmd_evaluate(const ExperimentConfig& cfg) {
  const data::Cohort cohort = load_cohort(cfg);
  std::vector<double> wis, acc;
  json runs = json::array();
  for (std::uint64_t s : run_seeds(cfg)) {
    TrainedArtifacts a = load_trained(cfg, s);
    const auto task = prepare_task(cohort, cfg, s, std::move(a.encoder), std::move(a.mu));
    const auto greedy = bcq::extract_policy(a.bundle, task->evaluator->split().states);
    const ope::WISReport w = task->evaluator->wis_of(greedy);
    const double ac = ope::accuracy_match(greedy, task->evaluator->split().actions);
    // The logged policy itself, scored by the same estimator.
    const ope::WISReport logged = task->evaluator->wis_of(task->evaluator->split().actions);
    wis.push_back(w.estimate);
    acc.push_back(ac);
    runs.push_back({{"seed", s}, {"wis_report", w.to_json()}, {"accuracy", ac}, {"logged_policy_wis", logged.estimate}});
  }
  json rep{{"command", "evaluate"},
           {"config_hash", cfg.hash()},
           {"model_hash", cfg.model_hash()},
           {"epsilon", cfg.ope.epsilon},
           {"discounted", cfg.ope.discounted},
           {"runs", runs},
           {"wis", aggregate(wis)},
           {"accuracy", aggregate(acc)}};
  write_report(cfg.out_dir() / "evaluate_report.json", rep);
  return rep;
}

struct TransferOutcome {
  RunResult scratch;
  std::vector<std::pair<transfer::Mode, RunResult>> runs;
  std::vector<std::pair<transfer::Mode, transfer::TransferMetrics>> metrics;
};

/// Scratch vs every configured mode on one prepared target task.
inline TransferOutcome run_transfer(const PreparedTask& target, const bcq::PolicyBundle& expert, const ExperimentConfig& cfg,
                                    std::uint64_t seed) {
  const std::size_t iters = cfg.transfer.iterations > 0 ? cfg.transfer.iterations : cfg.bcq.iterations;
  TransferOutcome out;
  out.scratch = run_bcq(target, cfg, seed, iters);
  for (auto mode : cfg.transfer.modes) {
    RunResult r;
    if (mode == transfer::Mode::qvt) {
      r = run_bcq(target, cfg, seed, iters, std::nullopt, &expert.q);
    } else {
      bcq::PolicyBundle init = transfer::weight_transfer(expert, mode, cfg.transfer.reinit_layers,
                                                         derive_seed(seed, kReinitSalt), run_config(cfg, seed, iters));
      r = run_bcq(target, cfg, seed, iters, std::move(init));
    }
    out.metrics.emplace_back(mode, transfer::transfer_metrics(out.scratch.curve, r.curve));
    out.runs.emplace_back(mode, std::move(r));
  }
  return out;
}

/// transfer: expert checkpoint → target task (smaller, noisier simulator draw), scratch vs modes.
inline json cmd_transfer(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir());
  const fs::path ep = cfg.expert_path();
  if (!fs::exists(ep)) throw InputError("expert checkpoint not found: " + ep.string());
  const bcq::PolicyBundle expert = bcq::PolicyBundle::from_checkpoint(nn::read_checkpoint(ep.string(), "policy_bundle"), cfg.bcq);
  const std::string expert_before = expert.checkpoint().dump();
  if (expert.state_dim() != cfg.encoder.hidden)
    throw ConfigError("transfer: expert state width " + std::to_string(expert.state_dim()) + " != encoder.hidden " +
                      std::to_string(cfg.encoder.hidden));

  const data::Cohort target = target_cohort(cfg);
  std::vector<transfer::TransferMetrics> all;
  json runs = json::array();
  for (std::uint64_t s : run_seeds(cfg)) {
    const auto task = prepare_task(target, cfg, s);
    const TransferOutcome o = guarded(cfg.out_dir() / ("transfer" + seed_tag(s) + ".aborted.json"),
                                      [&] { return run_transfer(*task, expert, cfg, s); });
    write_text(cfg.out_dir() / ("transfer_curve_scratch" + seed_tag(s) + ".csv"), curve_csv(o.scratch.curve));
    json modes = json::object();
    for (std::size_t i = 0; i < o.runs.size(); ++i) {
      const auto& [mode, r] = o.runs[i];
      const std::string name = transfer::mode_name(mode);
      write_text(cfg.out_dir() / ("transfer_curve_" + name + seed_tag(s) + ".csv"), curve_csv(r.curve));
      nn::write_json_file((cfg.out_dir() / ("transfer_policy_" + name + seed_tag(s) + ".json")).string(),
                          r.bundle.checkpoint(cfg.hash(), {{"transfer_mode", name}}));
      json m = o.metrics[i].second.to_json();
      m["final_wis"] = r.final_wis.estimate;
      m["jumpstart_wis"] = r.curve.front().wis;
      modes[name] = m;
      all.push_back(o.metrics[i].second);
    }
    runs.push_back({{"seed", s},
                    {"target_patients", target.size()},
                    {"scratch", {{"jumpstart_wis", o.scratch.curve.front().wis}, {"final_wis", o.scratch.final_wis.estimate}}},
                    {"modes", modes}});
  }
  if (expert.checkpoint().dump() != expert_before) throw NumericalError("transfer: expert parameters changed");
  json rep{{"command", "transfer"},
           {"config_hash", cfg.hash()},
           {"expert", ep.string()},
           {"runs", runs},
           {"summary", transfer::improvement_summary(all)}};
  write_report(cfg.out_dir() / "transfer_report.json", rep);
  return rep;
}

/// Greedy action sequence (T − 1 entries) for every trajectory of `c`.
inline std::vector<std::vector<int>> policy_actions(const data::Cohort& c, const encoders::Encoder& enc,
                                                    const bcq::PolicyBundle& b) {
  std::vector<std::vector<int>> out;
  for (const auto& t : c.trajectories) {
    if (t.length() < 2) {
      out.emplace_back();
      continue;
    }
    const nn::Tensor s = enc.encode(t);
    nn::Tensor decisions = nn::Tensor::matrix(t.length() - 1, s.cols());
    std::copy_n(s.values().begin(), decisions.size(), decisions.values().begin());
    out.push_back(bcq::extract_policy(b, decisions));
  }
  return out;
}

/// simulate: policy simulation on the test split, with train-split patients as controls.
inline json cmd_simulate(const ExperimentConfig& cfg) {
  const data::Cohort cohort = load_cohort(cfg);
  TrainedArtifacts a = load_trained(cfg, cfg.seed);
  const data::Cohort target = subset(cohort, data::Split::test, data::Split::test);
  const data::Cohort source = subset(cohort, data::Split::train, data::Split::train);
  const auto policy = policy_actions(target, a.encoder, a.bundle);
  std::vector<std::vector<int>> logged;
  for (const auto& t : target.trajectories) logged.push_back(t.actions);

  json variants = json::object();
  for (auto v : {sim::OutcomeVariant::mortality, sim::OutcomeVariant::acuity}) {
    sim::PolicySimOptions opt{v, cfg.simulate.k, cfg.simulate.agreement_threshold, derive_seed(cfg.seed, kClusterSalt)};
    const sim::PolicySimReport r = sim::policy_simulation(target, source, policy, opt);
    json j = r.to_json();
    j["logged_replay"] = sim::policy_simulation(target, source, logged, opt).to_json();
    variants[sim::variant_name(v)] = j;
  }
  json rep{{"command", "simulate"}, {"config_hash", cfg.hash()}, {"model_hash", cfg.model_hash()}, {"variants", variants}};
  write_report(cfg.out_dir() / "simulate_report.json", rep);
  return rep;
}

/// Per-step rows [normalized features ++ statics] with the logged action as label.
inline void step_table(const data::Cohort& c, data::Split s, nn::Tensor& x, std::vector<int>& y) {
  std::size_t rows = 0;
  for (std::size_t i : c.indices(s)) rows += c.trajectories[i].num_transitions();
  const std::size_t f = c.schema.num_temporal(), st = c.schema.num_static();
  x = nn::Tensor::matrix(rows, f + st);
  y.clear();
  std::size_t r = 0;
  for (std::size_t i : c.indices(s)) {
    const auto& t = c.trajectories[i];
    for (std::size_t k = 0; k < t.num_transitions(); ++k, ++r) {
      auto row = x.row_span(r);
      std::copy_n(t.features.row_span(k).begin(), f, row.begin());
      std::copy_n(t.statics.begin(), st, row.begin() + static_cast<std::ptrdiff_t>(f));
      y.push_back(t.actions[k]);
    }
  }
}

/// baselines: LR and MLP action classifiers; the grid point with the best validation accuracy is
/// reported on the test split.
inline json cmd_baselines(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir());
  const data::Cohort cohort = load_cohort(cfg);
  nn::Tensor xtr, xva, xte;
  std::vector<int> ytr, yva, yte;
  step_table(cohort, data::Split::train, xtr, ytr);
  step_table(cohort, data::Split::validation, xva, yva);
  step_table(cohort, data::Split::test, xte, yte);
  if (ytr.empty() || yva.empty() || yte.empty()) throw InputError("baselines: a split has no decision steps");

  auto search = [&](ope::BaselineKind kind, const std::vector<bcq::ClassifierConfig>& grid) {
    json tried = json::array();
    std::optional<ope::BaselineResult> best;
    double best_val = -1.0;
    for (const auto& c : grid) {
      const ope::BaselineResult v = ope::train_classifier_baseline(kind, xtr, ytr, xva, yva, c);
      json row = v.to_json();
      row["validation_accuracy"] = v.test_accuracy;
      row.erase("test_accuracy");
      tried.push_back(row);
      if (v.test_accuracy > best_val) {
        best_val = v.test_accuracy;
        best = ope::train_classifier_baseline(kind, xtr, ytr, xte, yte, c);
      }
    }
    json j = best->to_json();
    j["validation_accuracy"] = best_val;
    j["grid"] = tried;
    return j;
  };

  std::vector<bcq::ClassifierConfig> lr_grid, mlp_grid;
  for (double c : cfg.baselines.lr_inverse_regularization) {
    bcq::ClassifierConfig k;
    k.hidden = 0;
    k.inverse_l2 = c;
    k.steps = cfg.baselines.steps;
    k.seed = derive_seed(cfg.seed, 0x1f);
    lr_grid.push_back(k);
  }
  for (std::size_t h : cfg.baselines.mlp_hidden)
    for (const auto& a : cfg.baselines.mlp_activation) {
      bcq::ClassifierConfig k;
      k.hidden = h;
      k.activation = ope::grid_activation(a);
      k.batch = cfg.baselines.mlp_batch;
      k.optimizer = nn::parse_optimizer(cfg.baselines.mlp_optimizer);
      k.learning_rate = cfg.baselines.mlp_learning_rate;
      k.steps = cfg.baselines.steps;
      k.seed = derive_seed(cfg.seed, 0x2f);
      mlp_grid.push_back(k);
    }
  json rep{{"command", "baselines"},
           {"config_hash", cfg.hash()},
           {"LR", search(ope::BaselineKind::lr, lr_grid)},
           {"MLP", search(ope::BaselineKind::mlp, mlp_grid)},
           {"search_space", search_space()}};
  write_report(cfg.out_dir() / "baselines_report.json", rep);
  return rep;
}

}  // namespace bcqforge::experiment
