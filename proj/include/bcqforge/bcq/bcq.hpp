#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/bcq/classifier.hpp"
#include "bcqforge/data/replay_buffer.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/nn/checkpoint.hpp"
#include "bcqforge/nn/layers.hpp"
#include "bcqforge/nn/ops.hpp"
#include "bcqforge/nn/optimizer.hpp"

namespace bcqforge::bcq {

inline constexpr std::size_t kActions = 2;

struct BCQConfig {
  double gamma = 0.99;
  double tau = 0.3;
  double kappa = 1.0;
  std::size_t hidden = 64;
  std::size_t batch = 64;
  double learning_rate = 1e-4;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  std::size_t sync_every = 4000;
  std::size_t iterations = 500000;
  std::size_t eval_stride = 1000;
  std::uint64_t seed = 0;
  ClassifierConfig behavior;  // G_ω

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("bcq.gamma must lie in [0, 1]");
    if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("bcq.tau must lie in [0, 1)");
    if (!(kappa > 0.0)) throw ConfigError("bcq.kappa must be > 0");
    if (hidden == 0 || batch == 0) throw ConfigError("bcq.hidden and bcq.batch must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("bcq.learning_rate must be > 0");
    if (sync_every == 0) throw ConfigError("bcq.sync_every must be positive");
    if (eval_stride == 0) throw ConfigError("bcq.eval_stride must be positive");
    behavior.validate();
  }
};

/// 3 dense layers: H → hidden (relu) → hidden (relu) → |A|.
inline nn::Mlp make_q_network(const std::string& prefix, std::size_t state_dim, std::size_t hidden) {
  return nn::Mlp(prefix, {state_dim, hidden, hidden, kActions}, nn::Activation::relu, nn::Activation::identity);
}

/// Q_θ, its target copy Q_θ′ and the behavior-cloned action filter G_ω.
struct PolicyBundle {
  BCQConfig config;
  nn::Mlp q;
  nn::Mlp q_target;
  Classifier g;

  PolicyBundle() = default;

  PolicyBundle(const BCQConfig& cfg, std::size_t state_dim) : config(cfg) {
    cfg.validate();
    q = make_q_network("q", state_dim, cfg.hidden);
    g = Classifier("g", state_dim, kActions, cfg.behavior.hidden, cfg.behavior.activation);
    Rng rng(derive_seed(cfg.seed, 0x9));
    q.init(rng);
    g.init(rng);
    sync_target();
  }

  std::size_t state_dim() const { return q.in_dim(); }

  /// Hard copy θ → θ′ (values only; names stay "q_target.*").
  void sync_target() {
    if (q_target.layers().empty()) {
      std::vector<std::size_t> widths{q.in_dim()};
      for (const auto& l : q.layers()) widths.push_back(l.out_dim());
      q_target = nn::Mlp("q_target", widths, nn::Activation::relu, nn::Activation::identity);
    }
    auto src = q.parameters();
    auto dst = q_target.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  }

  std::vector<const nn::Parameter*> parameters() const {
    std::vector<const nn::Parameter*> out;
    for (const auto* p : q.parameters()) out.push_back(p);
    for (const auto* p : q_target.parameters()) out.push_back(p);
    for (const auto* p : g.parameters()) out.push_back(p);
    return out;
  }

  std::vector<nn::Parameter*> mutable_parameters() {
    std::vector<nn::Parameter*> out;
    nn::append_parameters(out, q.parameters());
    nn::append_parameters(out, q_target.parameters());
    nn::append_parameters(out, g.parameters());
    return out;
  }

  nlohmann::json checkpoint(const std::string& config_hash = "", nlohmann::json metadata = nlohmann::json::object()) const {
    metadata["state_dim"] = state_dim();
    metadata["hidden"] = config.hidden;
    metadata["behavior_hidden"] = config.behavior.hidden;
    metadata["behavior_activation"] = nn::activation_name(config.behavior.activation);
    metadata["tau"] = config.tau;
    return nn::make_checkpoint("policy_bundle", config_hash, parameters(), std::move(metadata));
  }

  /// Topology comes from the checkpoint; `cfg` supplies the training hyperparameters.
  static PolicyBundle from_checkpoint(const nlohmann::json& j, BCQConfig cfg) {
    const auto& meta = j.at("metadata");
    cfg.hidden = meta.at("hidden").get<std::size_t>();
    cfg.behavior.hidden = meta.at("behavior_hidden").get<std::size_t>();
    cfg.behavior.activation = nn::parse_activation(meta.at("behavior_activation").get<std::string>());
    PolicyBundle b(cfg, meta.at("state_dim").get<std::size_t>());
    nn::parameters_from_json(j.at("parameters"), b.mutable_parameters());
    return b;
  }
};

/// Bitmask over the two actions: bit a set iff G(a|s) / max_â G(â|s) > τ.
using ActionMask = std::uint8_t;

inline ActionMask eligible_actions(std::span<const double> g_probs, double tau) {
  double best = 0.0;
  for (double p : g_probs) best = std::max(best, p);
  ActionMask m = 0;
  for (std::size_t a = 0; a < g_probs.size(); ++a)
    if (g_probs[a] / best > tau) m |= static_cast<ActionMask>(1u << a);
  return m;
}

inline std::vector<ActionMask> eligibility(const Classifier& g, const Tensor& states, double tau) {
  const Tensor p = g.probabilities(states);
  std::vector<ActionMask> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) out[r] = eligible_actions(p.row_span(r), tau);
  return out;
}

/// argmax over eligible actions, ties to the lower index.
inline int constrained_argmax(std::span<const double> q, ActionMask mask) {
  if (mask == 0) throw UsageError("constrained argmax: empty eligible set");
  int best = -1;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (!(mask & (1u << a))) continue;
    if (best < 0 || q[a] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  }
  return best;
}

inline double constrained_max(std::span<const double> q, ActionMask mask) {
  return q[static_cast<std::size_t>(constrained_argmax(q, mask))];
}

/// π(s) = argmax_{a ∈ eligible(s)} Q_θ(s, a).
inline std::vector<int> extract_policy(const PolicyBundle& b, const Tensor& states) {
  const Tensor q = b.q.evaluate(states);
  const auto masks = eligibility(b.g, states, b.config.tau);
  std::vector<int> out(states.rows());
  for (std::size_t r = 0; r < states.rows(); ++r) out[r] = constrained_argmax(q.row_span(r), masks[r]);
  return out;
}

/// Bootstrapped targets y = r + γ·[1 − done]·max_{a′ ∈ mask} Q_θ′(s′, a′), gradient-free.
inline std::vector<double> td_targets(const PolicyBundle& b, const data::Minibatch& mb, std::span<const ActionMask> next_masks) {
  if (next_masks.size() != mb.size()) throw UsageError("td_targets: one mask per transition required");
  const Tensor qn = b.q_target.evaluate(mb.next_states);
  std::vector<double> y(mb.size());
  for (std::size_t i = 0; i < mb.size(); ++i) {
    y[i] = mb.rewards[i];
    if (!mb.dones[i]) y[i] += b.config.gamma * constrained_max(qn.row_span(i), next_masks[i]);
  }
  return y;
}

namespace detail {

// mean_i L_κ(y_i − Q_θ(s_i, a_i) + w·Q″_i)
inline Var huber_td(Tape& tape, const PolicyBundle& b, const data::Minibatch& mb, const std::vector<double>& y,
                    const std::vector<double>* expert_q, double weight) {
  const Var q = b.q.forward(tape, tape.constant(mb.states));
  const Var q_sa = nn::gather_cols(q, mb.actions);
  Tensor offset = Tensor::matrix(mb.size(), 1);
  for (std::size_t i = 0; i < mb.size(); ++i) offset[i] = y[i] + (expert_q ? weight * (*expert_q)[i] : 0.0);
  return nn::mean_all(nn::huber(tape.constant(std::move(offset)) - q_sa, b.config.kappa));
}

}  // namespace detail

/// Batch-constrained TD loss; `next_masks` are G's eligible sets for the batch's next states.
inline Var bcq_loss(Tape& tape, const PolicyBundle& b, const data::Minibatch& mb, std::span<const ActionMask> next_masks) {
  return detail::huber_td(tape, b, mb, td_targets(b, mb, next_masks), nullptr, 0.0);
}

/// Same, computing the eligible sets from G on the fly.
inline Var bcq_loss(Tape& tape, const PolicyBundle& b, const data::Minibatch& mb) {
  const auto masks = eligibility(b.g, mb.next_states, b.config.tau);
  return bcq_loss(tape, b, mb, masks);
}

/// Unconstrained Q-learning loss: max over every action in the bootstrap.
inline Var q_learning_loss(Tape& tape, const PolicyBundle& b, const data::Minibatch& mb) {
  const Tensor qn = b.q_target.evaluate(mb.next_states);
  std::vector<double> y(mb.size());
  for (std::size_t i = 0; i < mb.size(); ++i) {
    double m = qn.at(i, 0);
    for (std::size_t a = 1; a < qn.cols(); ++a) m = std::max(m, qn.at(i, a));
    y[i] = mb.rewards[i] + (mb.dones[i] ? 0.0 : b.config.gamma * m);
  }
  return detail::huber_td(tape, b, mb, y, nullptr, 0.0);
}

/// Q-value transfer: the residual carries + weight·Q_expert(s, a); the expert gets no gradient.
inline Var qvt_loss(Tape& tape, const PolicyBundle& b, const nn::Mlp& expert_q, const data::Minibatch& mb,
                    std::span<const ActionMask> next_masks, double weight = 1.0) {
  if (expert_q.in_dim() != b.state_dim() || expert_q.out_dim() != kActions)
    throw ConfigError("qvt: expert Q-network shape does not match the learner");
  const Tensor qe = expert_q.evaluate(mb.states);
  std::vector<double> q2(mb.size());
  for (std::size_t i = 0; i < mb.size(); ++i) q2[i] = qe.at(i, mb.actions[i]);
  return detail::huber_td(tape, b, mb, td_targets(b, mb, next_masks), &q2, weight);
}

inline Var qvt_loss(Tape& tape, const PolicyBundle& b, const nn::Mlp& expert_q, const data::Minibatch& mb,
                    double weight = 1.0) {
  const auto masks = eligibility(b.g, mb.next_states, b.config.tau);
  return qvt_loss(tape, b, expert_q, mb, masks, weight);
}

/// Fits G_ω on the buffer's (state, logged action) pairs.
inline double train_behavior_model(PolicyBundle& b, const data::ReplayBuffer& buffer, bool warm_start = false) {
  if (buffer.empty()) throw InputError("behavior model: replay buffer is empty");
  Tensor states({buffer.size(), buffer.state_dim()}, std::vector<double>(buffer.states().begin(), buffer.states().end()));
  return train_classifier(b.g, states, buffer.actions(), b.config.behavior, "behavior model G", warm_start);
}

struct CurvePoint {
  std::size_t iteration = 0;
  double wis = 0.0;
  double accuracy = 0.0;
  double loss = 0.0;
};

using LearningCurve = std::vector<CurvePoint>;

inline void write_curve_csv(std::ostream& out, const LearningCurve& curve) {
  out << "iteration,wis,accuracy,loss\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", p.iteration, p.wis, p.accuracy, p.loss);
    out << buf;
  }
}

inline nlohmann::json curve_json(const LearningCurve& curve) {
  auto arr = nlohmann::json::array();
  for (const auto& p : curve) arr.push_back({{"iteration", p.iteration}, {"wis", p.wis}, {"accuracy", p.accuracy}, {"loss", p.loss}});
  return arr;
}

/// Thrown when training produces a non-finite loss or parameter. Carries the last finite
/// checkpoint so callers can dump it.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& msg, nlohmann::json last_good, std::size_t iteration)
      : NumericalError(msg), checkpoint(std::move(last_good)), iteration(iteration) {}
  nlohmann::json checkpoint;
  std::size_t iteration;
};

struct EvalResult {
  double wis = 0.0;
  double accuracy = 0.0;
};

using Evaluator = std::function<EvalResult(const PolicyBundle&)>;

struct TrainOptions {
  const nn::Mlp* expert_q = nullptr;  // set for Q-value transfer
  double qvt_weight = 1.0;
  std::size_t probe_batch = 256;      // fixed batch behind the curve's loss column
  std::function<void(std::size_t, const PolicyBundle&)> on_iteration;  // test hook, after the sync check
};

/// Offline BCQ training on a frozen buffer. G_ω must already be trained. Records a curve point at
/// iteration 0 and every eval_stride iterations.
inline LearningCurve train(PolicyBundle& b, const data::ReplayBuffer& buffer, const Evaluator& evaluate,
                           const TrainOptions& opt = {}) {
  b.config.validate();
  if (buffer.empty()) throw InputError("bcq: replay buffer is empty");
  if (buffer.state_dim() != b.state_dim()) throw ConfigError("bcq: buffer state width != network input width");

  // G is frozen during Q-learning, so every next state's eligible set can be computed once.
  const Tensor next_states({buffer.size(), buffer.state_dim()},
                           std::vector<double>(buffer.next_states().begin(), buffer.next_states().end()));
  const std::vector<ActionMask> masks = eligibility(b.g, next_states, b.config.tau);
  auto masks_for = [&](const data::Minibatch& mb) {
    std::vector<ActionMask> m(mb.size());
    for (std::size_t i = 0; i < mb.size(); ++i) m[i] = masks[mb.indices[i]];
    return m;
  };

  data::BufferSampler sampler(buffer, derive_seed(b.config.seed, 0xb0c));
  data::BufferSampler probe_sampler(buffer, derive_seed(b.config.seed, 0x9b0));
  const data::Minibatch probe = probe_sampler.sample(std::min(opt.probe_batch, buffer.size()));
  const auto probe_masks = masks_for(probe);

  auto loss_on = [&](Tape& tape, const data::Minibatch& mb, const std::vector<ActionMask>& m) {
    if (opt.expert_q) return qvt_loss(tape, b, *opt.expert_q, mb, m, opt.qvt_weight);
    return bcq_loss(tape, b, mb, m);
  };
  auto record = [&](std::size_t it, LearningCurve& curve) {
    Tape tape(false);
    const double probe_loss = loss_on(tape, probe, probe_masks).value()[0];
    const EvalResult e = evaluate ? evaluate(b) : EvalResult{};
    curve.push_back({it, e.wis, e.accuracy, probe_loss});
  };

  nn::OptimizerConfig oc;
  oc.kind = b.config.optimizer;
  oc.learning_rate = b.config.learning_rate;
  nn::Optimizer optimizer(b.q.parameters(), oc);

  LearningCurve curve;
  record(0, curve);
  nlohmann::json last_good = b.checkpoint();
  for (std::size_t it = 1; it <= b.config.iterations; ++it) {
    const data::Minibatch mb = sampler.sample(b.config.batch);
    optimizer.zero_grad();
    Tape tape;
    const Var loss = loss_on(tape, mb, masks_for(mb));
    const double v = loss.value()[0];
    if (!std::isfinite(v)) throw TrainingAborted("bcq: non-finite loss at iteration " + std::to_string(it), last_good, it);
    tape.backward(loss);
    optimizer.step();
    if (!nn::all_finite(std::as_const(b.q).parameters()))
      throw TrainingAborted("bcq: non-finite Q parameters at iteration " + std::to_string(it), last_good, it);
    if (it % b.config.sync_every == 0) b.sync_target();
    if (opt.on_iteration) opt.on_iteration(it, b);
    if (it % b.config.eval_stride == 0) {
      record(it, curve);
      last_good = b.checkpoint();
    }
  }
  return curve;
}

}  // namespace bcqforge::bcq
