#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/bcq/bcq.hpp"
#include "bcqforge/error.hpp"

namespace bcqforge::transfer {

/// qvt: expert Q-values enter the learner's TD residual.
/// wt:  learner starts from a copy of the expert's Q, Q′ and G.
/// wtr: as wt, then the listed dense layers are re-drawn.
enum class Mode { qvt, wt, wtr };

inline Mode parse_mode(const std::string& s) {
  if (s == "qvt") return Mode::qvt;
  if (s == "wt") return Mode::wt;
  if (s == "wtr") return Mode::wtr;
  throw ConfigError("unknown transfer mode: " + s);
}

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::qvt: return "qvt";
    case Mode::wt: return "wt";
    case Mode::wtr: return "wtr";
  }
  return "?";
}

struct TransferConfig {
  Mode mode = Mode::wt;
  std::string expert_path;
  std::vector<std::string> reinit_layers{"q.fc2", "g.fc1"};  // final dense layers of Q and G
  double qvt_weight = 1.0;

  void validate() const {
    if (mode == Mode::wtr && reinit_layers.empty()) throw ConfigError("transfer: wtr needs at least one layer to re-initialize");
    if (!std::isfinite(qvt_weight)) throw ConfigError("transfer.qvt_weight must be finite");
  }
};

namespace detail {

inline std::vector<nn::DenseLayer*> dense_layers(bcq::PolicyBundle& b) {
  std::vector<nn::DenseLayer*> out;
  for (auto& l : b.q.layers()) out.push_back(&l);
  for (auto& l : b.g.network().layers()) out.push_back(&l);
  return out;
}

}  // namespace detail

/// Throws ConfigError naming the first parameter whose name or shape differs.
inline void check_compatible(const bcq::PolicyBundle& expert, const bcq::PolicyBundle& learner) {
  const auto a = expert.parameters();
  const auto b = learner.parameters();
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i]->name != b[i]->name || !a[i]->value.same_shape(b[i]->value)) {
      throw ConfigError("transfer: topology mismatch at layer " + a[i]->name + " " + nn::shape_string(a[i]->value.shape()) +
                        " vs " + b[i]->name + " " + nn::shape_string(b[i]->value.shape()));
    }
  }
  if (a.size() != b.size()) throw ConfigError("transfer: topology mismatch (layer count differs)");
}

/// Learner initialized from the expert. `learner_cfg` carries the learner's training
/// hyperparameters; its topology must match the expert's.
inline bcq::PolicyBundle weight_transfer(const bcq::PolicyBundle& expert, Mode mode,
                                         const std::vector<std::string>& reinit_layers, std::uint64_t seed,
                                         const bcq::BCQConfig& learner_cfg) {
  if (mode == Mode::qvt) throw UsageError("weight_transfer: qvt does not copy weights");
  bcq::PolicyBundle learner(learner_cfg, expert.state_dim());
  check_compatible(expert, learner);
  const auto src = expert.parameters();
  const auto dst = learner.mutable_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  if (mode == Mode::wtr) {
    if (reinit_layers.empty()) throw ConfigError("transfer: wtr needs at least one layer to re-initialize");
    Rng rng(derive_seed(seed, 0x3e1));
    for (const auto& name : reinit_layers) {
      bool found = false;
      for (auto* layer : detail::dense_layers(learner)) {
        if (layer->name() != name) continue;
        layer->init(rng);
        found = true;
      }
      if (!found) throw ConfigError("transfer: no dense layer named " + name);
    }
    learner.sync_target();
  }
  return learner;
}

inline bcq::PolicyBundle weight_transfer(const bcq::PolicyBundle& expert, Mode mode,
                                         const std::vector<std::string>& reinit_layers, std::uint64_t seed) {
  return weight_transfer(expert, mode, reinit_layers, seed, expert.config);
}

struct TransferMetrics {
  double jumpstart = 0.0;
  double asymptotic = 0.0;
  std::optional<double> jumpstart_pct;   // relative to |scratch|; empty when scratch is 0
  std::optional<double> asymptotic_pct;

  nlohmann::json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"jumpstart", jumpstart},
            {"asymptotic", asymptotic},
            {"jumpstart_pct", opt(jumpstart_pct)},
            {"asymptotic_pct", opt(asymptotic_pct)}};
  }
};

/// Mean WIS over the last 10% of curve points (at least one point).
inline double tail_mean(const bcq::LearningCurve& c) {
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(c.size()))));
  double s = 0.0;
  for (std::size_t i = c.size() - k; i < c.size(); ++i) s += c[i].wis;
  return s / static_cast<double>(k);
}

inline TransferMetrics transfer_metrics(const bcq::LearningCurve& scratch, const bcq::LearningCurve& transfer) {
  if (scratch.empty() || scratch.size() != transfer.size()) throw InputError("transfer metrics: curves differ in length");
  for (std::size_t i = 0; i < scratch.size(); ++i)
    if (scratch[i].iteration != transfer[i].iteration) throw InputError("transfer metrics: evaluation grids differ");
  TransferMetrics m;
  m.jumpstart = transfer[0].wis - scratch[0].wis;
  const double s_tail = tail_mean(scratch);
  m.asymptotic = tail_mean(transfer) - s_tail;
  if (scratch[0].wis != 0.0) m.jumpstart_pct = 100.0 * m.jumpstart / std::abs(scratch[0].wis);
  if (s_tail != 0.0) m.asymptotic_pct = 100.0 * m.asymptotic / std::abs(s_tail);
  return m;
}

/// "jump-start WIS return improves up to 18.94% and asymptotic WIS return improves up to 21.63%",
/// maxima over tasks and modes.
inline std::string improvement_summary(const std::vector<TransferMetrics>& runs) {
  std::optional<double> js, as;
  for (const auto& m : runs) {
    if (m.jumpstart_pct) js = std::max(js.value_or(*m.jumpstart_pct), *m.jumpstart_pct);
    if (m.asymptotic_pct) as = std::max(as.value_or(*m.asymptotic_pct), *m.asymptotic_pct);
  }
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v);
    return std::string(buf);
  };
  return "jump-start WIS return improves up to " + fmt(js) + " and asymptotic WIS return improves up to " + fmt(as);
}

}  // namespace bcqforge::transfer
