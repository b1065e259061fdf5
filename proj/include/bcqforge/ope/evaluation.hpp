#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "bcqforge/bcq/bcq.hpp"
#include "bcqforge/bcq/classifier.hpp"
#include "bcqforge/data/replay_buffer.hpp"
#include "bcqforge/ope/wis.hpp"

namespace bcqforge::ope {

using nn::Tensor;

/// Decision steps of a set of encoded trajectories, stacked: row k of `states` is Ŝ_t for some
/// trajectory and t < T − 1, with the action logged there.
struct DecisionSet {
  Tensor states;
  std::vector<int> actions;
  std::vector<std::size_t> offsets;  // trajectory n owns rows [offsets[n], offsets[n + 1])
  std::vector<double> returns;

  std::size_t trajectories() const { return returns.size(); }
};

inline DecisionSet decision_set(const std::vector<data::EncodedTrajectory>& encoded, double gamma) {
  DecisionSet d;
  std::size_t rows = 0, width = 0;
  for (const auto& e : encoded) {
    if (e.length() < 2) continue;
    rows += e.length() - 1;
    width = e.states.cols();
  }
  d.states = Tensor::matrix(rows, width);
  std::size_t r = 0;
  for (const auto& e : encoded) {
    if (e.length() < 2) continue;
    d.offsets.push_back(r);
    for (std::size_t t = 0; t + 1 < e.length(); ++t, ++r) {
      std::copy_n(e.states.row_span(t).begin(), width, d.states.row_span(r).begin());
      d.actions.push_back(e.actions.at(t));
    }
    d.returns.push_back(trajectory_return(e.rewards, gamma));
  }
  d.offsets.push_back(r);
  return d;
}

/// μ: behavior cloning of the logged actions on encoded train states.
inline bcq::Classifier train_behavior_policy(const DecisionSet& train, const bcq::ClassifierConfig& cfg) {
  if (train.actions.empty()) throw InputError("behavior policy: empty train split");
  bcq::Classifier mu("mu", train.states.cols(), bcq::kActions, cfg.hidden, cfg.activation);
  bcq::train_classifier(mu, train.states, train.actions, cfg, "behavior policy mu");
  return mu;
}

/// WIS + accuracy of any deterministic policy over a fixed evaluation split. μ's probabilities
/// of the logged actions are computed once at construction.
class PolicyEvaluator {
 public:
  PolicyEvaluator(DecisionSet split, const bcq::Classifier& mu, WISOptions opt = {})
      : split_(std::move(split)), opt_(opt) {
    opt_.validate();
    if (split_.trajectories() == 0) throw InputError("evaluation split is empty");
    const Tensor p = mu.probabilities(split_.states);
    mu_logged_.resize(split_.actions.size());
    for (std::size_t r = 0; r < mu_logged_.size(); ++r) mu_logged_[r] = p.at(r, static_cast<std::size_t>(split_.actions[r]));
  }

  const DecisionSet& split() const { return split_; }

  WISReport wis_of(const std::vector<int>& greedy) const {
    if (greedy.size() != split_.actions.size()) throw InputError("evaluator: one action per decision step required");
    std::vector<WISTrajectory> ts(split_.trajectories());
    for (std::size_t n = 0; n < ts.size(); ++n) {
      const auto b = static_cast<std::ptrdiff_t>(split_.offsets[n]), e = static_cast<std::ptrdiff_t>(split_.offsets[n + 1]);
      ts[n].logged.assign(split_.actions.begin() + b, split_.actions.begin() + e);
      ts[n].greedy.assign(greedy.begin() + b, greedy.begin() + e);
      ts[n].mu_logged.assign(mu_logged_.begin() + b, mu_logged_.begin() + e);
      ts[n].ret = split_.returns[n];
    }
    return wis(ts, opt_);
  }

  bcq::EvalResult evaluate(const std::vector<int>& greedy) const {
    return {wis_of(greedy).estimate, accuracy_match(greedy, split_.actions)};
  }

  bcq::EvalResult evaluate(const bcq::PolicyBundle& b) const { return evaluate(bcq::extract_policy(b, split_.states)); }

  bcq::Evaluator as_callback() const {
    return [this](const bcq::PolicyBundle& b) { return evaluate(b); };
  }

 private:
  DecisionSet split_;
  WISOptions opt_;
  std::vector<double> mu_logged_;
};

/// "0.85 ± 0.02" (mean ± sample std).
inline std::string mean_std_string(const std::vector<double>& xs, int decimals = 2) {
  double m = 0.0, v = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  for (double x : xs) v += (x - m) * (x - m);
  const double sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, m, decimals, sd);
  return buf;
}

}  // namespace bcqforge::ope
