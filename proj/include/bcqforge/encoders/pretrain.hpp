#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/encoders/encoder.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/nn/optimizer.hpp"
#include "bcqforge/random.hpp"

namespace bcqforge::encoders {

struct PretrainConfig {
  std::size_t steps = 2000;
  double learning_rate = 1e-3;
  std::size_t eval_trajectories = 64;  // fixed subset used for the before/after loss
  std::uint64_t seed = 0;
};

struct PretrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> step_losses;
  nn::DenseLayer decoder;  // kept for diagnostics; not used downstream
};

/// Next-observation loss: decode Ŝ_t linearly into F_{t+1}, mean squared error over t < T − 1.
inline Var next_observation_loss(Tape& tape, const Encoder& enc, const nn::DenseLayer& decoder, const data::Trajectory& t) {
  const std::size_t T = t.length();
  const auto states = enc.run(tape, t.features, t.actions, T - 1);
  Var total = tape.constant(Tensor({1, 1}, 0.0));
  for (std::size_t s = 0; s + 1 < T; ++s) {
    Tensor target = Tensor::matrix(1, t.features.cols());
    for (std::size_t j = 0; j < target.cols(); ++j) target.at(0, j) = t.features.at(s + 1, j);
    total = total + nn::mse(decoder.forward(tape, states[s]), target);
  }
  return nn::scale(total, 1.0 / static_cast<double>(T - 1));
}

inline double mean_next_observation_loss(const Encoder& enc, const nn::DenseLayer& decoder, const data::Cohort& cohort,
                                         const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (std::size_t i : idx) {
    Tape tape(false);
    s += next_observation_loss(tape, enc, decoder, cohort.trajectories[i]).value()[0];
  }
  return idx.empty() ? 0.0 : s / static_cast<double>(idx.size());
}

/// Trains encoder and a linear decoder with Adam, one train-split trajectory per step.
/// The encoder is modified in place; freeze it by passing it on as const.
inline PretrainResult pretrain_encoder(Encoder& enc, const data::Cohort& cohort, const PretrainConfig& cfg) {
  std::vector<std::size_t> train;
  for (std::size_t i : cohort.indices(data::Split::train))
    if (cohort.trajectories[i].length() >= 2) train.push_back(i);
  if (train.empty()) throw InputError("pretrain: train split has no trajectory with >= 2 bins");

  Rng rng(derive_seed(cfg.seed, 0x97e));
  PretrainResult res;
  res.decoder = nn::DenseLayer("dec.next", enc.hidden(), enc.num_features(), nn::Activation::identity);
  res.decoder.init(rng);

  std::vector<std::size_t> eval(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(std::min(train.size(), cfg.eval_trajectories)));
  res.initial_loss = mean_next_observation_loss(enc, res.decoder, cohort, eval);

  auto params = enc.parameters();
  nn::append_parameters(params, res.decoder.parameters());
  nn::OptimizerConfig oc;
  oc.kind = nn::OptimizerKind::adam;
  oc.learning_rate = cfg.learning_rate;
  nn::Optimizer opt(params, oc);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const data::Trajectory& t = cohort.trajectories[train[uniform_index(rng, train.size())]];
    opt.zero_grad();
    Tape tape;
    const Var loss = next_observation_loss(tape, enc, res.decoder, t);
    const double v = loss.value()[0];
    if (!std::isfinite(v)) {
      throw NumericalError("pretrain: loss became non-finite at step " + std::to_string(step) + " (patient " +
                           t.patient_id + ", lr " + std::to_string(cfg.learning_rate) + ")");
    }
    res.step_losses.push_back(v);
    tape.backward(loss);
    opt.step();
  }
  res.final_loss = mean_next_observation_loss(enc, res.decoder, cohort, eval);
  if (!std::isfinite(res.final_loss)) throw NumericalError("pretrain: final loss is non-finite");
  return res;
}

}  // namespace bcqforge::encoders
