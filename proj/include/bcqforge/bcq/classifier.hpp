#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/layers.hpp"
#include "bcqforge/nn/ops.hpp"
#include "bcqforge/nn/optimizer.hpp"
#include "bcqforge/random.hpp"

namespace bcqforge::bcq {

using nn::Tape;
using nn::Tensor;
using nn::Var;

/// Softmax classifier over states. hidden == 0 gives a single dense layer (logistic regression).
struct ClassifierConfig {
  std::size_t hidden = 64;
  nn::Activation activation = nn::Activation::relu;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double learning_rate = 1e-3;
  std::size_t batch = 64;
  std::size_t steps = 3000;
  double inverse_l2 = 0.0;  // C; > 0 adds ‖W‖² / (2·C·n) to the mean cross-entropy
  std::uint64_t seed = 0;

  void validate() const {
    if (batch == 0) throw ConfigError("classifier.batch must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("classifier.learning_rate must be positive");
    if (inverse_l2 < 0.0) throw ConfigError("classifier.inverse_l2 must be >= 0");
  }
};

class Classifier {
 public:
  Classifier() = default;

  Classifier(const std::string& prefix, std::size_t in, std::size_t classes, std::size_t hidden,
             nn::Activation act = nn::Activation::relu) {
    if (hidden == 0) {
      net_ = nn::Mlp(prefix, {in, classes}, act, nn::Activation::identity);
    } else {
      net_ = nn::Mlp(prefix, {in, hidden, classes}, act, nn::Activation::identity);
    }
  }

  void init(Rng& rng) { net_.init(rng); }

  Var logits(Tape& tape, const Var& x) const { return net_.forward(tape, x); }

  /// Row-wise softmax probabilities.
  Tensor probabilities(const Tensor& states) const {
    Tensor l = net_.evaluate(states);
    for (std::size_t r = 0; r < l.rows(); ++r) {
      auto row = l.row_span(r);
      const auto p = nn::softmax(row);
      std::copy(p.begin(), p.end(), row.begin());
    }
    return l;
  }

  std::vector<int> predict(const Tensor& states) const {
    const Tensor l = net_.evaluate(states);
    std::vector<int> out(l.rows());
    for (std::size_t r = 0; r < l.rows(); ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < l.cols(); ++c)
        if (l.at(r, c) > l.at(r, best)) best = c;
      out[r] = static_cast<int>(best);
    }
    return out;
  }

  std::size_t in_dim() const { return net_.in_dim(); }
  std::size_t classes() const { return net_.out_dim(); }
  nn::Mlp& network() { return net_; }
  const nn::Mlp& network() const { return net_; }
  std::vector<nn::Parameter*> parameters() { return net_.parameters(); }
  std::vector<const nn::Parameter*> parameters() const { return net_.parameters(); }

 private:
  nn::Mlp net_;
};

inline double accuracy(const std::vector<int>& predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw InputError("accuracy: length mismatch");
  if (labels.empty()) throw InputError("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// Cross-entropy training on uniform minibatches (with replacement); deterministic in cfg.seed.
/// `warm_start` continues from existing weights instead of re-initializing.
inline double train_classifier(Classifier& clf, const Tensor& states, std::span<const int> labels,
                               const ClassifierConfig& cfg, const std::string& what = "classifier",
                               bool warm_start = false) {
  cfg.validate();
  const std::size_t n = states.rows();
  if (n == 0) throw InputError(what + ": no training samples");
  if (labels.size() != n) throw InputError(what + ": label count != sample count");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= clf.classes()) throw InputError(what + ": label out of range");

  Rng rng(derive_seed(cfg.seed, 0xc1a5));
  if (!warm_start) clf.init(rng);
  nn::OptimizerConfig oc;
  oc.kind = cfg.optimizer;
  oc.learning_rate = cfg.learning_rate;
  nn::Optimizer opt(clf.parameters(), oc);
  const double l2 = cfg.inverse_l2 > 0.0 ? 1.0 / (2.0 * cfg.inverse_l2 * static_cast<double>(n)) : 0.0;
  const std::size_t d = states.cols();

  double last = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tensor xb = Tensor::matrix(cfg.batch, d);
    std::vector<std::size_t> yb(cfg.batch);
    for (std::size_t r = 0; r < cfg.batch; ++r) {
      const std::size_t i = uniform_index(rng, n);
      std::copy_n(states.row_span(i).begin(), d, xb.row_span(r).begin());
      yb[r] = static_cast<std::size_t>(labels[i]);
    }
    opt.zero_grad();
    Tape tape;
    Var loss = nn::mean_all(nn::softmax_cross_entropy(clf.logits(tape, tape.constant(std::move(xb))), std::move(yb)));
    if (l2 > 0.0)
      for (const auto& layer : clf.network().layers()) loss = loss + l2 * nn::sum_squares(tape.param(layer.weight()));
    last = loss.value()[0];
    if (!std::isfinite(last)) throw NumericalError(what + ": loss became non-finite at step " + std::to_string(step));
    tape.backward(loss);
    opt.step();
  }
  return last;
}

}  // namespace bcqforge::bcq
