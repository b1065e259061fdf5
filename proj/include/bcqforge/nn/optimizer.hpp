#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/tape.hpp"

namespace bcqforge::nn {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd" || s == "SGD") return OptimizerKind::sgd;
  if (s == "adam" || s == "Adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer: " + s);
}

inline const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global-norm gradient clip applied before every step; <= 0 disables.
  double max_grad_norm = 10.0;
};

/// Global L2 norm of all gradients.
inline double grad_norm(const std::vector<Parameter*>& params) {
  double s = 0.0;
  for (const auto* p : params)
    for (double g : p->grad.values()) s += g * g;
  return std::sqrt(s);
}

inline void clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  const double n = grad_norm(params);
  if (!(n > max_norm)) return;
  const double s = max_norm / n;
  for (auto* p : params)
    for (auto& g : p->grad.values()) g *= s;
}

/// SGD or bias-corrected Adam over a fixed parameter list.
class Optimizer {
 public:
  Optimizer(std::vector<Parameter*> params, OptimizerConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ConfigError("optimizer: learning rate must be > 0");
    for (const auto* p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  /// Applies one update from the gradients currently stored in each Parameter.
  void step() {
    for (const auto* p : params_) {
      if (!p->grad.same_shape(p->value)) {
        throw ConfigError("optimizer: gradient shape mismatch for " + p->name);
      }
    }
    if (config_.max_grad_norm > 0.0) clip_grad_norm(params_, config_.max_grad_norm);
    ++step_;
    if (config_.kind == OptimizerKind::sgd) {
      for (auto* p : params_)
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= config_.learning_rate * p->grad[i];
      return;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter& p = *params_[k];
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p.value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
      }
    }
  }

  long steps() const { return step_; }
  const OptimizerConfig& config() const { return config_; }
  const std::vector<Parameter*>& parameters() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  OptimizerConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long step_ = 0;
};

}  // namespace bcqforge::nn
