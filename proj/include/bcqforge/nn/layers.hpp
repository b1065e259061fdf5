#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/ops.hpp"
#include "bcqforge/nn/tape.hpp"
#include "bcqforge/random.hpp"

namespace bcqforge::nn {

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      break;
  }
  return "identity";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation: " + s);
}

/// uniform(−1/√fan_in, 1/√fan_in).
inline void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = uniform(rng, -bound, bound);
}

class DenseLayer {
 public:
  DenseLayer() = default;

  DenseLayer(std::string name, std::size_t in, std::size_t out, Activation act)
      : name_(std::move(name)),
        weight_(name_ + ".weight", Tensor({out, in})),
        bias_(name_ + ".bias", Tensor({out})),
        act_(act) {
    if (in == 0 || out == 0) throw ConfigError("dense layer " + name_ + ": zero dimension");
  }

  void init(Rng& rng) {
    init_uniform(weight_.value, in_dim(), rng);
    bias_.value.fill(0.0);
  }

  Var forward(Tape& tape, const Var& x) const {
    if (x.cols() != in_dim()) {
      throw ConfigError("dense layer " + name_ + ": input width " + std::to_string(x.cols()) +
                        " != in-dimension " + std::to_string(in_dim()));
    }
    const Var w = tape.param(weight_);
    const Var b = tape.param(bias_);
    return activate(linear(x, w, b), act_);
  }

  const std::string& name() const { return name_; }
  std::size_t in_dim() const { return weight_.value.cols(); }
  std::size_t out_dim() const { return weight_.value.rows(); }
  Activation activation() const { return act_; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }
  std::vector<const Parameter*> parameters() const { return {&weight_, &bias_}; }

 private:
  std::string name_;
  Parameter weight_;
  Parameter bias_;
  Activation act_ = Activation::identity;
};

/// Stack of dense layers named `<prefix>.fc0`, `<prefix>.fc1`, ...
class Mlp {
 public:
  Mlp() = default;

  /// widths = {in, h1, ..., out}; hidden layers use `hidden_act`, the last uses `out_act`.
  Mlp(const std::string& prefix, const std::vector<std::size_t>& widths, Activation hidden_act, Activation out_act) {
    if (widths.size() < 2) throw ConfigError("mlp " + prefix + ": needs at least input and output width");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool last = i + 2 == widths.size();
      layers_.emplace_back(prefix + ".fc" + std::to_string(i), widths[i], widths[i + 1], last ? out_act : hidden_act);
    }
  }

  void init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
  }

  Var forward(Tape& tape, Var x) const {
    for (const auto& l : layers_) x = l.forward(tape, x);
    return x;
  }

  /// Gradient-free evaluation on a batch of rows.
  Tensor evaluate(const Tensor& x) const {
    Tape tape(false);
    return forward(tape, tape.constant(x)).value();
  }

  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_)
      for (auto* p : l.parameters()) out.push_back(p);
    return out;
  }
  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& l : layers_)
      for (const auto* p : l.parameters()) out.push_back(p);
    return out;
  }

 private:
  std::vector<DenseLayer> layers_;
};

/// Gated recurrent unit:
///   z = σ(W_z x + U_z h + b_z)
///   r = σ(W_r x + U_r h + b_r)
///   n = tanh(W_n x + U_n (r ⊙ h) + b_n)
///   h' = (1 − z) ⊙ n + z ⊙ h
class GRUCell {
 public:
  GRUCell() = default;

  GRUCell(const std::string& name, std::size_t input, std::size_t hidden) : name_(name) {
    if (input == 0 || hidden == 0) throw ConfigError("gru " + name + ": zero dimension");
    const char* gates[] = {"z", "r", "n"};
    for (int g = 0; g < 3; ++g) {
      w_[g] = Parameter(name + ".w_" + gates[g], Tensor({hidden, input}));
      u_[g] = Parameter(name + ".u_" + gates[g], Tensor({hidden, hidden}));
      b_[g] = Parameter(name + ".b_" + gates[g], Tensor({hidden}));
    }
  }

  void init(Rng& rng) {
    const std::size_t fan_in = input_dim() + hidden_dim();
    for (int g = 0; g < 3; ++g) {
      init_uniform(w_[g].value, fan_in, rng);
      init_uniform(u_[g].value, fan_in, rng);
      b_[g].value.fill(0.0);
    }
  }

  Var step(Tape& tape, const Var& x, const Var& h) const {
    if (x.cols() != input_dim()) throw ConfigError("gru " + name_ + ": input width mismatch");
    if (h.cols() != hidden_dim() || h.rows() != x.rows()) throw ConfigError("gru " + name_ + ": hidden shape mismatch");
    auto gate_pre = [&](int g, const Var& hh) {
      const Var w = tape.param(w_[g]);
      const Var u = tape.param(u_[g]);
      const Var b = tape.param(b_[g]);
      return linear(x, w, b) + linear(hh, u);
    };
    const Var z = sigmoid(gate_pre(0, h));
    const Var r = sigmoid(gate_pre(1, h));
    const Var n = tanh(gate_pre(2, r * h));
    return affine(z, -1.0, 1.0) * n + z * h;
  }

  std::size_t input_dim() const { return w_[0].value.cols(); }
  std::size_t hidden_dim() const { return w_[0].value.rows(); }
  const std::string& name() const { return name_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (int g = 0; g < 3; ++g) out.insert(out.end(), {&w_[g], &u_[g], &b_[g]});
    return out;
  }
  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out;
    for (int g = 0; g < 3; ++g) out.insert(out.end(), {&w_[g], &u_[g], &b_[g]});
    return out;
  }

 private:
  std::string name_;
  Parameter w_[3];
  Parameter u_[3];
  Parameter b_[3];
};

template <class Container>
void append_parameters(std::vector<Parameter*>& out, Container&& ps) {
  out.insert(out.end(), ps.begin(), ps.end());
}

template <class P>
inline void zero_grad(const std::vector<P*>& params) {
  for (auto* p : params) p->zero_grad();
}

inline bool all_finite(const std::vector<const Parameter*>& params) {
  for (const auto* p : params)
    if (!p->value.all_finite()) return false;
  return true;
}

/// FNV-1a over the raw bytes of every parameter value, for bitwise-equality checks.
inline std::uint64_t parameter_hash(const std::vector<const Parameter*>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* p : params) {
    for (double v : p->value.values()) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
      for (std::size_t i = 0; i < sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace bcqforge::nn
