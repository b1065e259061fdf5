#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/encoders/ode.hpp"
#include "bcqforge/encoders/spline.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/nn/checkpoint.hpp"
#include "bcqforge/nn/layers.hpp"

namespace bcqforge::encoders {

using nn::Tape;
using nn::Tensor;
using nn::Var;

enum class EncoderKind { rnn, ode_rnn, cde };

inline EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "rnn") return EncoderKind::rnn;
  if (s == "ode_rnn" || s == "ode-rnn") return EncoderKind::ode_rnn;
  if (s == "cde") return EncoderKind::cde;
  throw ConfigError("unknown encoder kind: " + s);
}

inline const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::rnn: return "rnn";
    case EncoderKind::ode_rnn: return "ode_rnn";
    case EncoderKind::cde: return "cde";
  }
  return "?";
}

struct EncoderConfig {
  EncoderKind kind = EncoderKind::rnn;
  std::size_t hidden = 64;
  std::vector<std::size_t> head = {64, 64};  // dense+relu widths in front of the GRU
  std::size_t field_width = 100;             // ODE / CDE vector-field hidden width
  std::size_t step_count = 4;                // integration sub-steps per bin
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden == 0) throw ConfigError("encoder.hidden must be positive");
    if (head.size() != 2 || head[0] == 0 || head[1] == 0) throw ConfigError("encoder.head must hold two positive widths");
    if (field_width == 0) throw ConfigError("encoder.field_width must be positive");
    if (step_count == 0) throw ConfigError("encoder.step_count must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"kind", encoder_kind_name(kind)}, {"hidden", hidden},         {"head", head},
            {"field_width", field_width},      {"step_count", step_count}, {"seed", seed}};
  }

  static EncoderConfig from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
    c.hidden = j.at("hidden").get<std::size_t>();
    c.head = j.at("head").get<std::vector<std::size_t>>();
    c.field_width = j.at("field_width").get<std::size_t>();
    c.step_count = j.at("step_count").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  }
};

/// Φ: (F_{0:t}, A_{0:t−1}) → Ŝ_t.
///
/// rnn      x_τ = [F_τ ++ A_{τ−1}] → dense+relu → dense+relu → GRU
/// ode_rnn  as rnn, but before each update τ ≥ 1 the hidden state follows h' = f(h) over one bin
///          (fixed-step RK4, step_count steps), f = dense(tanh) → dense
/// cde      path X = [τ ++ F_τ ++ A_{τ−1}] at integer knots; z_0 = linear(X(0));
///          z += f(z)·ΔX over step_count sub-steps per bin, f = 3×relu hidden → tanh, shaped [H, C]
///
/// The CDE path on bin segment [τ−1, τ] is the natural spline through knots 0..τ only, so no
/// encoder looks past bin t.
class Encoder {
 public:
  Encoder() = default;

  Encoder(const EncoderConfig& cfg, std::size_t num_features) : cfg_(cfg), features_(num_features) {
    cfg.validate();
    if (num_features == 0) throw ConfigError("encoder: zero input features");
    const std::size_t in = num_features + 1, H = cfg.hidden;
    if (cfg.kind == EncoderKind::cde) {
      const std::size_t C = channels();
      init_map_ = nn::DenseLayer("enc.cde_init", C, H, nn::Activation::identity);
      field_ = nn::Mlp("enc.cde_field", {H, cfg.field_width, cfg.field_width, cfg.field_width, H * C},
                       nn::Activation::relu, nn::Activation::tanh);
    } else {
      input_ = nn::Mlp("enc.input", {in, cfg.head[0], cfg.head[1]}, nn::Activation::relu, nn::Activation::relu);
      gru_ = nn::GRUCell("enc.gru", cfg.head[1], H);
      if (cfg.kind == EncoderKind::ode_rnn)
        field_ = nn::Mlp("enc.ode", {H, cfg.field_width, H}, nn::Activation::tanh, nn::Activation::identity);
    }
    Rng rng(derive_seed(cfg.seed, 0xe4c));
    // Input stack and GRU draw first, so an ode_rnn shares its rnn twin's initial weights.
    if (cfg.kind == EncoderKind::cde) {
      init_map_.init(rng);
    } else {
      input_.init(rng);
      gru_.init(rng);
    }
    if (cfg.kind != EncoderKind::rnn) field_.init(rng);
  }

  const EncoderConfig& config() const { return cfg_; }
  EncoderKind kind() const { return cfg_.kind; }
  std::size_t hidden() const { return cfg_.hidden; }
  std::size_t num_features() const { return features_; }
  std::size_t channels() const { return features_ + 2; }

  /// Latent states for every bin of a trajectory, Ŝ_0..Ŝ_{T−1} as rows.
  Tensor encode(const Tensor& features, const std::vector<int>& actions) const {
    Tape tape(false);
    const auto states = run(tape, features, actions, features.rows());
    Tensor out = Tensor::matrix(states.size(), hidden());
    for (std::size_t t = 0; t < states.size(); ++t) {
      const auto& v = states[t].value();
      std::copy(v.values().begin(), v.values().end(), out.row_span(t).begin());
    }
    return out;
  }

  Tensor encode(const data::Trajectory& t) const { return encode(t.features, t.actions); }

  /// Ŝ_t alone; only bins 0..t are read.
  Tensor encode_at(const Tensor& features, const std::vector<int>& actions, std::size_t t) const {
    if (t >= features.rows()) throw InputError("encode: t = " + std::to_string(t) + " out of range");
    Tape tape(false);
    return run(tape, features, actions, t + 1).back().value();
  }

  /// Taped forward pass over bins [0, upto); the returned states are [1, H] each.
  std::vector<Var> run(Tape& tape, const Tensor& features, const std::vector<int>& actions, std::size_t upto) const {
    if (features.cols() != features_) {
      throw InputError("encoder: expected " + std::to_string(features_) + " features, got " +
                       std::to_string(features.cols()));
    }
    if (upto == 0 || upto > features.rows()) throw InputError("encoder: bin range out of bounds");
    if (actions.size() + 1 < upto) throw InputError("encoder: too few actions for requested bins");
    if (cfg_.kind == EncoderKind::cde) return run_cde(tape, features, actions, upto);

    std::vector<Var> out;
    Var h = tape.constant(Tensor::matrix(1, hidden()));
    for (std::size_t tau = 0; tau < upto; ++tau) {
      if (tau > 0 && cfg_.kind == EncoderKind::ode_rnn) {
        auto f = [&](const Var& x) { return field_.forward(tape, x); };
        h = rk4_integrate(f, h, 1.0, cfg_.step_count);
      }
      Tensor x = Tensor::matrix(1, features_ + 1);
      for (std::size_t j = 0; j < features_; ++j) x.at(0, j) = features.at(tau, j);
      x.at(0, features_) = tau == 0 ? 0.0 : static_cast<double>(actions[tau - 1]);
      const Var in = input_.forward(tape, tape.constant(std::move(x)));
      h = gru_.step(tape, in, h);
      out.push_back(h);
    }
    return out;
  }

  std::vector<nn::Parameter*> parameters() {
    std::vector<nn::Parameter*> out;
    if (cfg_.kind == EncoderKind::cde) {
      nn::append_parameters(out, init_map_.parameters());
    } else {
      nn::append_parameters(out, input_.parameters());
      nn::append_parameters(out, gru_.parameters());
    }
    if (cfg_.kind != EncoderKind::rnn) nn::append_parameters(out, field_.parameters());
    return out;
  }

  std::vector<const nn::Parameter*> parameters() const {
    std::vector<const nn::Parameter*> out;
    for (auto* p : const_cast<Encoder*>(this)->parameters()) out.push_back(p);
    return out;
  }

  nn::Mlp& vector_field() { return field_; }
  const nn::Mlp& vector_field() const { return field_; }

  nlohmann::json checkpoint(const std::string& config_hash = "") const {
    nlohmann::json meta{{"encoder", cfg_.to_json()}, {"num_features", features_}};
    return nn::make_checkpoint("encoder", config_hash, parameters(), std::move(meta));
  }

  static Encoder from_checkpoint(const nlohmann::json& j) {
    const auto& meta = j.at("metadata");
    Encoder e(EncoderConfig::from_json(meta.at("encoder")), meta.at("num_features").get<std::size_t>());
    nn::parameters_from_json(j.at("parameters"), e.parameters());
    return e;
  }

 private:
  std::vector<double> knot(const Tensor& features, const std::vector<int>& actions, std::size_t tau) const {
    std::vector<double> x(channels());
    x[0] = static_cast<double>(tau);
    for (std::size_t j = 0; j < features_; ++j) x[j + 1] = features.at(tau, j);
    x[features_ + 1] = tau == 0 ? 0.0 : static_cast<double>(actions[tau - 1]);
    return x;
  }

  std::vector<Var> run_cde(Tape& tape, const Tensor& features, const std::vector<int>& actions, std::size_t upto) const {
    const std::size_t C = channels();
    std::vector<std::vector<double>> knots{knot(features, actions, 0)};
    std::vector<double> times{0.0};
    Var z = init_map_.forward(tape, tape.constant(Tensor({1, C}, knots[0])));
    std::vector<Var> out{z};
    for (std::size_t tau = 1; tau < upto; ++tau) {
      knots.push_back(knot(features, actions, tau));
      times.push_back(static_cast<double>(tau));
      z = integrate_cde(tape, z, fit_path(times, knots), static_cast<double>(tau - 1), static_cast<double>(tau));
      out.push_back(z);
    }
    return out;
  }

 public:
  /// z ← z + f(z)·(X(s + Δ) − X(s)) over [t0, t1] in step_count sub-steps.
  Var integrate_cde(Tape& tape, Var z, const SplinePath& path, double t0, double t1) const {
    const std::size_t C = path.num_channels();
    if (C != channels()) throw ConfigError("cde: path channel count mismatch");
    const double ds = (t1 - t0) / static_cast<double>(cfg_.step_count);
    std::vector<double> prev = path(t0);
    for (std::size_t k = 1; k <= cfg_.step_count; ++k) {
      const std::vector<double> next = path(t0 + ds * static_cast<double>(k));
      Tensor dx = Tensor::matrix(1, C);
      bool moving = false;
      for (std::size_t c = 0; c < C; ++c) {
        dx.at(0, c) = next[c] - prev[c];
        moving = moving || dx.at(0, c) != 0.0;
      }
      prev = next;
      if (!moving) continue;
      const Var f = field_.forward(tape, z);
      z = z + nn::batched_matvec(f, tape.constant(std::move(dx)), hidden());
    }
    return z;
  }

 private:
  EncoderConfig cfg_;
  std::size_t features_ = 0;
  nn::Mlp input_;
  nn::GRUCell gru_;
  nn::Mlp field_;
  nn::DenseLayer init_map_;
};

}  // namespace bcqforge::encoders
