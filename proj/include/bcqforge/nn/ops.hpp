#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/tape.hpp"
#include "bcqforge/nn/tensor.hpp"

// Differentiable ops over 2-D [rows, cols] values recorded on a Tape.

namespace bcqforge::nn {

enum class Activation { identity, relu, tanh, sigmoid };

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

inline Tensor as_matrix(Tensor t) {
  if (t.rank() == 1) return Tensor({1, t.size()}, std::move(t.storage()));
  return t;
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

template <class F, class DF>
Var unary(const Var& x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  const Var xin = x;
  return x.tape()->record(std::move(y), {x}, [xin, df](Tape& t, const Tensor& g) {
    const Tensor& xv2 = xin.value();
    Tensor& gx = t.grad(xin);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv2[i]);
  });
}

}  // namespace detail

/// x·Wᵀ (+ b). x: [B, in], W: [out, in], b: [out].
inline Var linear(const Var& x, const Var& w, const Var* b = nullptr) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const std::size_t batch = xv.rows(), in = xv.cols(), out = wv.rows();
  detail::require(wv.cols() == in, "linear: input width " + std::to_string(in) + " != layer in-dimension " +
                                       std::to_string(wv.cols()));
  if (b) detail::require(b->value().size() == out, "linear: bias size mismatch");
  Tensor y = Tensor::matrix(batch, out);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = xv.values().data() + r * in;
    double* yr = y.values().data() + r * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = wv.values().data() + o * in;
      double acc = b ? b->value()[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc;
    }
  }
  Tape* tape = x.tape();
  const Var xin = x, win = w;
  const bool has_bias = b != nullptr;
  const Var bin = has_bias ? *b : Var{};
  auto fn = [xin, win, bin, has_bias, batch, in, out](Tape& t, const Tensor& g) {
    const Tensor& xv2 = xin.value();
    const Tensor& wv2 = win.value();
    if (t.needs_grad(xin)) {
      Tensor& gx = t.grad(xin);
      for (std::size_t r = 0; r < batch; ++r) {
        double* gxr = gx.values().data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[r * out + o];
          if (go == 0.0) continue;
          const double* wo = wv2.values().data() + o * in;
          for (std::size_t i = 0; i < in; ++i) gxr[i] += go * wo[i];
        }
      }
    }
    if (t.needs_grad(win)) {
      Tensor& gw = t.grad(win);
      for (std::size_t r = 0; r < batch; ++r) {
        const double* xr = xv2.values().data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[r * out + o];
          if (go == 0.0) continue;
          double* gwo = gw.values().data() + o * in;
          for (std::size_t i = 0; i < in; ++i) gwo[i] += go * xr[i];
        }
      }
    }
    if (has_bias && t.needs_grad(bin)) {
      Tensor& gb = t.grad(bin);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t o = 0; o < out; ++o) gb[o] += g[r * out + o];
    }
  };
  if (has_bias) return tape->record(std::move(y), {x, w, *b}, fn);
  return tape->record(std::move(y), {x, w}, fn);
}

inline Var linear(const Var& x, const Var& w, const Var& b) { return linear(x, w, &b); }

inline Var relu(const Var& x) {
  return detail::unary(x, [](double v) { return v < 0.0 ? 0.0 : v; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var tanh(const Var& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); },
      [](double v) {
        const double y = std::tanh(v);
        return 1.0 - y * y;
      });
}

inline Var sigmoid(const Var& x) {
  return detail::unary(x, stable_sigmoid, [](double v) {
    const double y = stable_sigmoid(v);
    return y * (1.0 - y);
  });
}

inline Var activate(const Var& x, Activation a) {
  switch (a) {
    case Activation::relu:
      return relu(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::identity:
      break;
  }
  return x;
}

/// a·x + c elementwise.
inline Var affine(const Var& x, double a, double c) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a * xv[i] + c;
  const Var xin = x;
  return x.tape()->record(std::move(y), {x}, [xin, a](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xin);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += a * g[i];
  });
}

inline Var scale(const Var& x, double a) { return affine(x, a, 0.0); }

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value() + b.value();
  const Var ai = a, bi = b;
  return a.tape()->record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    for (const Var& v : {ai, bi}) {
      if (!t.needs_grad(v)) continue;
      Tensor& gv = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value() - b.value();
  const Var ai = a, bi = b;
  return a.tape()->record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    if (t.needs_grad(ai)) {
      Tensor& ga = t.grad(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(bi)) {
      Tensor& gb = t.grad(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  const Var ai = a, bi = b;
  return a.tape()->record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    const Tensor& av = ai.value();
    const Tensor& bv = bi.value();
    if (t.needs_grad(ai)) {
      Tensor& ga = t.grad(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(bi)) {
      Tensor& gb = t.grad(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

inline Var concat_cols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require(av.rows() == bv.rows(), "concat_cols: row mismatch");
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor y = Tensor::matrix(rows, ca + cb);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.values().data() + r * ca, ca, y.values().data() + r * (ca + cb));
    std::copy_n(bv.values().data() + r * cb, cb, y.values().data() + r * (ca + cb) + ca);
  }
  const Var ai = a, bi = b;
  return a.tape()->record(std::move(y), {a, b}, [ai, bi, rows, ca, cb](Tape& t, const Tensor& g) {
    if (t.needs_grad(ai)) {
      Tensor& ga = t.grad(ai);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
    }
    if (t.needs_grad(bi)) {
      Tensor& gb = t.grad(bi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
    }
  });
}

/// Picks column idx[r] from each row: [B, C] → [B, 1].
inline Var gather_cols(const Var& x, std::vector<std::size_t> idx) {
  const Tensor& xv = x.value();
  detail::require(idx.size() == xv.rows(), "gather_cols: index count != rows");
  const std::size_t cols = xv.cols();
  Tensor y = Tensor::matrix(xv.rows(), 1);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= cols) throw InputError("gather_cols: index out of range");
    y[r] = xv.at(r, idx[r]);
  }
  const Var xi = x;
  return x.tape()->record(std::move(y), {x}, [xi, idx = std::move(idx), cols](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xi);
    for (std::size_t r = 0; r < idx.size(); ++r) gx[r * cols + idx[r]] += g[r];
  });
}

/// Elementwise Huber loss with threshold kappa.
inline Var huber(const Var& x, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("huber: kappa must be > 0");
  return detail::unary(
      x,
      [kappa](double d) {
        const double a = std::abs(d);
        return a <= kappa ? 0.5 * d * d : kappa * (a - 0.5 * kappa);
      },
      [kappa](double d) { return std::abs(d) <= kappa ? d : (d > 0.0 ? kappa : -kappa); });
}

/// Per-row −log softmax(logits)[label]: [B, C] → [B, 1].
inline Var softmax_cross_entropy(const Var& logits, std::vector<std::size_t> labels) {
  const Tensor& lv = logits.value();
  const std::size_t rows = lv.rows(), cols = lv.cols();
  detail::require(labels.size() == rows, "softmax_cross_entropy: label count != rows");
  Tensor probs = Tensor::matrix(rows, cols);
  Tensor y = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= cols) throw InputError("cross_entropy: label out of range");
    auto row = lv.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(row[c] - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) probs.at(r, c) = std::exp(row[c] - lse);
    y[r] = lse - row[labels[r]];
  }
  const Var li = logits;
  return logits.tape()->record(
      std::move(y), {logits},
      [li, labels = std::move(labels), probs = std::move(probs), cols](Tape& t, const Tensor& g) {
        Tensor& gl = t.grad(li);
        for (std::size_t r = 0; r < labels.size(); ++r)
          for (std::size_t c = 0; c < cols; ++c)
            gl[r * cols + c] += g[r] * (probs.at(r, c) - (c == labels[r] ? 1.0 : 0.0));
      });
}

inline Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const Var xi = x;
  return x.tape()->record(Tensor({1, 1}, s), {x}, [xi](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(xi);
    for (auto& v : gx.values()) v += g[0];
  });
}

inline Var mean_all(const Var& x) {
  const std::size_t n = x.value().size();
  detail::require(n > 0, "mean_all: empty input");
  return scale(sum_all(x), 1.0 / static_cast<double>(n));
}

inline Var sum_squares(const Var& x) { return sum_all(mul(x, x)); }

/// Mean squared error against a constant target of the same shape.
inline Var mse(const Var& pred, const Tensor& target) {
  require_same_shape(pred.value(), target, "mse");
  const Var t = pred.tape()->constant(target);
  const Var d = sub(pred, t);
  return mean_all(mul(d, d));
}

/// Row-wise matrix-vector product: F [B, H·C] viewed as B matrices H×C, times v [B, C] → [B, H].
inline Var batched_matvec(const Var& f, const Var& v, std::size_t hidden) {
  const Tensor& fv = f.value();
  const Tensor& vv = v.value();
  const std::size_t rows = fv.rows(), ch = vv.cols();
  detail::require(vv.rows() == rows && fv.cols() == hidden * ch, "batched_matvec: shape mismatch");
  Tensor y = Tensor::matrix(rows, hidden);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t h = 0; h < hidden; ++h) {
      double acc = 0.0;
      for (std::size_t c = 0; c < ch; ++c) acc += fv[r * hidden * ch + h * ch + c] * vv[r * ch + c];
      y[r * hidden + h] = acc;
    }
  const Var fi = f, vi = v;
  return f.tape()->record(std::move(y), {f, v}, [fi, vi, rows, hidden, ch](Tape& t, const Tensor& g) {
    const Tensor& fv2 = fi.value();
    const Tensor& vv2 = vi.value();
    if (t.needs_grad(fi)) {
      Tensor& gf = t.grad(fi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t h = 0; h < hidden; ++h)
          for (std::size_t c = 0; c < ch; ++c) gf[r * hidden * ch + h * ch + c] += g[r * hidden + h] * vv2[r * ch + c];
    }
    if (t.needs_grad(vi)) {
      Tensor& gv = t.grad(vi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t h = 0; h < hidden; ++h)
          for (std::size_t c = 0; c < ch; ++c) gv[r * ch + c] += g[r * hidden + h] * fv2[r * hidden * ch + h * ch + c];
    }
  });
}

// Scalar reference forms, used by evaluation code that never needs gradients.

/// ½δ² inside [−κ, κ], κ(|δ| − ½κ) outside.
inline double huber_loss(double delta, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("huber_loss: kappa must be > 0");
  const double a = std::abs(delta);
  return a <= kappa ? 0.5 * delta * delta : kappa * (a - 0.5 * kappa);
}

inline double log_sum_exp(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double l : logits) s += std::exp(l - m);
  return m + std::log(s);
}

inline double cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw InputError("cross_entropy: label out of range");
  return log_sum_exp(logits) - logits[label];
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

}  // namespace bcqforge::nn
