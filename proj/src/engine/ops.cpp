#include "uranker/ops.hpp"

#include <cmath>
#include <numbers>

#include "uranker/errors.hpp"
#include "uranker/kernels.hpp"

namespace uranker::ag {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(x.shape()));
  }
}

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

Index leading(const Tensor& t) { return t.rank() == 0 ? 1 : t.dim(0); }
Index trailing(const Tensor& t) { return t.rank() == 0 ? 1 : t.numel() / t.dim(0); }

// y = f(x) elementwise with dy/dx = df(x, y).
template <class F, class DF>
Var unary(const Var& x, F f, DF df) {
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  for (Index i = 0; i < out.numel(); ++i) out[i] = f(xv[i]);
  return make_op(std::move(out), {x}, [df](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    Tensor g(xv.shape());
    for (Index i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * df(xv[i], self.value[i]);
    self.inputs[0]->accumulate(g);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (Index i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (Index i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    if (wants(self, 1)) {
      Tensor g = self.grad;
      for (Index i = 0; i < g.numel(); ++i) g[i] = -g[i];
      self.inputs[1]->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (Index i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor g(av.shape());
      for (Index i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * bv[i];
      self.inputs[0]->accumulate(g);
    }
    if (wants(self, 1)) {
      Tensor g(bv.shape());
      for (Index i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * av[i];
      self.inputs[1]->accumulate(g);
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double k) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= k;
  return make_op(std::move(out), {a}, [k](Node& self) {
    Tensor g = self.grad;
    for (double& v : g.values()) v *= k;
    self.inputs[0]->accumulate(g);
  });
}

Var add_scalar(const Var& a, double k) {
  Tensor out = a.value();
  for (double& v : out.values()) v += k;
  return make_op(std::move(out), {a}, [](Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Var mul_scalar(const Var& s, const Var& x) {
  if (s.numel() != 1) throw ShapeError("mul_scalar: scale must hold one element, got " + to_string(s.shape()));
  const double k = s.value()[0];
  Tensor out = x.value();
  for (double& v : out.values()) v *= k;
  return make_op(std::move(out), {s, x}, [](Node& self) {
    const double k = self.inputs[0]->value[0];
    const Tensor& xv = self.inputs[1]->value;
    if (wants(self, 0)) {
      double acc = 0.0;
      for (Index i = 0; i < xv.numel(); ++i) acc += self.grad[i] * xv[i];
      self.inputs[0]->accumulate(Tensor::scalar(acc).reshaped(self.inputs[0]->value.shape()));
    }
    if (wants(self, 1)) {
      Tensor g = self.grad;
      for (double& v : g.values()) v *= k;
      self.inputs[1]->accumulate(g);
    }
  });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v < 0.0 ? 0.0 : v; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var elu(const Var& x, double alpha) {
  return unary(
      x, [alpha](double v) { return v > 0.0 ? v : alpha * std::expm1(v); },
      [alpha](double v, double y) { return v > 0.0 ? 1.0 : y + alpha; });
}

Var gelu(const Var& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v, double) { return v > lo && v < hi ? 1.0 : 0.0; });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_op(Tensor::scalar(s), {x}, [](Node& self) {
    self.inputs[0]->accumulate(Tensor(self.inputs[0]->value.shape(), self.grad[0]));
  });
}

Var mean(const Var& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Var mean_abs_diff(const Var& a, const Var& b) {
  require_same_shape(a, b, "mean_abs_diff");
  const Index n = a.numel();
  if (n == 0) throw ShapeError("mean_abs_diff of empty tensors");
  double s = 0.0;
  for (Index i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return make_op(Tensor::scalar(s / static_cast<double>(n)), {a, b}, [n](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    const double k = self.grad[0] / static_cast<double>(n);
    Tensor g(av.shape());
    for (Index i = 0; i < n; ++i) {
      const double d = av[i] - bv[i];
      g[i] = d > 0.0 ? k : (d < 0.0 ? -k : 0.0);
    }
    self.inputs[0]->accumulate(g);
    if (wants(self, 1)) {
      for (double& v : g.values()) v = -v;
      self.inputs[1]->accumulate(g);
    }
  });
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Index m = trans_a ? a.dim(1) : a.dim(0);
  const Index k = trans_a ? a.dim(0) : a.dim(1);
  const Index kb = trans_b ? b.dim(1) : b.dim(0);
  const Index n = trans_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  Tensor out({m, n});
  kernels::gemm(trans_a, trans_b, m, n, k, a.value().data(), b.value().data(), out.data(), false);
  return make_op(std::move(out), {a, b}, [=](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    const double* g = self.grad.data();
    if (wants(self, 0)) {
      // dA = G·op(B)ᵀ, transposed back when A was used transposed.
      Tensor ga(av.shape());
      if (!trans_a) {
        kernels::gemm(false, !trans_b, m, k, n, g, bv.data(), ga.data(), false);
      } else {
        kernels::gemm(trans_b, true, k, m, n, bv.data(), g, ga.data(), false);
      }
      self.inputs[0]->accumulate(ga);
    }
    if (wants(self, 1)) {
      // dB = op(A)ᵀ·G, transposed back when B was used transposed.
      Tensor gb(bv.shape());
      if (!trans_b) {
        kernels::gemm(!trans_a, false, k, n, m, av.data(), g, gb.data(), false);
      } else {
        kernels::gemm(true, trans_a, n, k, m, g, av.data(), gb.data(), false);
      }
      self.inputs[1]->accumulate(gb);
    }
  });
}

Var transpose(const Var& x) {
  require_rank(x, 2, "transpose");
  const Index r = x.dim(0), c = x.dim(1);
  Tensor out({c, r});
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) out.at(j, i) = x.value().at(i, j);
  return make_op(std::move(out), {x}, [r, c](Node& self) {
    Tensor g({r, c});
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) g.at(i, j) = self.grad.at(j, i);
    self.inputs[0]->accumulate(g);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Var y = matmul(x, weight, false, true);
  return bias.defined() ? add_row_vector(y, bias) : y;
}

Var add_row_vector(const Var& x, const Var& v) {
  require_rank(x, 2, "add_row_vector");
  const Index rows = x.dim(0), cols = x.dim(1);
  if (v.numel() != cols) throw ShapeError("add_row_vector: vector length " + std::to_string(v.numel()) +
                                          " vs " + std::to_string(cols) + " columns");
  Tensor out = x.value();
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out.at(i, j) += v.value()[j];
  return make_op(std::move(out), {x, v}, [rows, cols](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    if (wants(self, 1)) {
      Tensor g(self.inputs[1]->value.shape());
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) g[j] += self.grad.at(i, j);
      self.inputs[1]->accumulate(g);
    }
  });
}

Var affine_cols(const Var& x, const Var& gamma, const Var& beta) {
  require_rank(x, 2, "affine_cols");
  const Index rows = x.dim(0), cols = x.dim(1);
  if (gamma.numel() != cols || beta.numel() != cols) throw ShapeError("affine_cols: parameter length mismatch");
  Tensor out(x.shape());
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out.at(i, j) = x.value().at(i, j) * gamma.value()[j] + beta.value()[j];
  return make_op(std::move(out), {x, gamma, beta}, [rows, cols](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& gv = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor g(xv.shape());
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) g.at(i, j) = self.grad.at(i, j) * gv[j];
      self.inputs[0]->accumulate(g);
    }
    if (wants(self, 1) || wants(self, 2)) {
      Tensor gg(gv.shape()), gb(gv.shape());
      for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
          gg[j] += self.grad.at(i, j) * xv.at(i, j);
          gb[j] += self.grad.at(i, j);
        }
      }
      self.inputs[1]->accumulate(gg);
      self.inputs[2]->accumulate(gb);
    }
  });
}

Var affine_rows(const Var& x, const Var& gamma, const Var& beta) {
  const Index rows = leading(x.value()), cols = trailing(x.value());
  if (gamma.numel() != rows || beta.numel() != rows) throw ShapeError("affine_rows: parameter length mismatch");
  Tensor out(x.shape());
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      out[i * cols + j] = x.value()[i * cols + j] * gamma.value()[i] + beta.value()[i];
  return make_op(std::move(out), {x, gamma, beta}, [rows, cols](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& gv = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor g(xv.shape());
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) g[i * cols + j] = self.grad[i * cols + j] * gv[i];
      self.inputs[0]->accumulate(g);
    }
    if (wants(self, 1) || wants(self, 2)) {
      Tensor gg(gv.shape()), gb(gv.shape());
      for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
          gg[i] += self.grad[i * cols + j] * xv[i * cols + j];
          gb[i] += self.grad[i * cols + j];
        }
      }
      self.inputs[1]->accumulate(gg);
      self.inputs[2]->accumulate(gb);
    }
  });
}

Var softmax_rows(const Var& x) {
  require_rank(x, 2, "softmax_rows");
  const Index rows = x.dim(0), cols = x.dim(1);
  Tensor out(x.shape());
  kernels::softmax_rows_forward(rows, cols, x.value().data(), out.data());
  return make_op(std::move(out), {x}, [rows, cols](Node& self) {
    Tensor g(self.value.shape());
    kernels::softmax_rows_backward(rows, cols, self.value.data(), self.grad.data(), g.data());
    self.inputs[0]->accumulate(g);
  });
}

Var normalize_rows(const Var& x, double eps) {
  const Index rows = leading(x.value()), cols = trailing(x.value());
  if (cols == 0) throw ShapeError("normalize_rows: empty rows");
  Tensor out(x.shape());
  std::vector<double> mean(static_cast<std::size_t>(rows)), rstd(static_cast<std::size_t>(rows));
  kernels::normalize_rows_forward(rows, cols, eps, x.value().data(), out.data(), mean.data(), rstd.data());
  return make_op(std::move(out), {x}, [rows, cols, rstd = std::move(rstd)](Node& self) {
    Tensor g(self.value.shape());
    kernels::normalize_rows_backward(rows, cols, self.value.data(), rstd.data(), self.grad.data(), g.data());
    self.inputs[0]->accumulate(g);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_rank(x, 2, "layer_norm");
  return affine_cols(normalize_rows(x, eps), gamma, beta);
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_rank(x, 3, "instance_norm");
  return affine_rows(normalize_rows(x, eps), gamma, beta);
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [](Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Var concat0(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat0 of nothing");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ShapeError("concat0 needs rank >= 1");
  const Shape tail(shape.begin() + 1, shape.end());
  Index total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.empty() || Shape(s.begin() + 1, s.end()) != tail) {
      throw ShapeError("concat0: incompatible part " + to_string(s) + " with " + to_string(shape));
    }
    total += s[0];
  }
  shape[0] = total;
  Tensor out(shape);
  std::vector<Index> offsets;
  Index off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    std::copy(p.value().data(), p.value().data() + p.numel(), out.data() + off);
    off += p.numel();
  }
  return make_op(std::move(out), parts, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      if (!wants(self, i)) continue;
      const Tensor& v = self.inputs[i]->value;
      Tensor g(v.shape());
      std::copy(self.grad.data() + offsets[i], self.grad.data() + offsets[i] + v.numel(), g.data());
      self.inputs[i]->accumulate(g);
    }
  });
}

Var slice0(const Var& x, Index begin, Index end) {
  const Shape& s = x.shape();
  if (s.empty() || begin < 0 || end > s[0] || begin > end) {
    throw ShapeError("slice0 [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " + to_string(s));
  }
  const Index row = trailing(x.value());
  Shape shape = s;
  shape[0] = end - begin;
  Tensor out(shape);
  std::copy(x.value().data() + begin * row, x.value().data() + end * row, out.data());
  return make_op(std::move(out), {x}, [begin, row](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    std::copy(self.grad.data(), self.grad.data() + self.grad.numel(), g.data() + begin * row);
    self.inputs[0]->accumulate(g);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const Index rows = parts.front().dim(0);
  Index cols = 0;
  for (const Var& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.dim(1);
  }
  Tensor out({rows, cols});
  Index off = 0;
  std::vector<Index> offsets;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const Index pc = p.dim(1);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < pc; ++j) out.at(i, off + j) = p.value().at(i, j);
    off += pc;
  }
  return make_op(std::move(out), parts, [rows, offsets = std::move(offsets)](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      if (!wants(self, k)) continue;
      const Index pc = self.inputs[k]->value.dim(1);
      Tensor g({rows, pc});
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < pc; ++j) g.at(i, j) = self.grad.at(i, offsets[k] + j);
      self.inputs[k]->accumulate(g);
    }
  });
}

Var slice_cols(const Var& x, Index begin, Index end) {
  require_rank(x, 2, "slice_cols");
  const Index rows = x.dim(0);
  if (begin < 0 || end > x.dim(1) || begin > end) throw ShapeError("slice_cols out of range");
  const Index w = end - begin;
  Tensor out({rows, w});
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < w; ++j) out.at(i, j) = x.value().at(i, begin + j);
  return make_op(std::move(out), {x}, [rows, begin, w](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < w; ++j) g.at(i, begin + j) = self.grad.at(i, j);
    self.inputs[0]->accumulate(g);
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, Index stride, Index pad, Index groups) {
  require_rank(x, 3, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  kernels::Conv2dGeometry g;
  g.in_channels = x.dim(0);
  g.in_h = x.dim(1);
  g.in_w = x.dim(2);
  g.out_channels = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = stride;
  g.pad = pad;
  g.groups = groups;
  if (groups < 1 || g.in_channels % groups || g.out_channels % groups || weight.dim(1) != g.in_channels / groups ||
      weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()) + " (groups " + std::to_string(groups) + ")");
  }
  if (bias.defined() && bias.numel() != g.out_channels) throw ShapeError("conv2d: bias length mismatch");
  if (g.out_h() < 1 || g.out_w() < 1) throw ShapeError("conv2d: input " + to_string(x.shape()) + " too small");
  Tensor out({g.out_channels, g.out_h(), g.out_w()});
  kernels::conv2d_forward(g, x.value().data(), weight.value().data(),
                          bias.defined() ? bias.value().data() : nullptr, out.data());
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_op(std::move(out), std::move(inputs), [g](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& wv = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor gx(xv.shape());
      kernels::conv2d_backward_input(g, self.grad.data(), wv.data(), gx.data());
      self.inputs[0]->accumulate(gx);
    }
    const bool has_bias = self.inputs.size() > 2;
    const bool want_b = has_bias && wants(self, 2);
    if (wants(self, 1) || want_b) {
      Tensor gw(wv.shape());
      Tensor gb({g.out_channels});
      kernels::conv2d_backward_weight(g, self.grad.data(), xv.data(), gw.data(), want_b ? gb.data() : nullptr);
      self.inputs[1]->accumulate(gw);
      if (want_b) self.inputs[2]->accumulate(gb);
    }
  });
}

Var bilinear_resize(const Var& x, Index out_h, Index out_w) {
  require_rank(x, 3, "bilinear_resize");
  const Index c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
  if (out_h < 1 || out_w < 1 || ih < 1 || iw < 1) throw ShapeError("bilinear_resize: empty extent");
  if (ih == out_h && iw == out_w) return x;
  Tensor out({c, out_h, out_w});
  kernels::bilinear_forward(c, ih, iw, out_h, out_w, x.value().data(), out.data());
  return make_op(std::move(out), {x}, [=](Node& self) {
    Tensor g({c, ih, iw});
    kernels::bilinear_backward(c, ih, iw, out_h, out_w, self.grad.data(), g.data());
    self.inputs[0]->accumulate(g);
  });
}

}  // namespace uranker::ag
