#include <algorithm>
#include <cmath>

#include "uranker/errors.hpp"
#include "uranker/uie.hpp"

namespace uranker::uie {

namespace {

void check_image(const Tensor& t) {
  if (t.rank() != 3 || t.numel() == 0) throw ShapeError("tail expects a non-empty C×H×W tensor, got " + to_string(t.shape()));
}

struct ChannelStats {
  bool overflow = false;
  double lo = 0.0, hi = 0.0;
  Index arg_lo = 0, arg_hi = 0;
};

ChannelStats stats(const double* p, Index n) {
  ChannelStats s;
  s.lo = s.hi = p[0];
  for (Index i = 1; i < n; ++i) {
    if (p[i] < s.lo) s.lo = p[i], s.arg_lo = i;
    if (p[i] > s.hi) s.hi = p[i], s.arg_hi = i;
  }
  s.overflow = s.lo < 0.0 || s.hi > 1.0;
  return s;
}

}  // namespace

Tensor normalization_tail(const Tensor& image, double delta) {
  return normalization_tail(Var(image), delta).value();
}

Var normalization_tail(const Var& image, double delta) {
  const Tensor& x = image.value();
  check_image(x);
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw InvalidInput("normalization tail needs finite values");
  }
  const Index c = x.dim(0), n = x.dim(1) * x.dim(2);
  std::vector<ChannelStats> st(static_cast<std::size_t>(c));
  Tensor y = x;
  for (Index ch = 0; ch < c; ++ch) {
    ChannelStats& s = st[static_cast<std::size_t>(ch)];
    s = stats(x.data() + ch * n, n);
    if (!s.overflow) continue;
    const double d = s.hi - s.lo + delta;
    double* p = y.data() + ch * n;
    for (Index i = 0; i < n; ++i) p[i] = (p[i] - s.lo) / d;
  }
  return ag::make_op(std::move(y), {image}, [st, c, n, delta](ag::Node& self) {
    const Tensor& x = self.inputs[0]->value;
    Tensor g = self.grad;
    for (Index ch = 0; ch < c; ++ch) {
      const ChannelStats& s = st[static_cast<std::size_t>(ch)];
      if (!s.overflow) continue;
      const double d = s.hi - s.lo + delta;
      const double* xp = x.data() + ch * n;
      double* gp = g.data() + ch * n;
      // y_i = (x_i − lo) / (hi − lo + δ); lo and hi are the arg-min / arg-max entries
      double d_lo = 0.0, d_hi = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double gy = self.grad[ch * n + i];
        const double t = (xp[i] - s.lo) / (d * d);
        d_lo += gy * (t - 1.0 / d);
        d_hi -= gy * t;
        gp[i] = gy / d;
      }
      gp[s.arg_lo] += d_lo;
      gp[s.arg_hi] += d_hi;
    }
    self.inputs[0]->accumulate(g);
  });
}

std::string to_string(TailKind t) {
  switch (t) {
    case TailKind::Normalize: return "normalize";
    case TailKind::None: return "none";
    case TailKind::Sigmoid: return "sigmoid";
    case TailKind::Clip: return "clip";
    case TailKind::InstanceNormSigmoid: return "in-sigmoid";
    case TailKind::InstanceNormClip: return "in-clip";
  }
  return "?";
}

TailKind parse_tail_kind(const std::string& s) {
  for (TailKind t : {TailKind::Normalize, TailKind::None, TailKind::Sigmoid, TailKind::Clip,
                     TailKind::InstanceNormSigmoid, TailKind::InstanceNormClip}) {
    if (s == to_string(t)) return t;
  }
  throw ConfigError("unknown tail '" + s + "' (normalize, none, sigmoid, clip, in-sigmoid, in-clip)");
}

Var apply_tail(const Var& x, TailKind kind) {
  auto plain_in = [&](const Var& v) {
    const Index ch = v.dim(0);
    return ag::instance_norm(v, Var(Tensor({ch}, 1.0)), Var(Tensor({ch}, 0.0)));
  };
  switch (kind) {
    case TailKind::Normalize: return normalization_tail(x);
    case TailKind::None: return x;
    case TailKind::Sigmoid: return ag::sigmoid(x);
    case TailKind::Clip: return ag::clamp(x, 0.0, 1.0);
    case TailKind::InstanceNormSigmoid: return ag::sigmoid(plain_in(x));
    case TailKind::InstanceNormClip: return ag::clamp(plain_in(x), 0.0, 1.0);
  }
  return x;
}

}  // namespace uranker::uie
