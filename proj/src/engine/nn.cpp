#include "uranker/nn.hpp"

#include <cmath>
#include <numbers>

#include "uranker/errors.hpp"

namespace uranker::nn {

std::uint64_t Rng::next_u64() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::trunc_normal(double stddev) {
  for (;;) {
    const double z = normal();
    if (std::abs(z) <= 2.0) return z * stddev;
  }
}

Index Rng::below(Index n) {
  if (n <= 0) throw InvalidInput("Rng::below needs a positive bound");
  return static_cast<Index>(next_u64() % static_cast<std::uint64_t>(n));
}

Rng Rng::fork(std::uint64_t salt) const {
  Rng r(state_ ^ (salt * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  r.next_u64();
  return r;
}

Tensor trunc_normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.trunc_normal(stddev);
  return t;
}

NamedParams Module::named_parameters() const {
  NamedParams out;
  collect_parameters("", out);
  return out;
}

std::vector<Var> Module::parameters() const {
  std::vector<Var> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

Index Module::parameter_count() const {
  Index n = 0;
  for (auto& [name, p] : named_parameters()) n += p.numel();
  return n;
}

void Module::set_requires_grad(bool on) const {
  for (auto& [name, p] : named_parameters()) p.set_requires_grad(on);
}

void Module::zero_grad() const {
  for (auto& [name, p] : named_parameters()) p.zero_grad();
}

Linear::Linear(Index in, Index out, Rng& rng, bool with_bias)
    : weight(trunc_normal_tensor({out, in}, 0.02, rng), true) {
  if (with_bias) bias = Var(Tensor({out}, 0.0), true);
}

void Linear::collect_parameters(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + "weight", weight);
  if (bias.defined()) out.emplace_back(prefix + "bias", bias);
}

Conv2d::Conv2d(Index in, Index out, Index kernel, Index stride, Index pad, Rng& rng, Index groups, bool with_bias)
    : stride_(stride), pad_(pad), groups_(groups) {
  if (in % groups || out % groups) throw ConfigError("conv channels not divisible by groups");
  // He-normal on fan-out, as the usual vision-transformer initialisers do.
  const double fan_out = static_cast<double>(kernel * kernel * out / groups);
  Tensor w({out, in / groups, kernel, kernel});
  const double stddev = std::sqrt(2.0 / fan_out);
  for (double& v : w.values()) v = rng.normal() * stddev;
  weight = Var(std::move(w), true);
  if (with_bias) bias = Var(Tensor({out}, 0.0), true);
}

void Conv2d::collect_parameters(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + "weight", weight);
  if (bias.defined()) out.emplace_back(prefix + "bias", bias);
}

LayerNorm::LayerNorm(Index channels, double eps)
    : gamma(Tensor({channels}, 1.0), true), beta(Tensor({channels}, 0.0), true), eps_(eps) {}

void LayerNorm::collect_parameters(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + "gamma", gamma);
  out.emplace_back(prefix + "beta", beta);
}

InstanceNorm2d::InstanceNorm2d(Index channels, double eps)
    : gamma(Tensor({channels}, 1.0), true), beta(Tensor({channels}, 0.0), true), eps_(eps) {}

void InstanceNorm2d::collect_parameters(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + "gamma", gamma);
  out.emplace_back(prefix + "beta", beta);
}

Adam::Adam(std::vector<Var> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const Var& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (!p.has_grad()) continue;
    const Tensor& g = p.grad();
    Tensor& w = p.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (Index j = 0; j < w.numel(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Var& p : params_) p.zero_grad();
}

}  // namespace uranker::nn
