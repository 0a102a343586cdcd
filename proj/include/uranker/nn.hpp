#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uranker/autograd.hpp"
#include "uranker/ops.hpp"

namespace uranker::nn {

using ag::Var;

/// Seeded generator with platform-independent draws (std distributions are
/// implementation-defined, which would break cross-build reproducibility).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}
  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  double trunc_normal(double stddev);     // truncated at ±2σ
  Index below(Index n);                   // uniform in [0, n)
  /// Independent stream derived from this one, for sub-components.
  Rng fork(std::uint64_t salt) const;

  template <class It>
  void shuffle(It first, It last) {
    for (auto n = last - first; n > 1; --n) {
      std::swap(first[n - 1], first[below(static_cast<Index>(n))]);
    }
  }

 private:
  std::uint64_t state_;
};

using NamedParams = std::vector<std::pair<std::string, Var>>;

class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  Module(Module&&) = default;
  Module& operator=(Module&&) = default;

  /// Appends every trainable tensor under `prefix`.
  virtual void collect_parameters(const std::string& prefix, NamedParams& out) const = 0;

  NamedParams named_parameters() const;
  std::vector<Var> parameters() const;
  Index parameter_count() const;
  void set_requires_grad(bool on) const;
  void zero_grad() const;
};

class Linear : public Module {
 public:
  Linear() = default;
  Linear(Index in, Index out, Rng& rng, bool bias = true);
  Var forward(const Var& x) const { return ag::linear(x, weight, bias); }
  void collect_parameters(const std::string& prefix, NamedParams& out) const override;

  Var weight;  // out × in
  Var bias;    // out, may be undefined
};

class Conv2d : public Module {
 public:
  Conv2d() = default;
  Conv2d(Index in, Index out, Index kernel, Index stride, Index pad, Rng& rng, Index groups = 1, bool bias = true);
  Var forward(const Var& x) const { return ag::conv2d(x, weight, bias, stride_, pad_, groups_); }
  void collect_parameters(const std::string& prefix, NamedParams& out) const override;

  Index stride() const { return stride_; }
  Var weight;
  Var bias;

 private:
  Index stride_ = 1, pad_ = 0, groups_ = 1;
};

/// Normalises each token (row) of an N×C sequence.
class LayerNorm : public Module {
 public:
  LayerNorm() = default;
  explicit LayerNorm(Index channels, double eps = 1e-6);
  Var forward(const Var& x) const { return ag::layer_norm(x, gamma, beta, eps_); }
  void collect_parameters(const std::string& prefix, NamedParams& out) const override;

  Var gamma, beta;

 private:
  double eps_ = 1e-6;
};

class InstanceNorm2d : public Module {
 public:
  InstanceNorm2d() = default;
  explicit InstanceNorm2d(Index channels, double eps = 1e-5);
  Var forward(const Var& x) const { return ag::instance_norm(x, gamma, beta, eps_); }
  void collect_parameters(const std::string& prefix, NamedParams& out) const override;

  Var gamma, beta;

 private:
  double eps_ = 1e-5;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Var> params, AdamOptions options);
  /// Applies one update from the accumulated gradients; parameters without
  /// a gradient are left untouched.
  void step();
  void zero_grad();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  AdamOptions options_;
  long step_count_ = 0;
};

Tensor trunc_normal_tensor(Shape shape, double stddev, Rng& rng);

}  // namespace uranker::nn
