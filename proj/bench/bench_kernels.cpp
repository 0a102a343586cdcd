#include <benchmark/benchmark.h>

#include <vector>

#include "uranker/kernels.hpp"
#include "uranker/nn.hpp"
#include "uranker/uranker_model.hpp"

using namespace uranker;
namespace k = uranker::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

template <bool Parallel>
void BM_gemm(benchmark::State& st) {
  const Index n = st.range(0);
  auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : st) {
    if constexpr (Parallel) {
      k::parallel::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    } else {
      k::serial::gemm(false, false, n, n, n, a.data(), b.data(), c.data(), false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(st.iterations() * 2 * n * n * n);
}

k::Conv2dGeometry conv_geometry(Index side) {
  k::Conv2dGeometry g;
  g.in_channels = 32;
  g.out_channels = 32;
  g.in_h = g.in_w = side;
  g.kernel = 3;
  g.pad = 1;
  return g;
}

template <bool Parallel>
void BM_conv2d_forward(benchmark::State& st) {
  const auto g = conv_geometry(st.range(0));
  auto in = random_vec(g.in_channels * g.in_h * g.in_w, 3);
  auto w = random_vec(g.out_channels * g.in_per_group() * 9, 4);
  auto bias = random_vec(g.out_channels, 5);
  std::vector<double> out(g.out_channels * g.out_h() * g.out_w());
  for (auto _ : st) {
    if constexpr (Parallel) {
      k::parallel::conv2d_forward(g, in.data(), w.data(), bias.data(), out.data());
    } else {
      k::serial::conv2d_forward(g, in.data(), w.data(), bias.data(), out.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_conv2d_backward(benchmark::State& st) {
  const auto g = conv_geometry(st.range(0));
  auto in = random_vec(g.in_channels * g.in_h * g.in_w, 3);
  auto w = random_vec(g.out_channels * g.in_per_group() * 9, 4);
  auto gout = random_vec(g.out_channels * g.out_h() * g.out_w(), 6);
  std::vector<double> gin(in.size()), gw(w.size()), gb(g.out_channels);
  for (auto _ : st) {
    if constexpr (Parallel) {
      k::parallel::conv2d_backward_input(g, gout.data(), w.data(), gin.data());
      k::parallel::conv2d_backward_weight(g, gout.data(), in.data(), gw.data(), gb.data());
    } else {
      k::serial::conv2d_backward_input(g, gout.data(), w.data(), gin.data());
      k::serial::conv2d_backward_weight(g, gout.data(), in.data(), gw.data(), gb.data());
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void BM_bilinear(benchmark::State& st) {
  const Index side = st.range(0);
  auto in = random_vec(32 * side * side, 7);
  std::vector<double> out(32 * side * side / 4);
  for (auto _ : st) {
    if constexpr (Parallel) {
      k::parallel::bilinear_forward(32, side, side, side / 2, side / 2, in.data(), out.data());
    } else {
      k::serial::bilinear_forward(32, side, side, side / 2, side / 2, in.data(), out.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_softmax(benchmark::State& st) {
  const Index n = st.range(0);
  auto x = random_vec(n * n, 8);
  std::vector<double> y(n * n);
  for (auto _ : st) {
    if constexpr (Parallel) {
      k::parallel::softmax_rows_forward(n, n, x.data(), y.data());
    } else {
      k::serial::softmax_rows_forward(n, n, x.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_ssim_filter(benchmark::State& st) {
  const Index side = st.range(0);
  auto in = random_vec(3 * side * side, 9);
  auto taps = random_vec(11, 10);
  std::vector<double> out(3 * (side - 10) * (side - 10));
  for (auto _ : st) {
    if constexpr (Parallel) {
      k::parallel::separable_filter_valid(3, side, side, in.data(), taps.data(), 11, out.data());
    } else {
      k::serial::separable_filter_valid(3, side, side, in.data(), taps.data(), 11, out.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_uranker_toy_step(benchmark::State& st) {
  k::set_backend(Parallel ? k::Backend::Parallel : k::Backend::Serial);
  core::URanker model(core::URankerConfig::toy(), 1);
  nn::Rng rng(11);
  Tensor img({3, st.range(0), st.range(0)});
  for (double& v : img.values()) v = rng.uniform();
  for (auto _ : st) {
    ag::Var x(img, true);
    model.forward(x).backward();
    benchmark::DoNotOptimize(x.grad().data());
  }
  k::set_backend(k::Backend::Parallel);
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_conv2d_forward<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_conv2d_forward<true>)->Arg(32)->Arg(64);
BENCHMARK(BM_conv2d_backward<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_conv2d_backward<true>)->Arg(32)->Arg(64);
BENCHMARK(BM_bilinear<false>)->Arg(128);
BENCHMARK(BM_bilinear<true>)->Arg(128);
BENCHMARK(BM_softmax<false>)->Arg(256);
BENCHMARK(BM_softmax<true>)->Arg(256);
BENCHMARK(BM_ssim_filter<false>)->Arg(256);
BENCHMARK(BM_ssim_filter<true>)->Arg(256);
BENCHMARK(BM_uranker_toy_step<false>)->Arg(32);
BENCHMARK(BM_uranker_toy_step<true>)->Arg(32);

BENCHMARK_MAIN();
