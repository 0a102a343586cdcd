#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_support.hpp"
#include "uranker/errors.hpp"
#include "uranker/metrics.hpp"

using namespace uranker;
using namespace uranker::metrics;

namespace {

// Concordance by enumerating every pair; tau-b denominator written out.
double brute_kendall(const std::vector<double>& s, const std::vector<int>& r) {
  double c = 0, d = 0, ties = 0, n0 = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j <= i) continue;
      n0 += 1;
      const bool i_pred_better = s[i] > s[j];
      const bool i_true_better = r[i] < r[j];
      if (s[i] == s[j]) ties += 1;
      else if (i_pred_better == i_true_better) c += 1;
      else d += 1;
    }
  return (n0 - ties) == 0 ? 0.0 : (c - d) / std::sqrt((n0 - ties) * n0);
}

double closed_form_spearman(const std::vector<double>& s, const std::vector<int>& r) {
  const std::size_t k = s.size();
  double d2 = 0;
  for (std::size_t i = 0; i < k; ++i) {
    int pos = 1;
    for (std::size_t j = 0; j < k; ++j) pos += s[j] > s[i] ? 1 : 0;
    d2 += (pos - r[i]) * (pos - r[i]);
  }
  const double kk = static_cast<double>(k);
  return 1.0 - 6.0 * d2 / (kk * (kk * kk - 1.0));
}

std::vector<int> random_ranks(std::size_t k, nn::Rng& rng) {
  std::vector<int> r(k);
  std::iota(r.begin(), r.end(), 1);
  rng.shuffle(r.begin(), r.end());
  return r;
}

// Direct windowed SSIM with an explicit 2-D Gaussian, no separable shortcut.
double direct_ssim(const Tensor& a, const Tensor& b, Index win) {
  const auto g = gaussian_taps(win, 1.5);
  const double c1 = 1e-4, c2 = 9e-4;
  const Index ch = a.dim(0), h = a.dim(1), w = a.dim(2);
  double total = 0;
  Index count = 0;
  for (Index c = 0; c < ch; ++c)
    for (Index y = 0; y + win <= h; ++y)
      for (Index x = 0; x + win <= w; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (Index u = 0; u < win; ++u)
          for (Index v = 0; v < win; ++v) {
            const double k = g[u] * g[v];
            const double pa = a.at(c, y + u, x + v), pb = b.at(c, y + u, x + v);
            ma += k * pa;
            mb += k * pb;
            saa += k * pa * pa;
            sbb += k * pb * pb;
            sab += k * pa * pb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cv = sab - ma * mb;
        total += (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

}  // namespace

TEST_SUITE("srcc") {
  TEST_CASE("examples") {
    CHECK(srcc({3, 2, 1}, {1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(srcc({1, 2, 3}, {1, 2, 3}) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(srcc({0.9, 0.1, 0.5}, {1, 3, 2}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(srcc({0.9, 0.1, 0.5}, {1, 2, 3}) == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("tie-free inputs match the closed form to 1e-12") {
    nn::Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t k = 2 + static_cast<std::size_t>(rng.below(15));
      std::vector<double> s(k);
      for (double& v : s) v = rng.normal();
      const auto r = random_ranks(k, rng);
      CHECK(std::abs(srcc(s, r) - closed_form_spearman(s, r)) < 1e-12);
    }
  }

  TEST_CASE("ties take the average rank") {
    CHECK(descending_ranks({5, 1, 5, 3}) == std::vector<double>{1.5, 4, 1.5, 3});
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(srcc({1.0}, {1}), InvalidInput);
    CHECK_THROWS_AS(srcc({1.0, 2.0}, {1, 1}), InvalidInput);
    CHECK_THROWS_AS(srcc({1.0, 2.0}, {1, 2, 3}), InvalidInput);
    CHECK_THROWS_AS(srcc({1.0, 2.0}, {0, 1}), InvalidInput);
  }
}

TEST_SUITE("krcc") {
  TEST_CASE("examples") {
    CHECK(krcc({3, 2, 1}, {1, 2, 3}) == 1.0);
    CHECK(krcc({1, 2, 3}, {1, 2, 3}) == -1.0);
    CHECK(krcc({3, 1, 2}, {1, 2, 3}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(krcc({0.5, 0.5, 0.5, 0.5}, {1, 2, 3, 4}) == 0.0);
  }

  TEST_CASE("brute-force pair enumeration for K <= 6, with and without ties") {
    nn::Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t k = 2 + static_cast<std::size_t>(rng.below(5));
      std::vector<double> s(k);
      const bool tied = trial % 2 == 1;
      for (double& v : s) v = tied ? static_cast<double>(rng.below(3)) : rng.normal();
      const auto r = random_ranks(k, rng);
      CHECK(krcc(s, r) == doctest::Approx(brute_kendall(s, r)).epsilon(1e-14));
    }
  }
}

TEST_CASE("rank metrics are invariant to strictly increasing score transforms") {
  nn::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.below(9));
    std::vector<double> s(k), t(k);
    for (double& v : s) v = rng.normal();
    for (std::size_t i = 0; i < k; ++i) t[i] = std::exp(3.0 * s[i]) + 7.0;
    const auto r = random_ranks(k, rng);
    CHECK(srcc(s, r) == srcc(t, r));
    CHECK(krcc(s, r) == krcc(t, r));
  }
}

TEST_CASE("group aggregation averages per-group coefficients and skips singletons") {
  std::vector<GroupPrediction> g{{{3, 2, 1}, {1, 2, 3}}, {{1, 2, 3}, {1, 2, 3}}, {{0.4}, {1}}};
  const RankAgreement a = mean_group_agreement(g);
  CHECK(a.groups == 2);
  CHECK(a.skipped == 1);
  CHECK(a.srcc == 0.0);
  CHECK(a.krcc == 0.0);
  CHECK_THROWS_AS(mean_group_agreement({{{1.0}, {1}}}), InvalidInput);
}

TEST_SUITE("psnr") {
  TEST_CASE("identical images hit the cap") {
    Tensor a({3, 4, 4}, 0.3);
    CHECK(psnr(a, a) == kPsnrCap);
  }

  TEST_CASE("uniform 0.1 offset gives 20 dB") {
    nn::Rng rng(4);
    Tensor a = testing::random_tensor({3, 16, 16}, rng, 0.0, 0.9);
    Tensor b = a;
    for (double& v : b.values()) v += 0.1;
    const double p = psnr(b, a);
    CHECK(std::abs(p - 20.0) < 1e-12);
  }

  TEST_CASE("shape mismatch") {
    CHECK_THROWS_AS(psnr(Tensor({3, 2, 2}), Tensor({3, 2, 3})), ShapeError);
  }
}

TEST_SUITE("ssim") {
  TEST_CASE("identical images give exactly one; ssim is symmetric") {
    nn::Rng rng(5);
    Tensor a = testing::random_tensor({3, 20, 17}, rng, 0, 1);
    Tensor b = testing::random_tensor({3, 20, 17}, rng, 0, 1);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  }

  TEST_CASE("matches a direct 2-D windowed computation") {
    nn::Rng rng(6);
    Tensor a = testing::random_tensor({3, 15, 14}, rng, 0, 1);
    Tensor b = testing::random_tensor({3, 15, 14}, rng, 0, 1);
    CHECK(ssim(a, b) == doctest::Approx(direct_ssim(a, b, 11)).epsilon(1e-12));
    Tensor sa = testing::random_tensor({3, 6, 8}, rng, 0, 1);
    Tensor sb = testing::random_tensor({3, 6, 8}, rng, 0, 1);
    CHECK(ssim(sa, sb) == doctest::Approx(direct_ssim(sa, sb, 5)).epsilon(1e-12));
  }

  TEST_CASE("constant black vs white has the closed form C1/(1+C1)") {
    const double c1 = 1e-4;
    const double v = ssim(Tensor({3, 12, 12}, 0.0), Tensor({3, 12, 12}, 1.0));
    CHECK(v == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-12));
    CHECK(v < 1e-3);
  }
}
