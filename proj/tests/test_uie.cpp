#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "test_support.hpp"
#include "uranker/dataset.hpp"
#include "uranker/errors.hpp"
#include "uranker/uie.hpp"

using namespace uranker;
using namespace uranker::uie;
using ag::Var;

namespace {

Tensor channel_image(const std::vector<double>& v) {
  Tensor t({3, 1, static_cast<Index>(v.size())}, 0.5);
  for (std::size_t i = 0; i < v.size(); ++i) t.at(0, 0, static_cast<Index>(i)) = v[i];
  return t;
}

core::URanker constant_ranker(double bias) {
  core::URanker r(core::URankerConfig::toy(), 1);
  for (auto& h : r.score_heads()) {
    h.weight.mutable_value().fill(0.0);
    h.bias.mutable_value().fill(bias);
  }
  return r;
}

void zero_residual(NU2Net& net) {
  net.output_conv().weight.mutable_value().fill(0.0);
  net.output_conv().bias.mutable_value().fill(0.0);
}

ImagePairs toy_pairs(int n, Index size, std::uint64_t seed) {
  ImagePairs p;
  for (int i = 0; i < n; ++i) p.push_back(data::synth_uie_pair(size, seed + static_cast<std::uint64_t>(i)));
  return p;
}

}  // namespace

TEST_SUITE("normalization_tail") {
  TEST_CASE("examples") {
    const Tensor out = normalization_tail(channel_image({-0.2, 0.4, 1.1}));
    CHECK(out.at(0, 0, 0) == 0.0);
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.6 / 1.3).epsilon(1e-7));
    CHECK(out.at(0, 0, 2) == doctest::Approx(1.0).epsilon(1e-7));
    // untouched channels
    CHECK(out.at(1, 0, 1) == 0.5);

    const Tensor inside = channel_image({0.0, 0.3, 1.0});
    CHECK(normalization_tail(inside) == inside);

    const Tensor flat = normalization_tail(Tensor({3, 2, 2}, 2.0));
    for (double v : flat.values()) CHECK(v == 0.0);
  }

  TEST_CASE("idempotent, in range, fixed points and order preserving on 1000 random channels") {
    nn::Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
      const Index n = 1 + rng.below(40);
      Tensor x({1, 1, n});
      const int kind = trial % 6;
      for (double& v : x.values()) {
        switch (kind) {
          case 0: v = rng.uniform(0, 1); break;          // overflow-free
          case 1: v = rng.uniform(-2, 0.5); break;       // negative side
          case 2: v = rng.uniform(0.5, 3); break;        // above one
          case 3: v = rng.uniform(-1, 2); break;         // both sides
          case 4: v = 1.7; break;                        // constant, overflowing
          default: v = 0.25; break;                      // constant, in range
        }
      }
      if (kind == 1) x[0] = -0.01;  // ensure the overflow really happens
      if (kind == 2) x[0] = 1.01;
      const Tensor y = normalization_tail(x);
      CHECK(normalization_tail(y) == y);
      for (double v : y.values()) CHECK((v >= 0.0 && v <= 1.0));
      if (kind == 0 || kind == 5) CHECK(y == x);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
          if (x[i] < x[j]) CHECK(y[i] <= y[j]);
          if (x[i] < x[j] && kind != 4) CHECK(y[i] < y[j]);
        }
    }
  }

  TEST_CASE("gradient matches finite differences away from switching points") {
    nn::Rng rng(2);
    Tensor x = testing::random_tensor({3, 4, 4}, rng, -0.5, 1.5);
    x[3] = 0.4;  // keep channel 0 strictly in range
    for (Index i = 0; i < 16; ++i) x[i] = 0.1 + 0.05 * static_cast<double>(i);
    CHECK(testing::gradient_check(testing::probe_sum(rng, x.shape(), [](const Var& v) { return normalization_tail(v); }), x,
                                  1e-6) < 1e-6);
  }

  TEST_CASE("non-finite input is rejected; tail names round trip") {
    Tensor x({3, 1, 1}, 0.5);
    x[0] = INFINITY;
    CHECK_THROWS_AS(normalization_tail(x), InvalidInput);
    for (auto t : {TailKind::Normalize, TailKind::None, TailKind::Sigmoid, TailKind::Clip,
                   TailKind::InstanceNormSigmoid, TailKind::InstanceNormClip})
      CHECK(parse_tail_kind(to_string(t)) == t);
    CHECK_THROWS_AS(parse_tail_kind("tanh"), ConfigError);
  }
}

TEST_SUITE("nu2net_forward") {
  TEST_CASE("zero residual branch on an in-range input is the identity") {
    NU2Net net(NU2NetConfig::toy(), 3);
    zero_residual(net);
    nn::Rng rng(3);
    const Tensor img = testing::random_tensor({3, 16, 24}, rng, 0, 1);
    CHECK(net.forward(Var(img)).value() == img);
    CHECK(net.enhance(img) == img);
  }

  TEST_CASE("outputs stay in [0,1] for arbitrary inputs and weights") {
    nn::Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
      NU2Net net(NU2NetConfig::toy(), static_cast<std::uint64_t>(trial));
      for (auto& p : net.parameters())
        for (double& v : p.mutable_value().values()) v *= rng.uniform(0.5, 20.0);
      const Tensor img = testing::random_tensor({3, 8, 16}, rng, -2, 3);
      const Tensor out = net.forward(Var(img)).value();
      for (double v : out.values()) CHECK((v >= 0.0 && v <= 1.0));
    }
  }

  TEST_CASE("input gradient on an 8x8 image matches finite differences") {
    NU2Net net(NU2NetConfig::toy(), 5);
    nn::Rng rng(5);
    const Tensor img = testing::random_tensor({3, 8, 8}, rng, 0, 1);
    CHECK(testing::gradient_check(testing::probe_sum(rng, img.shape(), [&](const Var& v) { return net.forward(v); }),
                                  img, 1e-6) < 1e-2);
  }

  TEST_CASE("shape rules and any-size enhancement") {
    NU2Net net(NU2NetConfig::toy(), 6);
    CHECK_THROWS_AS(net.forward(Var(Tensor({3, 12, 16}, 0.5))), ShapeError);
    CHECK_THROWS_AS(net.forward(Var(Tensor({1, 16, 16}, 0.5))), ShapeError);
    nn::Rng rng(6);
    const Tensor out = net.enhance(testing::random_tensor({3, 13, 10}, rng, 0, 1));
    CHECK(out.shape() == Shape{3, 13, 10});
    for (double v : out.values()) CHECK((v >= 0.0 && v <= 1.0));
  }

  TEST_CASE("every tail kind runs and the range-bounded ones stay in [0,1]") {
    nn::Rng rng(7);
    const Tensor img = testing::random_tensor({3, 8, 8}, rng, 0, 1);
    for (auto t : {TailKind::Sigmoid, TailKind::Clip, TailKind::InstanceNormSigmoid, TailKind::InstanceNormClip}) {
      NU2NetConfig c = NU2NetConfig::toy();
      c.tail = t;
      const Tensor out = NU2Net(c, 1).forward(Var(img)).value();
      for (double v : out.values()) CHECK((v >= 0.0 && v <= 1.0));
    }
  }

  TEST_CASE("checkpoint round trip") {
    NU2NetConfig c = NU2NetConfig::toy();
    c.tail = TailKind::Clip;
    NU2Net net(c, 9);
    const auto dir = std::filesystem::temp_directory_path() / ("uranker_uie_" + std::to_string(::getpid()));
    save_nu2net(dir / "n.bin", net);
    const NU2Net back = load_nu2net(dir / "n.bin");
    CHECK(back.config().tail == TailKind::Clip);
    nn::Rng rng(9);
    const Tensor img = testing::random_tensor({3, 8, 8}, rng, 0, 1);
    CHECK(back.enhance(img) == net.enhance(img));
    std::filesystem::remove_all(dir);
  }
}

TEST_SUITE("uranker_loss") {
  TEST_CASE("sigmoid of the negated score") {
    nn::Rng rng(1);
    const Var img(testing::random_tensor({3, 16, 16}, rng, 0, 1));
    CHECK(uranker_loss(img, constant_ranker(0.0)).item() == 0.5);
    CHECK(uranker_loss(img, constant_ranker(20.0)).item() < 1e-8);
    CHECK(uranker_loss(img, constant_ranker(1.0)).item() < uranker_loss(img, constant_ranker(0.5)).item());
  }

  TEST_CASE("strictly decreasing in the score, gradient reaches only the image") {
    core::URanker ranker(core::URankerConfig::toy(), 2);
    ranker.set_requires_grad(false);
    nn::Rng rng(2);
    Var a(testing::random_tensor({3, 16, 16}, rng, 0, 1), true);
    Var b(testing::random_tensor({3, 16, 16}, rng, 0, 1), true);
    const double sa = ranker.score(a.value()), sb = ranker.score(b.value());
    const double la = uranker_loss(a, ranker).item(), lb = uranker_loss(b, ranker).item();
    CHECK((sa > sb) == (la < lb));
    uranker_loss(a, ranker).backward();
    CHECK(a.has_grad());
    for (const auto& p : ranker.parameters()) CHECK_FALSE(p.has_grad());
  }
}

TEST_SUITE("total_uie_loss") {
  TEST_CASE("lambda zero is the content loss exactly") {
    nn::Rng rng(3);
    const Tensor e = testing::random_tensor({3, 8, 8}, rng, 0, 1), gt = testing::random_tensor({3, 8, 8}, rng, 0, 1);
    const UIELoss l = total_uie_loss(Var(e), gt, 0.0, nullptr);
    CHECK(l.total.item() == ag::mean_abs_diff(Var(e), Var(gt)).item());
    CHECK(l.ranker == 0.0);
    CHECK(total_uie_loss(Var(gt), gt, 0.0, nullptr).total.item() == 0.0);
  }

  TEST_CASE("lambda 0.025 equals an independent two-term computation") {
    core::URanker ranker(core::URankerConfig::toy(), 4);
    nn::Rng rng(4);
    const Tensor e = testing::random_tensor({3, 16, 16}, rng, 0, 1), gt = testing::random_tensor({3, 16, 16}, rng, 0, 1);
    double mae = 0.0;
    for (Index i = 0; i < e.numel(); ++i) mae += std::abs(e[i] - gt[i]);
    mae /= static_cast<double>(e.numel());
    const double expected = mae + 0.025 / (1.0 + std::exp(ranker.score(e)));
    CHECK(total_uie_loss(Var(e), gt, 0.025, &ranker).total.item() == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("errors") {
    const Tensor gt({3, 8, 8}, 0.5);
    CHECK_THROWS_AS(total_uie_loss(Var(gt), gt, -0.1, nullptr), ConfigError);
    CHECK_THROWS_AS(total_uie_loss(Var(gt), gt, 0.1, nullptr), ConfigError);
    CHECK_THROWS_AS(total_uie_loss(Var(Tensor({3, 8, 4})), gt, 0.0, nullptr), ShapeError);
  }
}

TEST_SUITE("train_uie") {
  TEST_CASE("cosine schedule") {
    CHECK(cosine_lr(1e-3, 0, 50) == 1e-3);
    CHECK(cosine_lr(1e-3, 49, 50) < 1e-5);
    CHECK(cosine_lr(1e-3, 249, 250) < 1e-5);
    for (int e = 1; e < 50; ++e) CHECK(cosine_lr(1.0, e, 50) < cosine_lr(1.0, e - 1, 50));
  }

  TEST_CASE("toy run halves the training MAE and logs a cosine schedule") {
    UIERecipe r;
    r.epochs = 50;
    r.crop = 16;
    r.batch_size = 4;
    r.seed = 3;
    std::ostringstream log;
    UIETrainOptions o;
    o.log = &log;
    const UIETrainResult res = train_uie(toy_pairs(16, 16, 300), r, NU2NetConfig::toy(), nullptr, o);
    REQUIRE(res.history.size() == 50);
    MESSAGE("MAE " << res.history.front().content << " -> " << res.history.back().content);
    CHECK(res.history.back().content <= 0.5 * res.history.front().content);
    CHECK(res.history.back().lr < 0.01 * r.lr);
    const std::string text = log.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 50);
  }

  TEST_CASE("ranker term bookkeeping and the frozen ranker") {
    core::URanker ranker(core::URankerConfig::toy(), 5);
    nn::NamedParams before;
    for (const auto& [n, p] : ranker.named_parameters()) before.emplace_back(n, Var(p.value()));
    const auto pairs = toy_pairs(4, 16, 400);
    UIERecipe r;
    r.epochs = 3;
    r.crop = 16;
    r.batch_size = 2;
    r.lambda = 0.025;
    const UIETrainResult with = train_uie(pairs, r, NU2NetConfig::toy(), &ranker);
    for (const auto& e : with.history) {
      CHECK(e.ranker > 0.0);
      CHECK(e.total == doctest::Approx(e.content + 0.025 * e.ranker).epsilon(1e-12));
    }
    r.lambda = 0.0;
    const UIETrainResult without = train_uie(pairs, r, NU2NetConfig::toy(), nullptr);
    for (const auto& e : without.history) {
      CHECK(e.ranker == 0.0);
      CHECK(e.total == doctest::Approx(e.content).epsilon(1e-12));
    }
    const auto after = ranker.named_parameters();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].second.value() == before[i].second.value());
    for (const auto& p : ranker.parameters()) CHECK(p.requires_grad());
  }

  TEST_CASE("configuration errors") {
    const auto pairs = toy_pairs(2, 16, 500);
    UIERecipe r;
    r.epochs = 1;
    r.crop = 16;
    r.lambda = 0.1;
    CHECK_THROWS_AS(train_uie(pairs, r, NU2NetConfig::toy(), nullptr), ConfigError);
    r.lambda = 0.0;
    r.crop = 12;
    CHECK_THROWS_AS(train_uie(pairs, r, NU2NetConfig::toy(), nullptr), ConfigError);
    r.crop = 32;
    CHECK_THROWS_AS(train_uie(pairs, r, NU2NetConfig::toy(), nullptr), InvalidInput);
  }
}

TEST_SUITE("evaluate_uie") {
  TEST_CASE("perfect output and a 0.1 offset") {
    NU2Net net(NU2NetConfig::toy(), 1);
    zero_residual(net);
    nn::Rng rng(1);
    const Tensor x = testing::random_tensor({3, 16, 16}, rng, 0.0, 0.9);
    UIEScores s = evaluate_uie(net, {{x, x}});
    CHECK(s.psnr == 100.0);
    CHECK(s.ssim == doctest::Approx(1.0).epsilon(1e-12));
    Tensor y = x;
    for (double& v : y.values()) v += 0.1;
    s = evaluate_uie(net, {{x, y}});
    CHECK(std::abs(s.psnr - 20.0) < 1e-12);
    CHECK_THROWS_AS(evaluate_uie(net, {{x, Tensor({3, 8, 8})}}), ShapeError);
    CHECK_THROWS_AS(evaluate_uie(net, {}), InvalidInput);
  }
}
