#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_support.hpp"
#include "uranker/errors.hpp"
#include "uranker/uranker_model.hpp"

using namespace uranker;
using namespace uranker::core;
using ag::Var;
using uranker::testing::param;
using uranker::testing::random_tensor;

namespace {

Tensor constant_image(Index h, Index w, double v) { return Tensor({3, h, w}, v); }

// Pixel values placed at histogram-bin centres so small perturbations never
// move a pixel into another bin (the histogram is piecewise constant).
Tensor bin_centred_image(Index h, Index w, Index bins, nn::Rng& rng) {
  Tensor t({3, h, w});
  for (double& v : t.values()) {
    const Index b = rng.below(bins);
    v = (static_cast<double>(b) + 0.5 + rng.uniform(-0.2, 0.2)) / static_cast<double>(bins);
  }
  return t;
}

URankerConfig three_scale_toy() {
  URankerConfig c;
  c.num_scales = 3;
  c.widths = {8, 8, 16};
  c.heads = {2, 2, 2};
  c.serial_depth = 1;
  c.dcpb_groups = 1;
  c.parallel_scales = 3;
  c.mlp_ratio = 2.0;
  c.hist_bins = 16;
  return c;
}

std::vector<ScaleTokens> random_scales(const std::vector<Index>& widths, const std::vector<Index>& sides,
                                       Index special, nn::Rng& rng) {
  std::vector<ScaleTokens> out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    out.push_back({Var(random_tensor({special + sides[i] * sides[i], widths[i]}, rng)), sides[i], sides[i]});
  }
  return out;
}

// Scalar-loop multi-head softmax attention followed by the output projection.
Tensor reference_attention(const Tensor& x, const Tensor& wqkv, const Tensor& bqkv, const Tensor& wo,
                           const Tensor& bo, int heads) {
  const Index n = x.dim(0), c = x.dim(1), d = c / heads;
  Tensor qkv({n, 3 * c});
  for (Index i = 0; i < n; ++i)
    for (Index o = 0; o < 3 * c; ++o) {
      double s = bqkv[o];
      for (Index j = 0; j < c; ++j) s += wqkv.at(o, j) * x.at(i, j);
      qkv.at(i, o) = s;
    }
  Tensor att_out({n, c});
  for (int h = 0; h < heads; ++h) {
    for (Index i = 0; i < n; ++i) {
      std::vector<double> logits(static_cast<std::size_t>(n));
      for (Index j = 0; j < n; ++j) {
        double s = 0.0;
        for (Index e = 0; e < d; ++e) s += qkv.at(i, h * d + e) * qkv.at(j, c + h * d + e);
        logits[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(d));
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& l : logits) z += (l = std::exp(l - mx));
      for (Index e = 0; e < d; ++e) {
        double s = 0.0;
        for (Index j = 0; j < n; ++j) s += logits[static_cast<std::size_t>(j)] / z * qkv.at(j, 2 * c + h * d + e);
        att_out.at(i, h * d + e) = s;
      }
    }
  }
  Tensor out({n, c});
  for (Index i = 0; i < n; ++i)
    for (Index o = 0; o < c; ++o) {
      double s = bo[o];
      for (Index j = 0; j < c; ++j) s += wo.at(o, j) * att_out.at(i, j);
      out.at(i, o) = s;
    }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
TEST_SUITE("compute_channel_histogram") {
  TEST_CASE("constant mid-grey puts all mass in bin 32") {
    const HistogramVector h = compute_channel_histogram(constant_image(5, 7, 0.5), 64);
    for (Index c = 0; c < 3; ++c) {
      CHECK(h.at(c, 32) == 1.0);
      double rest = 0.0;
      for (Index b = 0; b < 64; ++b) rest += b == 32 ? 0.0 : h.at(c, b);
      CHECK(rest == 0.0);
    }
  }

  TEST_CASE("all-black image fills bin 0") {
    const HistogramVector h = compute_channel_histogram(constant_image(3, 3, 0.0), 64);
    for (Index c = 0; c < 3; ++c) CHECK(h.at(c, 0) == 1.0);
  }

  TEST_CASE("extremes land in the first and the right-closed last bin") {
    Tensor img({3, 2, 1});
    for (Index c = 0; c < 3; ++c) {
      img.at(c, 0, 0) = 0.0;
      img.at(c, 1, 0) = 1.0;
    }
    const HistogramVector h = compute_channel_histogram(img, 64);
    for (Index c = 0; c < 3; ++c) {
      CHECK(h.at(c, 0) == 0.5);
      CHECK(h.at(c, 63) == 0.5);
    }
  }

  TEST_CASE("out-of-range values are clamped before binning") {
    Tensor img({3, 1, 2});
    img.at(0, 0, 0) = -3.0;
    img.at(0, 0, 1) = 7.0;
    const HistogramVector h = compute_channel_histogram(img, 4);
    CHECK(h.at(0, 0) == 0.5);
    CHECK(h.at(0, 3) == 0.5);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(compute_channel_histogram(Tensor({3, 0, 4}), 64), InvalidInput);
    CHECK_THROWS_AS(compute_channel_histogram(Tensor({1, 4, 4}), 64), InvalidInput);
    CHECK_THROWS_AS(compute_channel_histogram(constant_image(2, 2, 0.1), 1), InvalidInput);
  }

  TEST_CASE("property: normalised, non-negative and invariant to pixel permutation") {
    nn::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const Index h = 1 + rng.below(9), w = 1 + rng.below(9);
      const Index bins = 2 + rng.below(70);
      Tensor img = random_tensor({3, h, w}, rng, -0.2, 1.2);
      std::vector<Index> perm(static_cast<std::size_t>(h * w));
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm.begin(), perm.end());
      Tensor shuffled(img.shape());
      for (Index c = 0; c < 3; ++c)
        for (Index p = 0; p < h * w; ++p) shuffled[c * h * w + p] = img[c * h * w + perm[static_cast<std::size_t>(p)]];
      const HistogramVector a = compute_channel_histogram(img, bins);
      const HistogramVector b = compute_channel_histogram(shuffled, bins);
      CHECK(a.values == b.values);
      for (Index c = 0; c < 3; ++c) {
        double s = 0.0;
        for (Index k = 0; k < bins; ++k) {
          CHECK(a.at(c, k) >= 0.0);
          s += a.at(c, k);
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
    }
  }
}

// ---------------------------------------------------------------------------
TEST_SUITE("embed_histogram_token") {
  TEST_CASE("zero histogram with zero bias gives a zero token") {
    URanker model(URankerConfig::toy(), 3);
    HistogramVector zero{Tensor({3, URankerConfig::toy().hist_bins}, 0.0)};
    for (int s = 0; s < 2; ++s) {
      const Tensor t = model.embed_histogram_token(zero, s).value();
      CHECK(t.shape() == Shape{1, URankerConfig::toy().widths[static_cast<std::size_t>(s)]});
      for (double v : t.values()) CHECK(v == 0.0);
    }
  }

  TEST_CASE("deterministic and affine, matching a reference matrix-vector product") {
    URanker model(URankerConfig::toy(), 3);
    nn::Rng rng(5);
    Tensor img = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
    const HistogramVector h = compute_channel_histogram(img, model.config().hist_bins);
    // Give the bias a non-zero value so the affine part is exercised.
    Var bias = param(model, "serial.1.hist_embed.bias");
    for (double& v : bias.mutable_value().values()) v = rng.uniform(-1, 1);

    const Tensor t1 = model.embed_histogram_token(h, 1).value();
    const Tensor t1b = model.embed_histogram_token(h, 1).value();
    CHECK(t1 == t1b);

    HistogramVector h2{h.values};
    for (double& v : h2.values.values()) v *= 2.0;
    const Tensor t2 = model.embed_histogram_token(h2, 1).value();
    const Tensor& b = bias.value();
    for (Index i = 0; i < t1.numel(); ++i) CHECK(t2[i] - b[i] == doctest::Approx(2.0 * (t1[i] - b[i])).epsilon(1e-12));

    const Tensor& w = param(model, "serial.1.hist_embed.weight").value();
    const Tensor flat = h.flattened();
    for (Index o = 0; o < w.dim(0); ++o) {
      double s = b[o];
      for (Index j = 0; j < w.dim(1); ++j) s += w.at(o, j) * flat[j];
      CHECK(t1[o] == doctest::Approx(s).epsilon(1e-12));
    }
  }

  TEST_CASE("bin count and scale are validated") {
    URanker model(URankerConfig::toy(), 3);
    CHECK_THROWS_AS(model.embed_histogram_token(HistogramVector{Tensor({3, 7})}, 0), ShapeError);
    CHECK_THROWS_AS(model.embed_histogram_token(HistogramVector{Tensor({3, 32})}, 5), ShapeError);
  }
}

// ---------------------------------------------------------------------------
TEST_SUITE("serial_block_forward") {
  URankerConfig block_cfg() {
    URankerConfig c = URankerConfig::toy();
    c.hist_bins = 8;
    return c;
  }

  TEST_CASE("stride-2 block halves a 32x32 map and carries 2+256 tokens") {
    nn::Rng rng(1);
    const URankerConfig cfg = block_cfg();
    SerialBlock block(8, 16, 2, 2, 1, cfg, rng);
    Var feat(random_tensor({8, 32, 32}, rng));
    Var hist(Tensor({1, 3 * cfg.hist_bins}, 1.0 / 8));
    const SerialBlock::Output o = block.forward(feat, hist);
    CHECK(o.map.shape() == Shape{16, 16, 16});
    CHECK(o.tokens.tokens.shape() == Shape{2 + 256, 16});
    CHECK(o.tokens.h == 16);
    // image tokens of the sequence are exactly the returned map
    CHECK(tokens_to_map(ag::slice0(o.tokens.tokens, 2, 258), 16, 16).value() == o.map.value());
  }

  TEST_CASE("evaluation is bitwise deterministic") {
    nn::Rng rng(2);
    SerialBlock block(8, 16, 2, 2, 1, block_cfg(), rng);
    Var feat(random_tensor({8, 8, 8}, rng));
    Var hist(random_tensor({1, 24}, rng, 0, 0.2));
    ag::NoGradGuard g;
    const auto a = block.forward(feat, hist);
    const auto b = block.forward(feat, hist);
    CHECK(a.map.value() == b.map.value());
    CHECK(a.tokens.tokens.value() == b.tokens.tokens.value());
  }

  TEST_CASE("input gradient matches central differences on a 4x4 input") {
    nn::Rng rng(3);
    SerialBlock block(4, 8, 2, 2, 1, block_cfg(), rng);
    Var hist(random_tensor({1, 24}, rng, 0, 0.2));
    Var readout(random_tensor({2 + 4, 8}, rng));
    auto f = [&](const Var& x) { return ag::sum(ag::mul(block.forward(x, hist).tokens.tokens, readout)); };
    const double err = uranker::testing::gradient_check(f, random_tensor({4, 4, 4}, rng), 1e-5);
    CHECK(err < 1e-3);
  }

  TEST_CASE("non-divisible spatial size is a shape error") {
    nn::Rng rng(4);
    SerialBlock block(4, 8, 2, 2, 1, block_cfg(), rng);
    Var hist(Tensor({1, 24}, 0.0));
    CHECK_THROWS_AS(block.forward(Var(Tensor({4, 5, 4})), hist), ShapeError);
  }
}

// ---------------------------------------------------------------------------
TEST_SUITE("conv_attention") {
  TEST_CASE("shape preserving for any N and C, both kinds") {
    nn::Rng rng(11);
    for (AttentionKind kind : {AttentionKind::Conv, AttentionKind::Plain}) {
      for (auto [side, c, heads] : {std::array<Index, 3>{1, 4, 1}, {3, 8, 2}, {4, 12, 3}}) {
        ConvAttention att(c, static_cast<int>(heads), kind, rng);
        Var x(random_tensor({2 + side * side, c}, rng));
        CHECK(att.forward(x, side, side, 2).shape() == x.shape());
      }
    }
  }

  TEST_CASE("plain path equals a reference softmax attention and is permutation equivariant") {
    nn::Rng rng(12);
    const Index c = 8, side = 3, special = 2, n = special + side * side;
    ConvAttention att(c, 2, AttentionKind::Plain, rng);
    for (double& v : att.qkv.bias.mutable_value().values()) v = rng.uniform(-0.1, 0.1);
    Tensor x = random_tensor({n, c}, rng);
    const Tensor out = att.forward(Var(x), side, side, special).value();
    const Tensor ref = reference_attention(x, att.qkv.weight.value(), att.qkv.bias.value(), att.proj.weight.value(),
                                           att.proj.bias.value(), 2);
    CHECK(max_abs_diff(out, ref) < 1e-12);

    std::vector<Index> perm(static_cast<std::size_t>(side * side));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Tensor px = x;
    for (Index i = 0; i < side * side; ++i)
      for (Index j = 0; j < c; ++j) px.at(special + i, j) = x.at(special + perm[static_cast<std::size_t>(i)], j);
    const Tensor pout = att.forward(Var(px), side, side, special).value();
    for (Index i = 0; i < side * side; ++i)
      for (Index j = 0; j < c; ++j)
        CHECK(pout.at(special + i, j) == doctest::Approx(out.at(special + perm[static_cast<std::size_t>(i)], j)));
    for (Index i = 0; i < special; ++i)
      for (Index j = 0; j < c; ++j) CHECK(pout.at(i, j) == doctest::Approx(out.at(i, j)));
  }

  TEST_CASE("conv path without the position term is permutation equivariant, with it is not") {
    nn::Rng rng(13);
    const Index c = 8, side = 3, n = 2 + side * side;
    ConvAttention att(c, 2, AttentionKind::Conv, rng);
    Tensor x = random_tensor({n, c}, rng);
    Tensor px = x;  // swap two image tokens
    for (Index j = 0; j < c; ++j) std::swap(px.at(2, j), px.at(7, j));
    auto swapped_back = [&](Tensor t) {
      for (Index j = 0; j < c; ++j) std::swap(t.at(2, j), t.at(7, j));
      return t;
    };
    att.relative_position = false;
    CHECK(max_abs_diff(swapped_back(att.forward(Var(px), side, side, 2).value()),
                       att.forward(Var(x), side, side, 2).value()) < 1e-12);
    att.relative_position = true;
    CHECK(max_abs_diff(swapped_back(att.forward(Var(px), side, side, 2).value()),
                       att.forward(Var(x), side, side, 2).value()) > 1e-6);
  }

  TEST_CASE("a single-token sequence attends only to itself") {
    nn::Rng rng(14);
    ConvAttention att(6, 2, AttentionKind::Plain, rng);
    Var x(random_tensor({1, 6}, rng));
    const Tensor attended = att.attend(x, 0, 0, 1).value();
    const Tensor value = ag::slice_cols(att.qkv.forward(x), 12, 18).value();
    CHECK(max_abs_diff(attended, value) < 1e-15);
  }
}

// ---------------------------------------------------------------------------
TEST_SUITE("dynamic_connect") {
  TEST_CASE("zero amplitudes are the identity on the own-scale features") {
    nn::Rng rng(21);
    Var fo(random_tensor({9, 4}, rng)), f1(random_tensor({9, 4}, rng)), f2(random_tensor({9, 4}, rng));
    Var zero(Tensor::scalar(0.0));
    CHECK(dynamic_connect(fo, {f1, f2}, {zero, zero}).value() == fo.value());
  }

  TEST_CASE("unit amplitude on the negated features cancels") {
    nn::Rng rng(22);
    Var fo(random_tensor({9, 4}, rng)), f2(random_tensor({9, 4}, rng));
    Var f1 = ag::neg(fo);
    const Tensor out = dynamic_connect(fo, {f1, f2}, {Var(Tensor::scalar(1.0)), Var(Tensor::scalar(0.0))}).value();
    for (double v : out.values()) CHECK(v == 0.0);
  }

  TEST_CASE("random operands match a scalar loop") {
    nn::Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor fo = random_tensor({16, 5}, rng), f1 = random_tensor({16, 5}, rng), f2 = random_tensor({16, 5}, rng);
      const double a1 = rng.uniform(-2, 2), a2 = rng.uniform(-2, 2);
      const Tensor out =
          dynamic_connect(Var(fo), {Var(f1), Var(f2)}, {Var(Tensor::scalar(a1)), Var(Tensor::scalar(a2))}).value();
      double worst = 0.0;
      for (Index i = 0; i < fo.numel(); ++i) worst = std::max(worst, std::abs(out[i] - (fo[i] + a1 * f1[i] + a2 * f2[i])));
      CHECK(worst < 1e-6);
    }
  }

  TEST_CASE("operand shape mismatch is an error") {
    CHECK_THROWS_AS(dynamic_connect(Var(Tensor({4, 2})), {Var(Tensor({2, 4}))}, {Var(Tensor::scalar(1))}), ShapeError);
  }
}

// ---------------------------------------------------------------------------
TEST_SUITE("dcpb_forward") {
  URankerConfig group_cfg(ConnectionMode mode) {
    URankerConfig c = three_scale_toy();
    c.connection = mode;
    return c;
  }
  const std::vector<int> kScales{0, 1, 2};
  const std::vector<Index> kWidths{8, 8, 16};
  const std::vector<Index> kSides{8, 4, 2};

  TEST_CASE("output shapes equal input shapes in every mode") {
    for (ConnectionMode m : {ConnectionMode::Dynamic, ConnectionMode::Direct, ConnectionMode::Neighbour,
                             ConnectionMode::Dense}) {
      nn::Rng rng(31);
      ParallelGroup g(kScales, group_cfg(m), rng);
      auto in = random_scales(kWidths, kSides, 2, rng);
      auto out = g.forward(in);
      for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i].tokens.shape() == in[i].tokens.shape());
    }
  }

  TEST_CASE("direct mode keeps scales independent") {
    nn::Rng rng(32);
    ParallelGroup g(kScales, group_cfg(ConnectionMode::Direct), rng);
    auto in = random_scales(kWidths, kSides, 2, rng);
    auto zeroed = in;
    zeroed[0].tokens = Var(Tensor(in[0].tokens.shape(), 0.0));
    zeroed[2].tokens = Var(Tensor(in[2].tokens.shape(), 0.0));
    CHECK(g.forward(in)[1].tokens.value() == g.forward(zeroed)[1].tokens.value());
  }

  TEST_CASE("dynamic mode at initialisation equals direct mode") {
    nn::Rng r1(33), r2(33), data(34);
    ParallelGroup dyn(kScales, group_cfg(ConnectionMode::Dynamic), r1);
    ParallelGroup dir(kScales, group_cfg(ConnectionMode::Direct), r2);
    auto in = random_scales(kWidths, kSides, 2, data);
    auto a = dyn.forward(in), b = dir.forward(in);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tokens.value() == b[i].tokens.value());
    // and a non-zero amplitude breaks the equality
    for (double& v : dyn.alpha(1, 0).mutable_value().values()) v = 0.5;
    CHECK(dyn.forward(in)[1].tokens.value() != b[1].tokens.value());
  }

  TEST_CASE("dense mode couples every scale to every other (finite-difference Jacobian blocks)") {
    nn::Rng rng(35);
    ParallelGroup g(kScales, group_cfg(ConnectionMode::Dense), rng);
    auto in = random_scales(kWidths, kSides, 2, rng);
    const double h = 1e-6;
    for (std::size_t src = 0; src < in.size(); ++src) {
      auto up = in, down = in;
      // directional derivative along a random direction over the whole source block
      const Tensor dir = random_tensor(in[src].tokens.shape(), rng);
      Tensor tu = in[src].tokens.value(), td = tu;
      for (Index i = 0; i < tu.numel(); ++i) {
        tu[i] += h * dir[i];
        td[i] -= h * dir[i];
      }
      up[src].tokens = Var(tu);
      down[src].tokens = Var(td);
      const auto ou = g.forward(up), od = g.forward(down);
      for (std::size_t dst = 0; dst < in.size(); ++dst) {
        double norm = 0.0;
        for (Index i = 0; i < ou[dst].tokens.numel(); ++i) {
          const double d = (ou[dst].tokens.value()[i] - od[dst].tokens.value()[i]) / (2 * h);
          norm += d * d;
        }
        CHECK_MESSAGE(norm > 1e-10, "scale " << src << " -> " << dst);
      }
    }
  }

  TEST_CASE("neighbour mode does not link the finest and coarsest scale") {
    nn::Rng rng(36);
    ParallelGroup g(kScales, group_cfg(ConnectionMode::Neighbour), rng);
    auto in = random_scales(kWidths, kSides, 2, rng);
    auto changed = in;
    changed[0].tokens = Var(random_tensor(in[0].tokens.shape(), rng));
    CHECK(g.forward(in)[2].tokens.value() == g.forward(changed)[2].tokens.value());
    CHECK(g.forward(in)[1].tokens.value() != g.forward(changed)[1].tokens.value());
  }

  TEST_CASE("unknown mode names are configuration errors") {
    CHECK_THROWS_AS(parse_connection_mode("sparse"), ConfigError);
  }
}

// ---------------------------------------------------------------------------
TEST_SUITE("uranker_forward") {
  TEST_CASE("score is the mean of the per-scale heads") {
    URanker model(three_scale_toy(), 9);
    REQUIRE(model.score_heads().size() == 3);
    const double biases[] = {1.0, 2.0, 3.0};
    for (std::size_t i = 0; i < 3; ++i) {
      model.score_heads()[i].weight.mutable_value().fill(0.0);
      model.score_heads()[i].bias.mutable_value().fill(biases[i]);
    }
    nn::Rng rng(1);
    CHECK(model.score(random_tensor({3, 32, 32}, rng, 0, 1)) == doctest::Approx(2.0).epsilon(1e-15));
  }

  TEST_CASE("identical input gives identical score; default config is well formed") {
    URanker model(URankerConfig::toy(), 4);
    nn::Rng rng(2);
    Tensor img = random_tensor({3, 16, 24}, rng, 0, 1);
    CHECK(model.score(img) == model.score(img));
    URanker same_seed(URankerConfig::toy(), 4);
    CHECK(same_seed.score(img) == model.score(img));
    CHECK(URankerConfig{}.total_stride() == 32);
    CHECK_NOTHROW(URankerConfig{}.validate());
  }

  TEST_CASE("invalid images are rejected") {
    URanker model(URankerConfig::toy(), 4);
    CHECK_THROWS_AS(model.score(Tensor({1, 16, 16})), InvalidInput);
    CHECK_THROWS_AS(model.score(Tensor({3, 12, 16})), ShapeError);
  }

  TEST_CASE("the histogram prior can be switched off") {
    URankerConfig c = URankerConfig::toy();
    c.use_histogram = false;
    URanker model(c, 4);
    nn::Rng rng(3);
    const auto trace = model.forward_trace(Var(random_tensor({3, 16, 16}, rng, 0, 1)));
    CHECK(trace.serial[0].tokens.dim(0) == 1 + 16);
    CHECK(std::isfinite(trace.score.item()));
  }

  TEST_CASE("dynamic amplitudes of the last parallel group reach the score") {
    URanker model(URankerConfig::toy(), 7);
    nn::Rng rng(7);
    model.forward(Var(random_tensor({3, 16, 16}, rng, 0, 1))).backward();
    int amplitudes = 0;
    for (const auto& [name, p] : model.named_parameters()) {
      if (name.find("alpha") == std::string::npos) continue;
      ++amplitudes;
      REQUIRE(p.has_grad());
      CHECK(p.grad()[0] != 0.0);
    }
    CHECK(amplitudes == 2);
  }

  TEST_CASE("input-pixel gradient matches finite differences on a 16x16 toy model") {
    URanker model(URankerConfig::toy(), 5);
    nn::Rng rng(6);
    Tensor img = bin_centred_image(16, 16, model.config().hist_bins, rng);
    const double err = uranker::testing::gradient_check([&](const Var& x) { return model.forward(x); }, img, 1e-5);
    CHECK(err < 1e-2);
  }
}

TEST_CASE("evaluation resize rounds to the total stride and caps the long side") {
  nn::Rng rng(1);
  Tensor img = random_tensor({3, 50, 70}, rng, 0, 1);
  CHECK(resize_for_ranker(img, 32).shape() == Shape{3, 64, 64});
  CHECK(resize_for_ranker(Tensor({3, 1000, 500}, 0.5), 32).shape() == Shape{3, 512, 256});
  CHECK(resize_for_ranker(Tensor({3, 5, 5}, 0.5), 8).shape() == Shape{3, 8, 8});
  const Tensor same = random_tensor({3, 64, 32}, rng, 0, 1);
  CHECK(resize_for_ranker(same, 32) == same);
}

TEST_CASE("non-finite pixels are invalid input") {
  Tensor img({3, 4, 4}, 0.5);
  img[5] = std::nan("");
  CHECK_THROWS_AS(compute_channel_histogram(img, 8), InvalidInput);
}
