#include "uranker/uranker_model.hpp"

#include <algorithm>
#include <cmath>

#include "uranker/errors.hpp"
#include "uranker/kernels.hpp"

namespace uranker::core {

using namespace uranker::ag;

Var tokens_to_map(const Var& tokens, Index h, Index w) {
  if (tokens.value().rank() != 2 || tokens.dim(0) != h * w) {
    throw ShapeError("tokens " + to_string(tokens.shape()) + " do not form a " + std::to_string(h) + "x" +
                     std::to_string(w) + " grid");
  }
  return reshape(transpose(tokens), {tokens.dim(1), h, w});
}

Var map_to_tokens(const Var& map) {
  if (map.value().rank() != 3) throw ShapeError("feature map must be C×H×W, got " + to_string(map.shape()));
  return transpose(reshape(map, {map.dim(0), map.dim(1) * map.dim(2)}));
}

Var dynamic_connect(const Var& own, const std::vector<Var>& others, const std::vector<Var>& weights) {
  if (others.size() != weights.size()) throw ShapeError("dynamic_connect: one weight per operand required");
  Var out = own;
  for (std::size_t i = 0; i < others.size(); ++i) {
    if (others[i].shape() != own.shape()) {
      throw ShapeError("dynamic_connect: operand " + to_string(others[i].shape()) + " does not match " +
                       to_string(own.shape()));
    }
    out = add(out, mul_scalar(weights[i], others[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------

ConvPosEnc::ConvPosEnc(Index channels, nn::Rng& rng) : conv_(channels, channels, 3, 1, 1, rng, channels) {}

Var ConvPosEnc::forward(const Var& tokens, Index h, Index w, Index special) const {
  const Index n = tokens.dim(0);
  Var img = slice0(tokens, special, n);
  Var map = tokens_to_map(img, h, w);
  Var mixed = map_to_tokens(add(map, conv_.forward(map)));
  return concat0({slice0(tokens, 0, special), mixed});
}

void ConvPosEnc::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  conv_.collect_parameters(prefix + "conv.", out);
}

// ---------------------------------------------------------------------------

ConvAttention::ConvAttention(Index channels, int heads, AttentionKind kind, nn::Rng& rng)
    : qkv(channels, 3 * channels, rng), proj(channels, channels, rng), channels_(channels), heads_(heads),
      kind_(kind) {
  if (channels % heads) throw ConfigError("attention width not divisible by head count");
  if (kind_ == AttentionKind::Conv) crpe_ = nn::Conv2d(channels, channels, 3, 1, 1, rng, channels);
}

Var ConvAttention::attend(const Var& tokens, Index h, Index w, Index special) const {
  const Index n = tokens.dim(0);
  const Index c = channels_;
  const Index d = c / heads_;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Var qkv_all = qkv.forward(tokens);
  Var q = slice_cols(qkv_all, 0, c);
  Var k = slice_cols(qkv_all, c, 2 * c);
  Var v = slice_cols(qkv_all, 2 * c, 3 * c);

  std::vector<Var> per_head;
  per_head.reserve(static_cast<std::size_t>(heads_));
  for (int hd = 0; hd < heads_; ++hd) {
    Var qh = slice_cols(q, hd * d, (hd + 1) * d);
    Var kh = slice_cols(k, hd * d, (hd + 1) * d);
    Var vh = slice_cols(v, hd * d, (hd + 1) * d);
    if (kind_ == AttentionKind::Conv) {
      Var k_soft_t = softmax_rows(transpose(kh));  // d × N, normalised over tokens
      Var kv = matmul(k_soft_t, vh);                // d × d
      per_head.push_back(ag::scale(matmul(qh, kv), inv_sqrt_d));
    } else {
      Var att = softmax_rows(ag::scale(matmul(qh, kh, false, true), inv_sqrt_d));  // N × N
      per_head.push_back(matmul(att, vh));
    }
  }
  Var out = heads_ == 1 ? per_head.front() : concat_cols(per_head);

  if (kind_ == AttentionKind::Conv && relative_position && n > special) {
    Var v_img = tokens_to_map(slice0(v, special, n), h, w);
    Var rel = mul(slice0(q, special, n), map_to_tokens(crpe_.forward(v_img)));
    Var pad(Tensor({special, c}, 0.0));
    out = add(out, concat0({pad, rel}));
  }
  return out;
}

Var ConvAttention::forward(const Var& tokens, Index h, Index w, Index special) const {
  return proj.forward(attend(tokens, h, w, special));
}

void ConvAttention::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  qkv.collect_parameters(prefix + "qkv.", out);
  proj.collect_parameters(prefix + "proj.", out);
  if (kind_ == AttentionKind::Conv) crpe_.collect_parameters(prefix + "crpe.", out);
}

// ---------------------------------------------------------------------------

FeedForward::FeedForward(Index channels, Index hidden, nn::Rng& rng)
    : fc1_(channels, hidden, rng), fc2_(hidden, channels, rng) {}

Var FeedForward::forward(const Var& x) const { return fc2_.forward(gelu(fc1_.forward(x))); }

void FeedForward::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  fc1_.collect_parameters(prefix + "fc1.", out);
  fc2_.collect_parameters(prefix + "fc2.", out);
}

// ---------------------------------------------------------------------------

EncoderLayer::EncoderLayer(Index channels, int heads, double mlp_ratio, AttentionKind kind, nn::Rng& rng)
    : cpe(channels, rng), norm1(channels), attn(channels, heads, kind, rng), norm2(channels),
      mlp(channels, std::max<Index>(1, static_cast<Index>(std::lround(mlp_ratio * static_cast<double>(channels)))),
          rng),
      use_cpe(kind == AttentionKind::Conv) {}

Var EncoderLayer::forward(const Var& tokens, Index h, Index w, Index special) const {
  Var x = use_cpe ? cpe.forward(tokens, h, w, special) : tokens;
  x = add(x, attn.forward(norm1.forward(x), h, w, special));
  return add(x, mlp.forward(norm2.forward(x)));
}

void EncoderLayer::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  if (use_cpe) cpe.collect_parameters(prefix + "cpe.", out);
  norm1.collect_parameters(prefix + "norm1.", out);
  attn.collect_parameters(prefix + "attn.", out);
  norm2.collect_parameters(prefix + "norm2.", out);
  mlp.collect_parameters(prefix + "mlp.", out);
}

// ---------------------------------------------------------------------------

SerialBlock::SerialBlock(Index in_channels, Index width, Index stride, int heads, int depth,
                         const URankerConfig& cfg, nn::Rng& rng)
    : class_token(nn::trunc_normal_tensor({1, width}, 0.02, rng), true),
      patch_embed_(in_channels, width, stride, stride, 0, rng),
      embed_norm_(width),
      special_(cfg.special_tokens()),
      use_histogram_(cfg.use_histogram) {
  if (use_histogram_) hist_embed_ = nn::Linear(3 * cfg.hist_bins, width, rng);
  for (int i = 0; i < depth; ++i) layers_.emplace_back(width, heads, cfg.mlp_ratio, cfg.attention, rng);
}

Var SerialBlock::embed_histogram(const Var& hist_flat) const {
  if (!use_histogram_) throw ConfigError("histogram prior is disabled in this model");
  return hist_embed_.forward(hist_flat);
}

SerialBlock::Output SerialBlock::forward(const Var& features, const Var& hist_flat) const {
  if (features.value().rank() != 3) throw ShapeError("serial block input must be C×H×W");
  const Index s = stride();
  if (features.dim(1) % s || features.dim(2) % s) {
    throw ShapeError("serial block input " + to_string(features.shape()) + " not divisible by stride " +
                     std::to_string(s));
  }
  Var map = patch_embed_.forward(features);
  const Index h = map.dim(1), w = map.dim(2);
  Var img = embed_norm_.forward(map_to_tokens(map));
  std::vector<Var> parts{class_token};
  if (use_histogram_) parts.push_back(embed_histogram(hist_flat));
  parts.push_back(img);
  Var seq = concat0(parts);
  for (const EncoderLayer& layer : layers_) seq = layer.forward(seq, h, w, special_);
  Output out;
  out.map = tokens_to_map(slice0(seq, special_, seq.dim(0)), h, w);
  out.tokens = {seq, h, w};
  return out;
}

void SerialBlock::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  patch_embed_.collect_parameters(prefix + "patch_embed.", out);
  embed_norm_.collect_parameters(prefix + "embed_norm.", out);
  out.emplace_back(prefix + "class_token", class_token);
  if (use_histogram_) hist_embed_.collect_parameters(prefix + "hist_embed.", out);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect_parameters(prefix + "layers." + std::to_string(i) + ".", out);
  }
}

// ---------------------------------------------------------------------------

ParallelGroup::ParallelGroup(const std::vector<int>& scales, const URankerConfig& cfg, nn::Rng& rng)
    : mode_(cfg.connection), special_(cfg.special_tokens()) {
  const std::size_t n = scales.size();
  for (int s : scales) {
    blocks_.emplace_back(cfg.widths[static_cast<std::size_t>(s)], cfg.heads[static_cast<std::size_t>(s)],
                         cfg.mlp_ratio, cfg.attention, rng);
  }
  // Projections and amplitudes exist in every mode so that models built
  // with the same seed share all weights regardless of connection mode.
  proj_.resize(n);
  alpha_.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    proj_[t].resize(n);
    alpha_[t].resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      if (s == t) continue;
      proj_[t][s] = nn::Linear(cfg.widths[static_cast<std::size_t>(scales[s])],
                               cfg.widths[static_cast<std::size_t>(scales[t])], rng, false);
      alpha_[t][s] = Var(Tensor({1}, 0.0), true);
    }
  }
}

std::vector<Var> ParallelGroup::weights_for(std::size_t target, std::vector<std::size_t>& sources) const {
  std::vector<Var> w;
  sources.clear();
  const std::size_t n = blocks_.size();
  for (std::size_t s = 0; s < n; ++s) {
    if (s == target) continue;
    switch (mode_) {
      case ConnectionMode::Direct:
        break;
      case ConnectionMode::Neighbour:
        if (s + 1 == target || target + 1 == s) {
          sources.push_back(s);
          w.emplace_back(Tensor({1}, 1.0));
        }
        break;
      case ConnectionMode::Dense:
        sources.push_back(s);
        w.emplace_back(Tensor({1}, 1.0));
        break;
      case ConnectionMode::Dynamic:
        sources.push_back(s);
        w.push_back(alpha_[target][s]);
        break;
    }
  }
  return w;
}

Var ParallelGroup::cross_feature(const ScaleTokens& src_attn, std::size_t target, std::size_t source, Index th,
                                 Index tw) const {
  // special tokens pass through unresized, image tokens are resampled
  const Index n = src_attn.tokens.dim(0);
  Var projected = proj_[target][source].forward(src_attn.tokens);
  Var resized = bilinear_resize(tokens_to_map(slice0(projected, special_, n), src_attn.h, src_attn.w), th, tw);
  return concat0({slice0(projected, 0, special_), map_to_tokens(resized)});
}

std::vector<ScaleTokens> ParallelGroup::forward(const std::vector<ScaleTokens>& in) const {
  const std::size_t n = blocks_.size();
  if (in.size() != n) throw ShapeError("parallel group expects " + std::to_string(n) + " scales");

  std::vector<ScaleTokens> x = in;
  std::vector<ScaleTokens> attn(n);
  for (std::size_t i = 0; i < n; ++i) {
    const EncoderLayer& b = blocks_[i];
    if (b.use_cpe) x[i].tokens = b.cpe.forward(x[i].tokens, x[i].h, x[i].w, special_);
    attn[i] = {b.attn.forward(b.norm1.forward(x[i].tokens), x[i].h, x[i].w, special_), x[i].h, x[i].w};
  }

  std::vector<ScaleTokens> out(n);
  std::vector<std::size_t> sources;
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Var> weights = weights_for(t, sources);
    std::vector<Var> others;
    for (std::size_t s : sources) others.push_back(cross_feature(attn[s], t, s, x[t].h, x[t].w));
    Var y = add(x[t].tokens, dynamic_connect(attn[t].tokens, others, weights));
    const EncoderLayer& b = blocks_[t];
    y = add(y, b.mlp.forward(b.norm2.forward(y)));
    out[t] = {y, x[t].h, x[t].w};
  }
  return out;
}

void ParallelGroup::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  const std::size_t n = blocks_.size();
  for (std::size_t i = 0; i < n; ++i) {
    blocks_[i].collect_parameters(prefix + "blocks." + std::to_string(i) + ".", out);
  }
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      if (s == t) continue;
      const std::string key = std::to_string(t) + "_" + std::to_string(s);
      proj_[t][s].collect_parameters(prefix + "proj." + key + ".", out);
      out.emplace_back(prefix + "alpha." + key, alpha_[t][s]);
    }
  }
}

// ---------------------------------------------------------------------------

URanker::URanker(URankerConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  nn::Rng rng(seed);
  Index in_ch = 3;
  for (int s = 0; s < config_.num_scales; ++s) {
    const auto i = static_cast<std::size_t>(s);
    serial_.emplace_back(in_ch, config_.widths[i], config_.stride_of(s), config_.heads[i], config_.serial_depth,
                         config_, rng);
    in_ch = config_.widths[i];
  }
  std::vector<int> scales;
  for (int s = config_.first_parallel_scale(); s < config_.num_scales; ++s) scales.push_back(s);
  for (int g = 0; g < config_.dcpb_groups; ++g) groups_.emplace_back(scales, config_, rng);
  for (int s : scales) {
    head_norms_.emplace_back(config_.widths[static_cast<std::size_t>(s)]);
    heads_.emplace_back(config_.widths[static_cast<std::size_t>(s)], 1, rng);
  }
}

URanker::Trace URanker::forward_trace(const Var& image) const {
  validate_image(image.value());
  const Index stride = config_.total_stride();
  if (image.dim(1) % stride || image.dim(2) % stride) {
    throw ShapeError("image " + to_string(image.shape()) + " is not a multiple of the total stride " +
                     std::to_string(stride));
  }
  Var hist;
  if (config_.use_histogram) {
    hist = Var(compute_channel_histogram(image.value(), config_.hist_bins).flattened());
  }

  Trace trace;
  Var x = image;
  for (const SerialBlock& block : serial_) {
    SerialBlock::Output o = block.forward(x, hist);
    x = o.map;
    trace.serial.push_back(o.tokens);
  }
  std::vector<ScaleTokens> par(trace.serial.begin() + config_.first_parallel_scale(), trace.serial.end());
  for (const ParallelGroup& g : groups_) par = g.forward(par);
  trace.parallel = par;

  for (std::size_t i = 0; i < par.size(); ++i) {
    Var cls = slice0(par[i].tokens, 0, 1);
    trace.scale_scores.push_back(heads_[i].forward(head_norms_[i].forward(cls)));
  }
  trace.score = mean(concat0(trace.scale_scores));
  return trace;
}

Var URanker::forward(const Var& image) const { return forward_trace(image).score; }

double URanker::score(const Tensor& image) const {
  NoGradGuard guard;
  return forward(Var(image)).item();
}

Var URanker::embed_histogram_token(const HistogramVector& hist, int scale) const {
  if (scale < 0 || scale >= config_.num_scales) throw ShapeError("scale index out of range");
  if (hist.bins() != config_.hist_bins) throw ShapeError("histogram bin count does not match the model");
  return serial_[static_cast<std::size_t>(scale)].embed_histogram(Var(hist.flattened()));
}

void URanker::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  for (std::size_t i = 0; i < serial_.size(); ++i) {
    serial_[i].collect_parameters(prefix + "serial." + std::to_string(i) + ".", out);
  }
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    groups_[i].collect_parameters(prefix + "parallel." + std::to_string(i) + ".", out);
  }
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    head_norms_[i].collect_parameters(prefix + "head_norm." + std::to_string(i) + ".", out);
    heads_[i].collect_parameters(prefix + "head." + std::to_string(i) + ".", out);
  }
}

Tensor resize_for_ranker(const Tensor& image, Index stride, Index max_side) {
  validate_image(image);
  double h = static_cast<double>(image.dim(1));
  double w = static_cast<double>(image.dim(2));
  const double longest = std::max(h, w);
  if (longest > static_cast<double>(max_side)) {
    const double f = static_cast<double>(max_side) / longest;
    h *= f;
    w *= f;
  }
  auto round_to = [stride](double v) {
    return std::max<Index>(stride, static_cast<Index>(std::lround(v / static_cast<double>(stride))) * stride);
  };
  const Index oh = round_to(h), ow = round_to(w);
  if (oh == image.dim(1) && ow == image.dim(2)) return image;
  Tensor out({3, oh, ow});
  kernels::bilinear_forward(3, image.dim(1), image.dim(2), oh, ow, image.data(), out.data());
  return out;
}

}  // namespace uranker::core
