#pragma once

#include <cstdint>
#include <vector>

#include "uranker/histogram.hpp"
#include "uranker/nn.hpp"
#include "uranker/uranker_config.hpp"

namespace uranker::core {

using ag::Var;

/// One scale's token sequence: [class token, histogram token?, image tokens…]
/// where the image tokens are the row-major flattening of an h×w grid.
struct ScaleTokens {
  Var tokens;  // N × C
  Index h = 0;
  Index w = 0;
};

/// h×w tokens (hw × C) ↔ C×h×w feature map.
Var tokens_to_map(const Var& tokens, Index h, Index w);
Var map_to_tokens(const Var& map);

/// own + Σ weights[i]·others[i], elementwise. All operands must already share
/// own's shape (resampled and projected by the caller).
Var dynamic_connect(const Var& own, const std::vector<Var>& others, const std::vector<Var>& weights);

/// Depthwise 3×3 convolution added residually to the image tokens.
class ConvPosEnc : public nn::Module {
 public:
  ConvPosEnc() = default;
  ConvPosEnc(Index channels, nn::Rng& rng);
  Var forward(const Var& tokens, Index h, Index w, Index special) const;
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

 private:
  nn::Conv2d conv_;
};

/// Shape-preserving multi-head attention over a token sequence.
///
/// Conv kind: softmax over the token axis of the keys, keysᵀ·values per
/// head, queries times that, plus a depthwise-convolutional relative
/// position term q ⊙ dwconv(v) on image tokens only. Plain kind: ordinary
/// softmax(qkᵀ/√d)·v with no positional terms.
class ConvAttention : public nn::Module {
 public:
  ConvAttention() = default;
  ConvAttention(Index channels, int heads, AttentionKind kind, nn::Rng& rng);
  Var forward(const Var& tokens, Index h, Index w, Index special) const;
  /// Attention result before the output projection.
  Var attend(const Var& tokens, Index h, Index w, Index special) const;
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

  AttentionKind kind() const { return kind_; }
  int heads() const { return heads_; }
  /// Disables the relative position term (Conv kind); used by oracle tests.
  bool relative_position = true;

  nn::Linear qkv;
  nn::Linear proj;

 private:
  Index channels_ = 0;
  int heads_ = 1;
  AttentionKind kind_ = AttentionKind::Conv;
  nn::Conv2d crpe_;
};

class FeedForward : public nn::Module {
 public:
  FeedForward() = default;
  FeedForward(Index channels, Index hidden, nn::Rng& rng);
  Var forward(const Var& x) const;
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

 private:
  nn::Linear fc1_, fc2_;
};

/// Pre-norm transformer layer: position encoding, attention, feed-forward.
class EncoderLayer : public nn::Module {
 public:
  EncoderLayer() = default;
  EncoderLayer(Index channels, int heads, double mlp_ratio, AttentionKind kind, nn::Rng& rng);
  Var forward(const Var& tokens, Index h, Index w, Index special) const;
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

  ConvPosEnc cpe;
  nn::LayerNorm norm1;
  ConvAttention attn;
  nn::LayerNorm norm2;
  FeedForward mlp;
  bool use_cpe = true;
};

/// Patch embedding (stride-s convolution) followed by attention layers over
/// [class, histogram, image] tokens.
class SerialBlock : public nn::Module {
 public:
  struct Output {
    Var map;             // C × h/s × w/s
    ScaleTokens tokens;  // full sequence after the last layer
  };

  SerialBlock() = default;
  SerialBlock(Index in_channels, Index width, Index stride, int heads, int depth, const URankerConfig& cfg,
              nn::Rng& rng);

  /// `hist_flat` is the 1×3B histogram row; ignored when histograms are off.
  Output forward(const Var& features, const Var& hist_flat) const;
  Var embed_histogram(const Var& hist_flat) const;
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

  Index stride() const { return patch_embed_.stride(); }
  Var class_token;  // 1 × C

 private:
  nn::Conv2d patch_embed_;
  nn::LayerNorm embed_norm_;
  nn::Linear hist_embed_;
  std::vector<EncoderLayer> layers_;
  Index special_ = 2;
  bool use_histogram_ = true;
};

/// One group of parallel blocks: per-scale attention, cross-scale exchange
/// of attention outputs (special tokens included), per-scale feed-forward.
class ParallelGroup : public nn::Module {
 public:
  ParallelGroup() = default;
  /// `scales` are indices into cfg.widths/heads, finest first.
  ParallelGroup(const std::vector<int>& scales, const URankerConfig& cfg, nn::Rng& rng);

  std::vector<ScaleTokens> forward(const std::vector<ScaleTokens>& in) const;
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

  ConnectionMode mode() const { return mode_; }
  /// Learnable amplitude for features flowing from `source` into `target`
  /// (positions within this group).
  Var& alpha(std::size_t target, std::size_t source) { return alpha_[target][source]; }

 private:
  Var cross_feature(const ScaleTokens& src_attn, std::size_t target, std::size_t source, Index th, Index tw) const;
  std::vector<Var> weights_for(std::size_t target, std::vector<std::size_t>& sources) const;

  std::vector<EncoderLayer> blocks_;
  std::vector<std::vector<nn::Linear>> proj_;  // [target][source]
  std::vector<std::vector<Var>> alpha_;        // [target][source], 1-element
  ConnectionMode mode_ = ConnectionMode::Dynamic;
  Index special_ = 2;
};

class URanker : public nn::Module {
 public:
  struct Trace {
    std::vector<ScaleTokens> serial;    // output of every serial block
    std::vector<ScaleTokens> parallel;  // parallel scales after the last group
    std::vector<Var> scale_scores;      // one 1×1 score per parallel scale
    Var score;                          // mean of scale_scores, shape {1}
  };

  explicit URanker(URankerConfig config, std::uint64_t seed = 0);

  /// Quality score of a 3×H×W image in [0,1]; H and W must be multiples of
  /// the total stride. Higher is better.
  Var forward(const Var& image) const;
  Trace forward_trace(const Var& image) const;
  /// Gradient-free convenience wrapper.
  double score(const Tensor& image) const;

  /// Histogram token for `scale` from a histogram, 1 × C.
  Var embed_histogram_token(const HistogramVector& hist, int scale) const;

  const URankerConfig& config() const { return config_; }
  std::vector<SerialBlock>& serial_blocks() { return serial_; }
  std::vector<ParallelGroup>& parallel_groups() { return groups_; }
  std::vector<nn::Linear>& score_heads() { return heads_; }

  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

 private:
  URankerConfig config_;
  std::vector<SerialBlock> serial_;
  std::vector<ParallelGroup> groups_;
  std::vector<nn::LayerNorm> head_norms_;
  std::vector<nn::Linear> heads_;
};

/// Resizes an arbitrary image to the evaluation size: long side capped at
/// `max_side`, then each side rounded to the nearest multiple of `stride`.
Tensor resize_for_ranker(const Tensor& image, Index stride, Index max_side = 512);

}  // namespace uranker::core
