#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uranker/nn.hpp"
#include "uranker/uranker_model.hpp"

namespace uranker::uie {

using ag::Var;

inline constexpr double kTailDelta = 1e-8;

/// Per-channel min-max stretch, applied only to channels with a value
/// outside [0,1]; other channels come back bit for bit.
Tensor normalization_tail(const Tensor& image, double delta = kTailDelta);
Var normalization_tail(const Var& image, double delta = kTailDelta);

/// What follows `input + residual` at the end of the network.
enum class TailKind { Normalize, None, Sigmoid, Clip, InstanceNormSigmoid, InstanceNormClip };
using uranker::to_string;
std::string to_string(TailKind t);
TailKind parse_tail_kind(const std::string& s);
Var apply_tail(const Var& x, TailKind kind);

struct NU2NetConfig {
  std::vector<Index> widths{32, 64, 128};
  int blocks_per_stage = 2;
  TailKind tail = TailKind::Normalize;

  void validate() const;
  /// Spatial sizes must be multiples of this.
  Index divisor() const { return Index{1} << widths.size(); }
  static NU2NetConfig toy();
};

nlohmann::json to_json(const NU2NetConfig& c);
NU2NetConfig nu2net_config_from_json(const nlohmann::json& j);

class ConvINELU : public nn::Module {
 public:
  ConvINELU() = default;
  ConvINELU(Index in, Index out, nn::Rng& rng);
  Var forward(const Var& x) const;
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

  nn::Conv2d conv;
  nn::InstanceNorm2d norm;
};

/// U-shaped residual enhancer: encoder stages of Conv-IN-ELU blocks with
/// 2× downsampling, a bottleneck, decoder stages fed by concatenated skips,
/// a 1×1 output convolution added to the input, then the tail.
class NU2Net : public nn::Module {
 public:
  explicit NU2Net(NU2NetConfig config, std::uint64_t seed = 0);

  /// Output before the tail (input + residual branch).
  Var pre_tail(const Var& image) const;
  Var forward(const Var& image) const;
  /// Any-size inference: edge-pads to the divisor, crops back; values in [0,1]
  /// (outputs of tails without a range guarantee are clamped).
  Tensor enhance(const Tensor& image) const;

  const NU2NetConfig& config() const { return config_; }
  nn::Conv2d& output_conv() { return out_; }
  void collect_parameters(const std::string& prefix, nn::NamedParams& out) const override;

 private:
  Var stage(const std::vector<ConvINELU>& blocks, Var x) const;

  NU2NetConfig config_;
  std::vector<std::vector<ConvINELU>> down_;
  std::vector<ConvINELU> bottleneck_;
  std::vector<std::vector<ConvINELU>> up_;
  nn::Conv2d out_;
};

inline constexpr const char* kNU2NetKind = "nu2net";
void save_nu2net(const std::filesystem::path& path, const NU2Net& model,
                 const nlohmann::json& extra = nlohmann::json::object());
NU2Net load_nu2net(const std::filesystem::path& path);

// --- losses ------------------------------------------------------------------

/// Sigmoid(−score) of a frozen ranker; gradients reach the image only.
Var uranker_loss(const Var& enhanced, const core::URanker& ranker);

struct UIELoss {
  Var total;
  double content = 0.0;
  double ranker = 0.0;  // the unweighted ranker term, 0 when λ = 0
};

/// Mean absolute error plus λ times the ranker loss.
UIELoss total_uie_loss(const Var& enhanced, const Tensor& gt, double lambda, const core::URanker* ranker);

// --- training ------------------------------------------------------------------

/// lr0 · ½(1 + cos(π e / E)) for 0-based epoch e of E.
double cosine_lr(double lr0, int epoch, int epochs);

struct UIERecipe {
  int epochs = 250;
  int batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  Index crop = 256;
  double flip_prob = 0.5;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const UIERecipe& r);
bool apply_config_key(UIERecipe& r, const std::string& key, const std::string& value);
bool apply_config_key(NU2NetConfig& c, const std::string& key, const std::string& value);

struct UIEEpochLog {
  int epoch = 0;
  double lr = 0.0;
  double content = 0.0;  // mean over the epoch's images
  double ranker = 0.0;
  double total = 0.0;
};

struct UIETrainOptions {
  std::ostream* log = nullptr;
  std::function<void(const UIEEpochLog&)> on_epoch;
};

struct UIETrainResult {
  NU2Net model;
  std::vector<UIEEpochLog> history;
};

using ImagePairs = std::vector<std::pair<Tensor, Tensor>>;  // (degraded, reference)

UIETrainResult train_uie(const ImagePairs& pairs, const UIERecipe& recipe, const NU2NetConfig& config,
                         const core::URanker* ranker, const UIETrainOptions& options = {});

struct UIEScores {
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t images = 0;
};

UIEScores evaluate_uie(const NU2Net& model, const ImagePairs& pairs);

}  // namespace uranker::uie
