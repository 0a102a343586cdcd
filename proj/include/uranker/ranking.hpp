#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "uranker/dataset.hpp"
#include "uranker/metrics.hpp"
#include "uranker/uranker_model.hpp"

namespace uranker::ranking {

using ag::Var;
using core::URanker;
using core::URankerConfig;

/// Which image of the (n, m) pair has the higher ground-truth quality.
enum class Order { NBetter, MBetter };

/// max(0, s_worse − s_better + ε). Throws for ε <= 0.
double margin_ranking_loss(double s_n, double s_m, Order order, double margin);
Var margin_ranking_loss(const Var& s_n, const Var& s_m, Order order, double margin);

/// Indices into a best-first group.
struct RankPair {
  Index better = 0;
  Index worse = 0;
  std::string group_id;
};

struct PairStrategy {
  enum class Kind { All, Random };
  Kind kind = Kind::All;
  Index j = 0;  // pairs per group per epoch for Random

  /// "all" or "random-<j>".
  static PairStrategy parse(const std::string& s);
  std::string str() const;
};

std::vector<RankPair> sample_pairs(const std::string& group_id, Index k, const PairStrategy& strategy,
                                   nn::Rng& rng);
std::vector<RankPair> sample_pairs(const data::RankedGroup& group, const PairStrategy& strategy, nn::Rng& rng);

/// A group held in memory, images best first and already sized for the ranker.
struct ImageGroup {
  std::string id;
  std::vector<Tensor> images;
};

/// Fixed square size when `image_size` > 0, otherwise the evaluation resize rule.
Tensor prepare_image(const Tensor& image, Index stride, Index image_size);
std::vector<ImageGroup> load_groups(const std::vector<data::RankedGroup>& groups, Index stride, Index image_size);

Tensor flip_horizontal(const Tensor& image);
Tensor flip_vertical(const Tensor& image);
/// Horizontal and vertical flips, each applied independently with probability p.
Tensor random_flip(const Tensor& image, double p, nn::Rng& rng);

struct TrainRecipe {
  int epochs = 100;
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double flip_prob = 0.5;
  double margin = 0.5;
  PairStrategy strategy;
  int batch_pairs = 16;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.1;
  Index image_size = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainRecipe& r);
/// Returns false for keys that are not recipe fields.
bool apply_config_key(TrainRecipe& r, const std::string& key, const std::string& value);

struct EpochLog {
  int epoch = 0;  // 0 is the state before any update
  double loss = 0.0;
  double holdout_srcc = 0.0;
  bool has_holdout = false;
  int steps = 0;
};

struct TrainOptions {
  std::ostream* log = nullptr;          // one JSON object per line
  std::vector<ImageGroup> monitor;      // replaces the holdout split when non-empty
  std::function<void(const EpochLog&)> on_epoch;
  const URanker* init = nullptr;        // start from these weights instead of the seed
};

struct TrainResult {
  URanker model;
  std::vector<EpochLog> history;
  double initial_loss = 0.0;  // mean margin loss over all training pairs
  double final_loss = 0.0;
  std::size_t train_groups = 0;
  std::size_t holdout_groups = 0;
};

TrainResult train_uranker(const std::vector<ImageGroup>& groups, const TrainRecipe& recipe,
                          const URankerConfig& config, const TrainOptions& options = {});

/// Mean margin loss over every ordered pair of every group, no flips.
double mean_pair_loss(const URanker& model, const std::vector<ImageGroup>& groups, double margin);

/// Per-group SRCC/KRCC between predicted scores and the stored order, averaged.
metrics::RankAgreement evaluate_ranker(const URanker& model, const std::vector<ImageGroup>& groups);
std::vector<std::vector<double>> score_groups(const URanker& model, const std::vector<ImageGroup>& groups);

}  // namespace uranker::ranking
