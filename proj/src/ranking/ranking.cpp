#include "uranker/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "uranker/errors.hpp"
#include "uranker/kernels.hpp"

namespace uranker::ranking {

namespace {

void check_margin(double margin) {
  if (!(margin > 0.0)) throw ConfigError("ranking margin must be positive, got " + std::to_string(margin));
}

}  // namespace

double margin_ranking_loss(double s_n, double s_m, Order order, double margin) {
  check_margin(margin);
  const double gap = order == Order::NBetter ? s_m - s_n : s_n - s_m;
  return gap + margin < 0.0 ? 0.0 : gap + margin;  // NaN passes through
}

Var margin_ranking_loss(const Var& s_n, const Var& s_m, Order order, double margin) {
  check_margin(margin);
  const Var gap = order == Order::NBetter ? ag::sub(s_m, s_n) : ag::sub(s_n, s_m);
  return ag::relu(ag::add_scalar(gap, margin));
}

PairStrategy PairStrategy::parse(const std::string& s) {
  PairStrategy p;
  if (s == "all") return p;
  const std::string prefix = "random-";
  if (s.rfind(prefix, 0) == 0) {
    const std::string rest = s.substr(prefix.size());
    char* end = nullptr;
    const long j = std::strtol(rest.c_str(), &end, 10);
    if (!rest.empty() && *end == '\0' && j >= 1) {
      p.kind = Kind::Random;
      p.j = j;
      return p;
    }
  }
  throw ConfigError("unknown pair strategy '" + s + "' (expected all or random-<j>)");
}

std::string PairStrategy::str() const { return kind == Kind::All ? "all" : "random-" + std::to_string(j); }

std::vector<RankPair> sample_pairs(const std::string& group_id, Index k, const PairStrategy& strategy,
                                   nn::Rng& rng) {
  if (k < 2) throw InvalidInput("group " + group_id + " has fewer than two images");
  std::vector<RankPair> all;
  for (Index a = 0; a < k; ++a)
    for (Index b = a + 1; b < k; ++b) all.push_back({a, b, group_id});
  if (strategy.kind == PairStrategy::Kind::All) return all;
  const auto total = static_cast<Index>(all.size());
  if (strategy.j > total) {
    throw InvalidInput("random-" + std::to_string(strategy.j) + " exceeds the " + std::to_string(total) +
                       " pairs of group " + group_id);
  }
  // partial Fisher-Yates: the first j entries are a uniform j-subset
  for (Index i = 0; i < strategy.j; ++i) std::swap(all[i], all[i + rng.below(total - i)]);
  all.resize(static_cast<std::size_t>(strategy.j));
  return all;
}

std::vector<RankPair> sample_pairs(const data::RankedGroup& group, const PairStrategy& strategy, nn::Rng& rng) {
  return sample_pairs(group.id, static_cast<Index>(group.size()), strategy, rng);
}

Tensor prepare_image(const Tensor& image, Index stride, Index image_size) {
  if (image_size <= 0) return core::resize_for_ranker(image, stride);
  if (image_size % stride != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) + " is not a multiple of the total stride " +
                      std::to_string(stride));
  }
  if (image.dim(1) == image_size && image.dim(2) == image_size) return image;
  Tensor out({image.dim(0), image_size, image_size});
  kernels::bilinear_forward(image.dim(0), image.dim(1), image.dim(2), image_size, image_size, image.data(),
                            out.data());
  return out;
}

std::vector<ImageGroup> load_groups(const std::vector<data::RankedGroup>& groups, Index stride, Index image_size) {
  std::vector<data::fs::path> paths;
  for (const auto& g : groups) paths.insert(paths.end(), g.images.begin(), g.images.end());
  std::vector<Tensor> images = data::load_images(paths);
  std::vector<ImageGroup> out;
  std::size_t at = 0;
  for (const auto& g : groups) {
    ImageGroup ig{g.id, {}};
    for (std::size_t i = 0; i < g.size(); ++i) ig.images.push_back(prepare_image(images[at++], stride, image_size));
    out.push_back(std::move(ig));
  }
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  const Index c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (Index ch = 0; ch < c; ++ch)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) out.at(ch, y, x) = image.at(ch, y, w - 1 - x);
  return out;
}

Tensor flip_vertical(const Tensor& image) {
  const Index c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (Index ch = 0; ch < c; ++ch)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) out.at(ch, y, x) = image.at(ch, h - 1 - y, x);
  return out;
}

Tensor random_flip(const Tensor& image, double p, nn::Rng& rng) {
  if (p <= 0.0) return image;
  Tensor out = rng.uniform() < p ? flip_horizontal(image) : image;
  return rng.uniform() < p ? flip_vertical(out) : out;
}

void TrainRecipe::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (lr < 0.0) throw ConfigError("lr must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("betas must lie in [0,1)");
  if (flip_prob < 0.0 || flip_prob > 1.0) throw ConfigError("flip_prob must lie in [0,1]");
  check_margin(margin);
  if (batch_pairs < 1) throw ConfigError("batch_pairs must be >= 1");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) throw ConfigError("holdout_fraction must lie in [0,1)");
  if (image_size < 0) throw ConfigError("image_size must be >= 0");
}

nlohmann::json to_json(const TrainRecipe& r) {
  return {{"epochs", r.epochs},       {"lr", r.lr},
          {"beta1", r.beta1},         {"beta2", r.beta2},
          {"flip_prob", r.flip_prob}, {"margin", r.margin},
          {"strategy", r.strategy.str()}, {"batch_pairs", r.batch_pairs},
          {"seed", r.seed},           {"holdout_fraction", r.holdout_fraction},
          {"image_size", r.image_size}};
}

bool apply_config_key(TrainRecipe& r, const std::string& key, const std::string& value) {
  using core::parse_double;
  using core::parse_long;
  if (key == "epochs") r.epochs = static_cast<int>(parse_long(key, value));
  else if (key == "lr") r.lr = parse_double(key, value);
  else if (key == "beta1") r.beta1 = parse_double(key, value);
  else if (key == "beta2") r.beta2 = parse_double(key, value);
  else if (key == "flip_prob") r.flip_prob = parse_double(key, value);
  else if (key == "margin") r.margin = parse_double(key, value);
  else if (key == "strategy") r.strategy = PairStrategy::parse(value);
  else if (key == "batch_pairs") r.batch_pairs = static_cast<int>(parse_long(key, value));
  else if (key == "seed") r.seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "holdout_fraction") r.holdout_fraction = parse_double(key, value);
  else if (key == "image_size") r.image_size = parse_long(key, value);
  else return false;
  return true;
}

std::vector<std::vector<double>> score_groups(const URanker& model, const std::vector<ImageGroup>& groups) {
  std::vector<std::vector<double>> scores(groups.size());
  const long n = static_cast<long>(groups.size());
#pragma omp parallel for schedule(dynamic)
  for (long g = 0; g < n; ++g) {
    const auto& imgs = groups[static_cast<std::size_t>(g)].images;
    auto& out = scores[static_cast<std::size_t>(g)];
    for (const Tensor& img : imgs) out.push_back(model.score(img));
  }
  return scores;
}

double mean_pair_loss(const URanker& model, const std::vector<ImageGroup>& groups, double margin) {
  const auto scores = score_groups(model, groups);
  double total = 0.0;
  long count = 0;
  for (const auto& s : scores)
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b) {
        total += margin_ranking_loss(s[a], s[b], Order::NBetter, margin);
        ++count;
      }
  return count ? total / static_cast<double>(count) : 0.0;
}

metrics::RankAgreement evaluate_ranker(const URanker& model, const std::vector<ImageGroup>& groups) {
  if (groups.empty()) throw InvalidInput("evaluate_ranker needs at least one group");
  const auto scores = score_groups(model, groups);
  std::vector<metrics::GroupPrediction> preds;
  for (const auto& s : scores) {
    metrics::GroupPrediction p{s, {}};
    for (std::size_t i = 0; i < s.size(); ++i) p.gt_ranks.push_back(static_cast<int>(i) + 1);
    preds.push_back(std::move(p));
  }
  return metrics::mean_group_agreement(preds);
}

namespace {

nlohmann::json log_line(const EpochLog& e) {
  nlohmann::json j = {{"epoch", e.epoch}, {"loss", e.loss}, {"steps", e.steps}};
  j["holdout_srcc"] = e.has_holdout ? nlohmann::json(e.holdout_srcc) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

TrainResult train_uranker(const std::vector<ImageGroup>& groups, const TrainRecipe& recipe,
                          const URankerConfig& config, const TrainOptions& options) {
  recipe.validate();
  config.validate();
  if (groups.empty()) throw InvalidInput("training needs at least one group");

  std::vector<ImageGroup> train = groups, holdout = options.monitor;
  if (holdout.empty()) {
    const auto h = static_cast<std::size_t>(std::floor(recipe.holdout_fraction * static_cast<double>(groups.size())));
    if (h > 0 && h < groups.size()) {
      holdout.assign(groups.end() - static_cast<std::ptrdiff_t>(h), groups.end());
      train.resize(groups.size() - h);
    }
  }
  for (const auto& g : train) {
    if (g.images.size() < 2) throw InvalidInput("training group " + g.id + " has fewer than two images");
  }

  TrainResult result{URanker(config, recipe.seed), {}, 0.0, 0.0, train.size(), holdout.size()};
  URanker& model = result.model;
  if (options.init) {
    const auto src = options.init->named_parameters();
    auto dst = model.named_parameters();
    if (src.size() != dst.size()) throw ConfigError("initial weights do not match the configured model");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (src[i].first != dst[i].first || src[i].second.shape() != dst[i].second.shape()) {
        throw ConfigError("initial weights do not match the configured model at " + dst[i].first);
      }
      dst[i].second.mutable_value() = src[i].second.value();
    }
  }
  nn::Rng rng = nn::Rng(recipe.seed).fork(0x7261'6e6b);
  nn::Adam opt(model.parameters(), {recipe.lr, recipe.beta1, recipe.beta2, 1e-8});

  auto report = [&](EpochLog e) {
    if (!holdout.empty()) {
      e.has_holdout = true;
      e.holdout_srcc = evaluate_ranker(model, holdout).srcc;
    }
    result.history.push_back(e);
    if (options.log) *options.log << log_line(e).dump() << "\n" << std::flush;
    if (options.on_epoch) options.on_epoch(e);
  };

  result.initial_loss = mean_pair_loss(model, train, recipe.margin);
  report({0, result.initial_loss, 0.0, false, 0});

  for (int epoch = 1; epoch <= recipe.epochs; ++epoch) {
    std::vector<std::pair<std::size_t, RankPair>> pairs;
    for (std::size_t g = 0; g < train.size(); ++g) {
      for (RankPair& p : sample_pairs(train[g].id, static_cast<Index>(train[g].images.size()), recipe.strategy, rng)) {
        pairs.emplace_back(g, std::move(p));
      }
    }
    rng.shuffle(pairs.begin(), pairs.end());

    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(recipe.batch_pairs)) {
      const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(recipe.batch_pairs));
      // every image is scored once per batch; both members of a pair go
      // through the same weights
      std::map<std::pair<std::size_t, Index>, Var> cache;
      auto score_of = [&](std::size_t g, Index i) {
        auto it = cache.find({g, i});
        if (it != cache.end()) return it->second;
        const Tensor& img = train[g].images[static_cast<std::size_t>(i)];
        Var s = model.forward(Var(random_flip(img, recipe.flip_prob, rng)));
        cache.emplace(std::make_pair(g, i), s);
        return s;
      };
      Var total;
      for (std::size_t p = start; p < end; ++p) {
        const auto& [g, pair] = pairs[p];
        Var l = margin_ranking_loss(score_of(g, pair.better), score_of(g, pair.worse), Order::NBetter, recipe.margin);
        total = total.defined() ? ag::add(total, l) : l;
      }
      Var loss = ag::scale(total, 1.0 / static_cast<double>(end - start));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingDiverged("ranking loss became " + std::to_string(value) + " at epoch " + std::to_string(epoch) +
                               ", step " + std::to_string(steps + 1));
      }
      opt.zero_grad();
      loss.backward();
      opt.step();
      epoch_loss += value;
      ++steps;
    }
    report({epoch, steps ? epoch_loss / steps : 0.0, 0.0, false, steps});
  }
  result.final_loss = mean_pair_loss(model, train, recipe.margin);
  return result;
}

}  // namespace uranker::ranking
