#include <cmath>
#include <numbers>
#include <ostream>

#include "uranker/errors.hpp"
#include "uranker/metrics.hpp"
#include "uranker/ranking.hpp"
#include "uranker/uie.hpp"
#include "uranker/uranker_config.hpp"

namespace uranker::uie {

Var uranker_loss(const Var& enhanced, const core::URanker& ranker) {
  return ag::sigmoid(ag::neg(ranker.forward(enhanced)));
}

UIELoss total_uie_loss(const Var& enhanced, const Tensor& gt, double lambda, const core::URanker* ranker) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0, got " + std::to_string(lambda));
  if (enhanced.shape() != gt.shape()) {
    throw ShapeError("enhanced and reference differ: " + to_string(enhanced.shape()) + " vs " + to_string(gt.shape()));
  }
  UIELoss l;
  Var content = ag::mean_abs_diff(enhanced, Var(gt));
  l.content = content.item();
  if (lambda == 0.0) {
    l.total = content;
    return l;
  }
  if (!ranker) throw ConfigError("lambda > 0 needs a ranker");
  Var r = uranker_loss(enhanced, *ranker);
  l.ranker = r.item();
  l.total = ag::add(content, ag::scale(r, lambda));
  return l;
}

double cosine_lr(double lr0, int epoch, int epochs) {
  if (epochs <= 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

void UIERecipe::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr < 0.0) throw ConfigError("lr must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("betas must lie in [0,1)");
  if (crop < 1) throw ConfigError("crop must be positive");
  if (flip_prob < 0.0 || flip_prob > 1.0) throw ConfigError("flip_prob must lie in [0,1]");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
}

nlohmann::json to_json(const UIERecipe& r) {
  return {{"epochs", r.epochs}, {"batch_size", r.batch_size}, {"lr", r.lr},     {"beta1", r.beta1},
          {"beta2", r.beta2},   {"crop", r.crop},             {"flip_prob", r.flip_prob},
          {"lambda", r.lambda}, {"seed", r.seed}};
}

bool apply_config_key(UIERecipe& r, const std::string& key, const std::string& value) {
  using core::parse_double;
  using core::parse_long;
  if (key == "epochs") r.epochs = static_cast<int>(parse_long(key, value));
  else if (key == "batch_size") r.batch_size = static_cast<int>(parse_long(key, value));
  else if (key == "lr") r.lr = parse_double(key, value);
  else if (key == "beta1") r.beta1 = parse_double(key, value);
  else if (key == "beta2") r.beta2 = parse_double(key, value);
  else if (key == "crop") r.crop = parse_long(key, value);
  else if (key == "flip_prob") r.flip_prob = parse_double(key, value);
  else if (key == "lambda") r.lambda = parse_double(key, value);
  else if (key == "seed") r.seed = static_cast<std::uint64_t>(parse_long(key, value));
  else return false;
  return true;
}

namespace {

Tensor crop_at(const Tensor& x, Index y0, Index x0, Index size) {
  Tensor out({x.dim(0), size, size});
  for (Index c = 0; c < x.dim(0); ++c)
    for (Index y = 0; y < size; ++y)
      for (Index z = 0; z < size; ++z) out.at(c, y, z) = x.at(c, y0 + y, x0 + z);
  return out;
}

// Restores the ranker's requires-grad flags on scope exit.
class FrozenRanker {
 public:
  explicit FrozenRanker(const core::URanker* r) : ranker_(r) {
    if (!ranker_) return;
    for (const auto& p : ranker_->parameters()) flags_.push_back(p.requires_grad());
    ranker_->set_requires_grad(false);
  }
  ~FrozenRanker() {
    if (!ranker_) return;
    auto params = ranker_->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].set_requires_grad(flags_[i]);
  }
  FrozenRanker(const FrozenRanker&) = delete;
  FrozenRanker& operator=(const FrozenRanker&) = delete;

 private:
  const core::URanker* ranker_;
  std::vector<bool> flags_;
};

}  // namespace

UIETrainResult train_uie(const ImagePairs& pairs, const UIERecipe& recipe, const NU2NetConfig& config,
                         const core::URanker* ranker, const UIETrainOptions& options) {
  recipe.validate();
  config.validate();
  if (recipe.lambda > 0.0 && !ranker) throw ConfigError("lambda > 0 requires a ranker checkpoint");
  if (pairs.empty()) throw InvalidInput("UIE training needs at least one image pair");
  if (recipe.crop % config.divisor() != 0) {
    throw ConfigError("crop " + std::to_string(recipe.crop) + " must be a multiple of " +
                      std::to_string(config.divisor()));
  }
  if (ranker && recipe.lambda > 0.0 && recipe.crop % ranker->config().total_stride() != 0) {
    throw ConfigError("crop " + std::to_string(recipe.crop) + " must be a multiple of the ranker stride " +
                      std::to_string(ranker->config().total_stride()));
  }
  for (const auto& [in, gt] : pairs) {
    if (in.shape() != gt.shape()) throw ShapeError("pair sizes differ: " + to_string(in.shape()) + " vs " + to_string(gt.shape()));
    if (in.dim(1) < recipe.crop || in.dim(2) < recipe.crop) {
      throw InvalidInput("image " + to_string(in.shape()) + " is smaller than the crop " + std::to_string(recipe.crop));
    }
  }

  FrozenRanker frozen(recipe.lambda > 0.0 ? ranker : nullptr);
  UIETrainResult result{NU2Net(config, recipe.seed), {}};
  NU2Net& model = result.model;
  nn::Adam opt(model.parameters(), {recipe.lr, recipe.beta1, recipe.beta2, 1e-8});
  nn::Rng rng = nn::Rng(recipe.seed).fork(0x7569'6500);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
    UIEEpochLog log;
    log.epoch = epoch;
    log.lr = cosine_lr(recipe.lr, epoch, recipe.epochs);
    opt.set_lr(log.lr);
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(recipe.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(recipe.batch_size));
      opt.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& [in, gt] = pairs[order[k]];
        const Index y0 = rng.below(in.dim(1) - recipe.crop + 1), x0 = rng.below(in.dim(2) - recipe.crop + 1);
        Tensor a = crop_at(in, y0, x0, recipe.crop), b = crop_at(gt, y0, x0, recipe.crop);
        // the same flips for input and reference
        if (rng.uniform() < recipe.flip_prob) a = ranking::flip_horizontal(a), b = ranking::flip_horizontal(b);
        if (rng.uniform() < recipe.flip_prob) a = ranking::flip_vertical(a), b = ranking::flip_vertical(b);
        UIELoss l = total_uie_loss(model.forward(Var(a)), b, recipe.lambda, ranker);
        const double total = l.total.item();
        if (!std::isfinite(total)) {
          throw TrainingDiverged("UIE loss became " + std::to_string(total) + " at epoch " + std::to_string(epoch));
        }
        ag::scale(l.total, 1.0 / static_cast<double>(end - start)).backward();
        log.content += l.content;
        log.ranker += l.ranker;
        log.total += total;
      }
      opt.step();
    }
    const double n = static_cast<double>(pairs.size());
    log.content /= n;
    log.ranker /= n;
    log.total /= n;
    result.history.push_back(log);
    if (options.log) {
      *options.log << nlohmann::json{{"epoch", log.epoch}, {"lr", log.lr}, {"content", log.content},
                                     {"ranker", log.ranker}, {"lambda", recipe.lambda}, {"total", log.total}}
                          .dump()
                   << "\n"
                   << std::flush;
    }
    if (options.on_epoch) options.on_epoch(log);
  }
  return result;
}

UIEScores evaluate_uie(const NU2Net& model, const ImagePairs& pairs) {
  if (pairs.empty()) throw InvalidInput("evaluate_uie needs at least one pair");
  UIEScores s;
  std::vector<double> psnr(pairs.size()), ssim(pairs.size());
  const long n = static_cast<long>(pairs.size());
  for (const auto& [in, gt] : pairs) {
    if (in.shape() != gt.shape()) throw ShapeError("pair sizes differ: " + to_string(in.shape()) + " vs " + to_string(gt.shape()));
  }
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& [in, gt] = pairs[static_cast<std::size_t>(i)];
    const Tensor out = model.enhance(in);
    psnr[static_cast<std::size_t>(i)] = metrics::psnr(out, gt);
    ssim[static_cast<std::size_t>(i)] = metrics::ssim(out, gt);
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    s.psnr += psnr[i];
    s.ssim += ssim[i];
  }
  s.images = pairs.size();
  s.psnr /= static_cast<double>(s.images);
  s.ssim /= static_cast<double>(s.images);
  return s;
}

}  // namespace uranker::uie
