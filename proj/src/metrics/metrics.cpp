#include "uranker/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "uranker/errors.hpp"
#include "uranker/kernels.hpp"

namespace uranker::metrics {

void validate_ranks(const std::vector<int>& gt_ranks) {
  const auto k = gt_ranks.size();
  if (k < 2) throw InvalidInput("rank correlation needs at least 2 items, got " + std::to_string(k));
  std::vector<bool> seen(k + 1, false);
  for (int r : gt_ranks) {
    if (r < 1 || static_cast<std::size_t>(r) > k || seen[static_cast<std::size_t>(r)]) {
      throw InvalidInput("ground-truth ranks must be a permutation of 1.." + std::to_string(k));
    }
    seen[static_cast<std::size_t>(r)] = true;
  }
}

namespace {

void check_lengths(const std::vector<double>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size()) {
    throw InvalidInput("prediction/ground-truth length mismatch: " + std::to_string(pred.size()) + " vs " +
                       std::to_string(gt.size()));
  }
  validate_ranks(gt);
  for (double s : pred) {
    if (!std::isfinite(s)) throw InvalidInput("non-finite predicted score");
  }
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::vector<double> descending_ranks(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return scores[i] > scores[j]; });
  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double srcc(const std::vector<double>& pred_scores, const std::vector<int>& gt_ranks) {
  check_lengths(pred_scores, gt_ranks);
  const std::vector<double> pr = descending_ranks(pred_scores);
  const std::vector<double> gr(gt_ranks.begin(), gt_ranks.end());
  return pearson(pr, gr);
}

double krcc(const std::vector<double>& pred_scores, const std::vector<int>& gt_ranks) {
  check_lengths(pred_scores, gt_ranks);
  const std::size_t k = pred_scores.size();
  long concordant = 0, discordant = 0, pred_ties = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double dp = pred_scores[i] - pred_scores[j];
      const int dg = gt_ranks[j] - gt_ranks[i];  // positive when i is truly better
      if (dp == 0.0) {
        ++pred_ties;
      } else if ((dp > 0) == (dg > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double total = static_cast<double>(k * (k - 1) / 2);
  const double denom = std::sqrt((total - static_cast<double>(pred_ties)) * total);
  if (denom == 0.0) return 0.0;
  return static_cast<double>(concordant - discordant) / denom;
}

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("metric shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  if (a.numel() == 0) throw InvalidInput("metric on empty images");
  double s = 0.0;
  for (Index i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(e / (peak * peak)));
}

std::vector<double> gaussian_taps(Index length, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(length));
  const double c = static_cast<double>(length / 2);
  double total = 0.0;
  for (Index i = 0; i < length; ++i) {
    const double d = static_cast<double>(i) - c;
    total += taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  for (double& t : taps) t /= total;
  return taps;
}

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& o) {
  if (a.shape() != b.shape()) {
    throw ShapeError("ssim shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  if (a.rank() != 3 || a.numel() == 0) throw InvalidInput("ssim expects non-empty C×H×W images");
  const Index c = a.dim(0), h = a.dim(1), w = a.dim(2);
  Index win = std::min({o.window, h, w});
  if (win % 2 == 0) --win;
  const std::vector<double> taps = gaussian_taps(win, o.sigma);

  const Index n = a.numel();
  Tensor aa({c, h, w}), bb({c, h, w}), ab({c, h, w});
  for (Index i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const Index oh = h - win + 1, ow = w - win + 1;
  auto filt = [&](const Tensor& x) {
    Tensor out({c, oh, ow});
    kernels::separable_filter_valid(c, h, w, x.data(), taps.data(), win, out.data());
    return out;
  };
  const Tensor mu_a = filt(a), mu_b = filt(b), e_aa = filt(aa), e_bb = filt(bb), e_ab = filt(ab);
  const double c1 = (o.k1 * o.peak) * (o.k1 * o.peak);
  const double c2 = (o.k2 * o.peak) * (o.k2 * o.peak);
  double total = 0.0;
  for (Index i = 0; i < mu_a.numel(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.numel());
}

RankAgreement mean_group_agreement(const std::vector<GroupPrediction>& groups) {
  RankAgreement r;
  for (const GroupPrediction& g : groups) {
    if (g.scores.size() < 2) {
      std::cerr << "warning: skipping group with " << g.scores.size() << " image(s)\n";
      ++r.skipped;
      continue;
    }
    r.srcc += srcc(g.scores, g.gt_ranks);
    r.krcc += krcc(g.scores, g.gt_ranks);
    ++r.groups;
  }
  if (r.groups == 0) throw InvalidInput("no group with at least two images to evaluate");
  r.srcc /= r.groups;
  r.krcc /= r.groups;
  return r;
}

}  // namespace uranker::metrics
