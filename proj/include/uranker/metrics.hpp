#pragma once

#include <vector>

#include "uranker/tensor.hpp"

namespace uranker::metrics {

/// Ranks are 1..K with 1 the best. Predicted scores rank higher-is-better.
void validate_ranks(const std::vector<int>& gt_ranks);

/// Average ranks (1 = largest score); tied scores share the mean of their
/// positions.
std::vector<double> descending_ranks(const std::vector<double>& scores);

double srcc(const std::vector<double>& pred_scores, const std::vector<int>& gt_ranks);

/// Kendall tau-b. All-tied predictions give 0.
double krcc(const std::vector<double>& pred_scores, const std::vector<int>& gt_ranks);

inline constexpr double kPsnrCap = 100.0;

double mse(const Tensor& a, const Tensor& b);
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

struct SsimOptions {
  Index window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Mean SSIM over every valid window position and channel of C×H×W images.
/// Images smaller than the window use the largest odd window that fits.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& options = {});

std::vector<double> gaussian_taps(Index length, double sigma);

struct GroupPrediction {
  std::vector<double> scores;
  std::vector<int> gt_ranks;
};

struct RankAgreement {
  double srcc = 0.0;
  double krcc = 0.0;
  int groups = 0;
  int skipped = 0;  // groups with fewer than two images
};

/// Per-group coefficients averaged over groups.
RankAgreement mean_group_agreement(const std::vector<GroupPrediction>& groups);

}  // namespace uranker::metrics
