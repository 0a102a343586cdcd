#pragma once

#include "uranker/tensor.hpp"

namespace uranker::core {

/// Per-channel colour histogram, each channel normalised to unit mass.
/// Stored channel-major as a 3×B tensor, so flattening yields
/// [R bins…, G bins…, B bins…].
struct HistogramVector {
  Tensor values;  // 3 × bins

  Index bins() const { return values.dim(1); }
  double at(Index channel, Index bin) const { return values.at(channel, bin); }
  /// 1 × 3B row vector.
  Tensor flattened() const { return values.reshaped({1, values.numel()}); }
};

/// Throws InvalidInput unless `image` is 3×H×W with H, W ≥ 1.
void validate_image(const Tensor& image);

/// Values are clamped to [0,1] and binned into `bins` equal intervals, the
/// last interval closed on the right.
HistogramVector compute_channel_histogram(const Tensor& image, Index bins);

}  // namespace uranker::core
