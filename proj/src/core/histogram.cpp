#include "uranker/histogram.hpp"

#include <cmath>

#include "uranker/errors.hpp"
#include "uranker/kernels.hpp"

namespace uranker::core {

void validate_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw InvalidInput("expected a 3×H×W RGB image, got " + to_string(image.shape()));
  }
  if (image.dim(1) < 1 || image.dim(2) < 1) throw InvalidInput("image has zero pixels");
  for (double v : image.values()) {
    if (!std::isfinite(v)) throw InvalidInput("image contains non-finite values");
  }
}

HistogramVector compute_channel_histogram(const Tensor& image, Index bins) {
  validate_image(image);
  if (bins < 2) throw InvalidInput("histogram needs at least 2 bins, got " + std::to_string(bins));
  const Index pixels = image.dim(1) * image.dim(2);
  HistogramVector h{Tensor({3, bins})};
  for (Index c = 0; c < 3; ++c) {
    double* counts = h.values.data() + c * bins;
    kernels::histogram(image.data() + c * pixels, pixels, bins, counts);
    for (Index b = 0; b < bins; ++b) counts[b] /= static_cast<double>(pixels);
  }
  return h;
}

}  // namespace uranker::core
