#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "uranker/dataset.hpp"
#include "uranker/errors.hpp"

namespace uranker::data {

namespace {

struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
};

}  // namespace

std::pair<Index, Index> png_size(const fs::path& path) {
  PngImage p;
  if (!png_image_begin_read_from_file(&p.img, path.c_str())) {
    throw LoadError("cannot read PNG " + path.string() + ": " + p.img.message);
  }
  return {static_cast<Index>(p.img.height), static_cast<Index>(p.img.width)};
}

Tensor read_png(const fs::path& path) {
  PngImage p;
  if (!png_image_begin_read_from_file(&p.img, path.c_str())) {
    throw LoadError("cannot read PNG " + path.string() + ": " + p.img.message);
  }
  p.img.format = PNG_FORMAT_RGB;
  const Index h = p.img.height, w = p.img.width;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, buf.data(), 0, nullptr)) {
    throw LoadError("cannot decode PNG " + path.string() + ": " + p.img.message);
  }
  Tensor out({3, h, w});
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < 3; ++c) out.at(c, y, x) = buf[static_cast<std::size_t>((y * w + x) * 3 + c)] / 255.0;
  return out;
}

void write_png(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_png expects 3×H×W, got " + to_string(image.shape()));
  }
  const Index h = image.dim(1), w = image.dim(2);
  std::vector<png_byte> buf(static_cast<std::size_t>(h * w * 3));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        buf[static_cast<std::size_t>((y * w + x) * 3 + c)] = static_cast<png_byte>(std::lround(v * 255.0));
      }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  PngImage p;
  p.img.width = static_cast<png_uint_32>(w);
  p.img.height = static_cast<png_uint_32>(h);
  p.img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&p.img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw LoadError("cannot write PNG " + path.string() + ": " + p.img.message);
  }
}

}  // namespace uranker::data
