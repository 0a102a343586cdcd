#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "uranker/dataset.hpp"
#include "uranker/errors.hpp"
#include "uranker/kernels.hpp"
#include "uranker/nn.hpp"

namespace uranker::data {

namespace {

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

}  // namespace

Tensor degrade(const Tensor& base, const DegradationSpec& spec) {
  if (base.rank() != 3 || base.dim(0) != 3) throw ShapeError("degrade expects 3×H×W");
  if (spec.severity < 0.0 || spec.severity > 1.0) throw InvalidInput("severity must lie in [0,1]");
  const double s = spec.severity;
  const Index hw = base.dim(1) * base.dim(2);
  Tensor out = base;
  for (Index c = 0; c < 3; ++c) {
    const double t = std::exp(-spec.attenuation[c] * s);
    for (Index i = 0; i < hw; ++i) out[c * hw + i] *= t;
  }
  double grey = 0.0;
  for (double v : out.values()) grey += v;
  grey /= static_cast<double>(out.numel());
  // Written as x + k·s·(target − x) so that severity 0 is an exact identity.
  for (Index c = 0; c < 3; ++c) {
    for (Index i = 0; i < hw; ++i) {
      double& v = out[c * hw + i];
      v += spec.contrast * s * (grey - v);
      v += spec.haze * s * (spec.veil[c] - v);
    }
  }
  return out;
}

Tensor synth_base_image(Index size, std::uint64_t seed) {
  nn::Rng rng(seed);
  const Index grid = 4;
  Tensor coarse({3, grid, grid});
  for (Index y = 0; y < grid; ++y)
    for (Index x = 0; x < grid; ++x) {
      double rgb[3];
      hsv_to_rgb(rng.uniform(), rng.uniform(0.45, 0.9), rng.uniform(0.5, 0.95), rgb);
      for (Index c = 0; c < 3; ++c) coarse.at(c, y, x) = rgb[c];
    }
  Tensor img({3, size, size});
  kernels::bilinear_forward(3, grid, grid, size, size, coarse.data(), img.data());

  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i) {
    waves.push_back({rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0, 2 * M_PI), rng.uniform(0.02, 0.06)});
  }
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      double t = 0.0;
      for (const Wave& w : waves) {
        t += w.amp * std::sin(2 * M_PI * (w.fx * x + w.fy * y) / static_cast<double>(size) * 4.0 + w.phase);
      }
      for (Index c = 0; c < 3; ++c) {
        double& v = img.at(c, y, x);
        v = std::clamp(v + t + rng.uniform(-0.015, 0.015), 0.0, 1.0);
      }
    }
  return img;
}

std::vector<Tensor> synth_group_images(Index k, Index size, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("a synthetic group needs K >= 2");
  const Tensor base = synth_base_image(size, seed);
  std::vector<Tensor> out;
  for (Index i = 0; i < k; ++i) {
    DegradationSpec spec;
    spec.severity = static_cast<double>(i) / static_cast<double>(k);
    out.push_back(degrade(base, spec));
  }
  return out;
}

double mean_saturation(const Tensor& image) {
  const Index hw = image.dim(1) * image.dim(2);
  double total = 0.0;
  for (Index i = 0; i < hw; ++i) {
    const double r = image[i], g = image[hw + i], b = image[2 * hw + i];
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    total += mx > 0.0 ? (mx - mn) / mx : 0.0;
  }
  return total / static_cast<double>(hw);
}

std::pair<Tensor, Tensor> synth_uie_pair(Index size, std::uint64_t seed) {
  Tensor gt = synth_base_image(size, seed);
  nn::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Index hw = size * size;
  Tensor input(gt.shape());
  for (Index c = 0; c < 3; ++c) {
    double* p = gt.data() + c * hw;
    const auto [lo, hi] = std::minmax_element(p, p + hw);
    const double mn = *lo, range = *hi - *lo;
    for (Index i = 0; i < hw; ++i) p[i] = range > 0 ? (p[i] - mn) / range : 0.0;
    const double a = rng.uniform(0.35, 0.7);
    const double b = rng.uniform(0.05, 0.95 - a);
    for (Index i = 0; i < hw; ++i) input[c * hw + i] = a * p[i] + b;
  }
  return {input, gt};
}

DatasetManifest synth_generate(const fs::path& root, const SynthOptions& o) {
  if (o.k < 2) throw InvalidInput("K must be at least 2");
  if (o.size < 1) throw InvalidInput("image size must be positive");
  fs::create_directories(root);
  const long n = static_cast<long>(o.groups);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
  for (long gi = 0; gi < n; ++gi) {
    const auto g = static_cast<std::size_t>(gi);
    const std::string gid = numbered("g", g);
    const fs::path gdir = root / "groups" / gid;
    nn::Rng rng = nn::Rng(o.seed).fork(2 * g + 1);
    const std::vector<Tensor> imgs = synth_group_images(o.k, o.size, rng.next_u64());
    std::vector<Index> label(static_cast<std::size_t>(o.k));
    std::iota(label.begin(), label.end(), 0);
    rng.shuffle(label.begin(), label.end());
    nlohmann::json ranking = nlohmann::json::array();
    for (Index i = 0; i < o.k; ++i) {
      const std::string name = gid + "_" + std::to_string(label[static_cast<std::size_t>(i)]) + ".png";
      write_png(gdir / "images" / name, imgs[static_cast<std::size_t>(i)]);
      ranking.push_back(name);
    }
    std::ofstream(gdir / "ranking.json") << ranking.dump(1) << "\n";
  }
  const long np = static_cast<long>(o.uie_pairs);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
  for (long pi = 0; pi < np; ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const auto [input, gt] = synth_uie_pair(o.size, nn::Rng(o.seed).fork(2 * p + 2).next_u64());
    const std::string name = numbered("p", p) + ".png";
    write_png(root / "pairs" / "input" / name, input);
    write_png(root / "pairs" / "gt" / name, gt);
  }
  const DegradationSpec d;
  nlohmann::json manifest = {
      {"schema", kManifestSchema},
      {"generator",
       {{"groups", o.groups}, {"k", o.k}, {"size", o.size}, {"seed", o.seed}, {"uie_pairs", o.uie_pairs}}},
      {"degradation",
       {{"attenuation", d.attenuation}, {"contrast", d.contrast}, {"haze", d.haze}, {"veil", d.veil}}},
  };
  std::ofstream(root / "manifest.json") << manifest.dump(2) << "\n";
  return load_dataset(root);
}

}  // namespace uranker::data
