#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uranker/tensor.hpp"

namespace uranker::data {

namespace fs = std::filesystem;

inline constexpr const char* kManifestSchema = "uranker-dataset/1";

/// 8-bit PNG <-> 3×H×W reals in [0,1]. Grey and alpha inputs are converted
/// to RGB; writing clamps and rounds to the nearest level.
Tensor read_png(const fs::path& path);
void write_png(const fs::path& path, const Tensor& image);
/// Dimensions from the header only; throws LoadError when unreadable.
std::pair<Index, Index> png_size(const fs::path& path);

/// Images of one scene, best first.
struct RankedGroup {
  std::string id;
  std::vector<fs::path> images;
  std::size_t size() const { return images.size(); }
};

struct ImagePair {
  std::string name;
  fs::path input;
  fs::path gt;
};

struct DatasetManifest {
  fs::path root;
  std::vector<RankedGroup> groups;
  std::vector<ImagePair> pairs;
};

/// Reads root/groups/<gid>/{images/*.png, ranking.json} and root/pairs.
/// Every problem found is reported in the thrown LoadError, one per line.
DatasetManifest load_dataset(const fs::path& root);

struct Split {
  std::vector<RankedGroup> train;
  std::vector<RankedGroup> test;
};
Split split_dataset(const std::vector<RankedGroup>& groups, std::size_t n_train, std::uint64_t seed);

/// Parallelism cap for image loading: URANKER_NUM_WORKERS if set, otherwise
/// the OpenMP default.
int worker_count();
std::vector<Tensor> load_images(const std::vector<fs::path>& paths);
std::vector<std::pair<Tensor, Tensor>> load_pairs(const std::vector<ImagePair>& pairs);

// --- synthetic data --------------------------------------------------------

/// Underwater-style degradation. Each factor is scaled by `severity`:
/// per-channel exponential attenuation, contrast compression toward the grey
/// mean, and a blend toward a dull veiling light.
struct DegradationSpec {
  double attenuation[3] = {1.2, 0.4, 0.2};
  double contrast = 0.8;
  double haze = 0.6;
  double veil[3] = {0.45, 0.48, 0.48};
  double severity = 0.0;
};

Tensor degrade(const Tensor& base, const DegradationSpec& spec);

/// Smooth random colour field plus fine texture, values in [0,1].
Tensor synth_base_image(Index size, std::uint64_t seed);

/// Clean image followed by K-1 variants at severity i/K.
std::vector<Tensor> synth_group_images(Index k, Index size, std::uint64_t seed);

/// Mean HSV saturation over all pixels.
double mean_saturation(const Tensor& image);

struct SynthOptions {
  std::size_t groups = 20;
  Index k = 4;
  Index size = 256;
  std::uint64_t seed = 0;
  std::size_t uie_pairs = 0;
};

/// Writes groups (file names shuffled, ranking.json in severity order) and
/// optional UIE pairs plus root/manifest.json; returns the loaded manifest.
DatasetManifest synth_generate(const fs::path& root, const SynthOptions& options);

/// Input/reference pair for enhancement. The reference has every channel
/// stretched to span [0,1] exactly; the input is a per-channel affine
/// compression of it, so a residual network overshoots unless renormalised.
std::pair<Tensor, Tensor> synth_uie_pair(Index size, std::uint64_t seed);

}  // namespace uranker::data
