#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "uranker/dataset.hpp"
#include "uranker/errors.hpp"
#include "uranker/nn.hpp"

namespace uranker::data {

using json = nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw LoadError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DatasetManifest load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw LoadError("dataset root " + root.string() + " is not a directory");
  std::vector<std::string> problems;
  const fs::path manifest_file = root / "manifest.json";
  if (fs::exists(manifest_file)) {
    const json m = read_json(manifest_file);
    if (m.value("schema", std::string{}) != kManifestSchema) {
      throw LoadError(manifest_file.string() + ": unsupported schema '" + m.value("schema", std::string{}) +
                      "', expected " + kManifestSchema);
    }
  }

  DatasetManifest out;
  out.root = root;
  const fs::path groups_dir = root / "groups";
  if (fs::is_directory(groups_dir)) {
    for (const fs::path& gdir : sorted_entries(groups_dir, true)) {
      RankedGroup g;
      g.id = gdir.filename().string();
      const fs::path ranking = gdir / "ranking.json";
      if (!fs::exists(ranking)) {
        problems.push_back(ranking.string() + ": missing ranking file");
        continue;
      }
      json names;
      try {
        names = read_json(ranking);
      } catch (const LoadError& e) {
        problems.push_back(e.what());
        continue;
      }
      if (names.is_object() && names.contains("ranking")) names = names["ranking"];
      if (!names.is_array() || names.empty()) {
        problems.push_back(ranking.string() + ": expected a non-empty list of file names");
        continue;
      }
      std::set<std::string> seen;
      bool ok = true;
      for (const json& n : names) {
        if (!n.is_string()) {
          problems.push_back(ranking.string() + ": non-string entry " + n.dump());
          ok = false;
          continue;
        }
        const std::string name = n.get<std::string>();
        if (!seen.insert(name).second) {
          problems.push_back(ranking.string() + ": duplicate entry " + name);
          ok = false;
          continue;
        }
        const fs::path img = gdir / "images" / name;
        if (!fs::exists(img)) {
          problems.push_back(img.string() + ": listed in ranking but missing");
          ok = false;
          continue;
        }
        try {
          png_size(img);
        } catch (const LoadError& e) {
          problems.push_back(e.what());
          ok = false;
          continue;
        }
        g.images.push_back(img);
      }
      if (ok) out.groups.push_back(std::move(g));
    }
  }

  const fs::path in_dir = root / "pairs" / "input", gt_dir = root / "pairs" / "gt";
  if (fs::is_directory(in_dir)) {
    for (const fs::path& p : sorted_entries(in_dir, false)) {
      if (p.extension() != ".png") continue;
      const fs::path gt = gt_dir / p.filename();
      if (!fs::exists(gt)) {
        problems.push_back(gt.string() + ": reference missing for " + p.string());
        continue;
      }
      out.pairs.push_back({p.stem().string(), p, gt});
    }
  }

  if (!problems.empty()) {
    std::ostringstream msg;
    msg << problems.size() << " problem(s) in dataset " << root.string();
    for (const auto& p : problems) msg << "\n  " << p;
    throw LoadError(msg.str());
  }
  if (out.groups.empty() && out.pairs.empty()) {
    throw LoadError("dataset " + root.string() + " has no groups and no pairs");
  }
  return out;
}

Split split_dataset(const std::vector<RankedGroup>& groups, std::size_t n_train, std::uint64_t seed) {
  if (n_train >= groups.size()) {
    throw InvalidInput("n_train (" + std::to_string(n_train) + ") must be below the group count (" +
                       std::to_string(groups.size()) + ")");
  }
  std::vector<std::size_t> idx(groups.size());
  std::iota(idx.begin(), idx.end(), 0);
  nn::Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  Split s;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? s.train : s.test).push_back(groups[idx[i]]);
  return s;
}

int worker_count() {
  if (const char* env = std::getenv("URANKER_NUM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw ConfigError(std::string("URANKER_NUM_WORKERS must be a positive integer, got '") + env + "'");
  }
  return omp_get_max_threads();
}

std::vector<Tensor> load_images(const std::vector<fs::path>& paths) {
  std::vector<Tensor> out(paths.size());
  std::vector<std::string> errors(paths.size());
  const long n = static_cast<long>(paths.size());
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
  for (long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = read_png(paths[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw LoadError(e);
  }
  return out;
}

std::vector<std::pair<Tensor, Tensor>> load_pairs(const std::vector<ImagePair>& pairs) {
  std::vector<fs::path> paths;
  for (const auto& p : pairs) {
    paths.push_back(p.input);
    paths.push_back(p.gt);
  }
  std::vector<Tensor> images = load_images(paths);
  std::vector<std::pair<Tensor, Tensor>> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (images[2 * i].shape() != images[2 * i + 1].shape()) {
      throw LoadError("pair " + pairs[i].name + ": input and reference sizes differ");
    }
    out.emplace_back(std::move(images[2 * i]), std::move(images[2 * i + 1]));
  }
  return out;
}

}  // namespace uranker::data
