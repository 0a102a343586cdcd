#pragma once

#include <filesystem>

#include "json.hpp"
#include "uranker/uranker_model.hpp"

namespace uranker::core {

inline constexpr const char* kURankerKind = "uranker";

void save_uranker(const std::filesystem::path& path, const URanker& model,
                  const nlohmann::json& extra = nlohmann::json::object());
/// Rebuilds the model from the sidecar config, then loads its weights.
URanker load_uranker(const std::filesystem::path& path);

}  // namespace uranker::core
