#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "uranker/nn.hpp"

namespace uranker::ckpt {

namespace fs = std::filesystem;

inline constexpr const char* kSchema = "uranker-checkpoint/1";

// Weight archive: "URWTS001", u64 count, then per tensor
// u32 name length, name bytes, u32 rank, i64 dims, f64 values (little endian).
void save_tensors(const fs::path& path, const nn::NamedParams& params);
std::map<std::string, Tensor> load_tensors(const fs::path& path);

/// Copies archived values into the module's parameters. Names and shapes
/// must match one to one.
void assign_parameters(const nn::Module& module, const std::map<std::string, Tensor>& tensors,
                       const std::string& source);

/// `<weights>.json`, holding schema, model kind, config and free-form extras.
fs::path sidecar_path(const fs::path& weights);

void save_checkpoint(const fs::path& path, const nn::Module& module, const std::string& kind,
                     const nlohmann::json& config, const nlohmann::json& extra = nlohmann::json::object());

/// Sidecar contents after checking schema and kind.
nlohmann::json read_sidecar(const fs::path& path, const std::string& expected_kind);

}  // namespace uranker::ckpt
