#include "uranker/uranker_io.hpp"

#include "uranker/checkpoint.hpp"
#include "uranker/errors.hpp"

namespace uranker::core {

void save_uranker(const std::filesystem::path& path, const URanker& model, const nlohmann::json& extra) {
  ckpt::save_checkpoint(path, model, kURankerKind, to_json(model.config()), extra);
}

URanker load_uranker(const std::filesystem::path& path) {
  const nlohmann::json side = ckpt::read_sidecar(path, kURankerKind);
  URankerConfig config;
  try {
    config = uranker_config_from_json(side.at("config"));
  } catch (const ConfigError& e) {
    throw LoadError(path.string() + ": invalid ranker config: " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": invalid ranker config: " + e.what());
  }
  URanker model(config);
  ckpt::assign_parameters(model, ckpt::load_tensors(path), path.string());
  return model;
}

}  // namespace uranker::core
