#include "uranker/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <set>

#include "uranker/errors.hpp"

namespace uranker::ckpt {

namespace {

constexpr char kMagic[8] = {'U', 'R', 'W', 'T', 'S', '0', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw LoadError("truncated weight archive " + path.string());
  return v;
}

}  // namespace

void save_tensors(const fs::path& path, const nn::NamedParams& params) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, params.size());
  for (const auto& [name, p] : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Tensor& t = p.value();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) put<std::int64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw LoadError("failed writing " + path.string());
}

std::map<std::string, Tensor> load_tensors(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weight archive " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kMagic)) {
    throw LoadError(path.string() + " is not a weight archive");
  }
  const auto count = get<std::uint64_t>(in, path);
  std::map<std::string, Tensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw LoadError("corrupt tensor name in " + path.string());
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw LoadError("truncated weight archive " + path.string());
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw LoadError("corrupt tensor rank for " + name + " in " + path.string());
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto v = get<std::int64_t>(in, path);
      if (v < 0 || v > (std::int64_t{1} << 32)) throw LoadError("corrupt dimension for " + name);
      shape.push_back(v);
    }
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)))) {
      throw LoadError("truncated weight archive " + path.string());
    }
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

void assign_parameters(const nn::Module& module, const std::map<std::string, Tensor>& tensors,
                       const std::string& source) {
  const nn::NamedParams params = module.named_parameters();
  std::set<std::string> used;
  for (const auto& [name, p] : params) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw LoadError(source + ": missing tensor " + name);
    if (it->second.shape() != p.shape()) {
      throw LoadError(source + ": tensor " + name + " has shape " + to_string(it->second.shape()) +
                      ", the configured model expects " + to_string(p.shape()));
    }
    used.insert(name);
  }
  for (const auto& [name, t] : tensors) {
    if (!used.count(name)) throw LoadError(source + ": unexpected tensor " + name);
  }
  for (const auto& [name, p] : params) {
    ag::Var v = p;
    v.mutable_value() = tensors.at(name);
  }
}

fs::path sidecar_path(const fs::path& weights) {
  fs::path p = weights;
  p += ".json";
  return p;
}

void save_checkpoint(const fs::path& path, const nn::Module& module, const std::string& kind,
                     const nlohmann::json& config, const nlohmann::json& extra) {
  save_tensors(path, module.named_parameters());
  nlohmann::json side = {{"schema", kSchema}, {"kind", kind}, {"config", config}, {"extra", extra}};
  std::ofstream out(sidecar_path(path));
  if (!out) throw LoadError("cannot write " + sidecar_path(path).string());
  out << side.dump(2) << "\n";
}

nlohmann::json read_sidecar(const fs::path& path, const std::string& expected_kind) {
  const fs::path side = sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw LoadError("checkpoint sidecar " + side.string() + " not found");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed sidecar " + side.string() + ": " + e.what());
  }
  if (j.value("schema", std::string{}) != kSchema) {
    throw LoadError(side.string() + ": unsupported schema '" + j.value("schema", std::string{}) + "'");
  }
  if (j.value("kind", std::string{}) != expected_kind) {
    throw LoadError(side.string() + ": checkpoint holds a '" + j.value("kind", std::string{}) + "' model, expected '" +
                    expected_kind + "'");
  }
  return j;
}

}  // namespace uranker::ckpt
