#include <algorithm>

#include "uranker/checkpoint.hpp"
#include "uranker/errors.hpp"
#include "uranker/uie.hpp"
#include "uranker/uranker_config.hpp"

namespace uranker::uie {

void NU2NetConfig::validate() const {
  if (widths.empty()) throw ConfigError("NU2Net needs at least one stage width");
  for (Index w : widths) {
    if (w < 1) throw ConfigError("NU2Net widths must be positive");
  }
  if (blocks_per_stage < 1) throw ConfigError("blocks_per_stage must be >= 1");
}

NU2NetConfig NU2NetConfig::toy() {
  NU2NetConfig c;
  c.widths = {8, 16, 16};
  return c;
}

nlohmann::json to_json(const NU2NetConfig& c) {
  return {{"widths", c.widths}, {"blocks_per_stage", c.blocks_per_stage}, {"tail", to_string(c.tail)}};
}

NU2NetConfig nu2net_config_from_json(const nlohmann::json& j) {
  NU2NetConfig c;
  c.widths = j.at("widths").get<std::vector<Index>>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<int>();
  c.tail = parse_tail_kind(j.at("tail").get<std::string>());
  c.validate();
  return c;
}

bool apply_config_key(NU2NetConfig& c, const std::string& key, const std::string& value) {
  if (key == "uie_widths") c.widths = core::parse_index_list(key, value);
  else if (key == "uie_blocks") c.blocks_per_stage = static_cast<int>(core::parse_long(key, value));
  else if (key == "tail") c.tail = parse_tail_kind(value);
  else return false;
  return true;
}

ConvINELU::ConvINELU(Index in, Index out, nn::Rng& rng) : conv(in, out, 3, 1, 1, rng), norm(out) {}

Var ConvINELU::forward(const Var& x) const { return ag::elu(norm.forward(conv.forward(x))); }

void ConvINELU::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  conv.collect_parameters(prefix + "conv.", out);
  norm.collect_parameters(prefix + "norm.", out);
}

namespace {

std::vector<ConvINELU> make_stage(Index in, Index out, int blocks, nn::Rng& rng) {
  std::vector<ConvINELU> s;
  for (int b = 0; b < blocks; ++b) s.emplace_back(b == 0 ? in : out, out, rng);
  return s;
}

Tensor pad_edge(const Tensor& x, Index h, Index w) {
  Tensor out({x.dim(0), h, w});
  for (Index c = 0; c < x.dim(0); ++c)
    for (Index y = 0; y < h; ++y)
      for (Index z = 0; z < w; ++z) out.at(c, y, z) = x.at(c, std::min(y, x.dim(1) - 1), std::min(z, x.dim(2) - 1));
  return out;
}

}  // namespace

NU2Net::NU2Net(NU2NetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  nn::Rng rng(seed);
  const auto& w = config_.widths;
  const std::size_t s = w.size();
  for (std::size_t i = 0; i < s; ++i) down_.push_back(make_stage(i == 0 ? 3 : w[i - 1], w[i], config_.blocks_per_stage, rng));
  bottleneck_ = make_stage(w.back(), w.back(), config_.blocks_per_stage, rng);
  up_.resize(s);
  for (std::size_t i = s; i-- > 0;) {
    const Index below = i + 1 == s ? w.back() : w[i + 1];
    up_[i] = make_stage(below + w[i], w[i], config_.blocks_per_stage, rng);
  }
  out_ = nn::Conv2d(w[0], 3, 1, 1, 0, rng);
}

Var NU2Net::stage(const std::vector<ConvINELU>& blocks, Var x) const {
  for (const auto& b : blocks) x = b.forward(x);
  return x;
}

Var NU2Net::pre_tail(const Var& image) const {
  if (image.value().rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("NU2Net expects a 3×H×W image, got " + to_string(image.shape()));
  }
  const Index div = config_.divisor();
  if (image.dim(1) % div != 0 || image.dim(2) % div != 0) {
    throw ShapeError("NU2Net input sides must be multiples of " + std::to_string(div) + ", got " +
                     to_string(image.shape()));
  }
  std::vector<Var> skips;
  Var h = image;
  for (const auto& st : down_) {
    h = stage(st, h);
    skips.push_back(h);
    h = ag::bilinear_resize(h, h.dim(1) / 2, h.dim(2) / 2);
  }
  h = stage(bottleneck_, h);
  for (std::size_t i = up_.size(); i-- > 0;) {
    const Var& skip = skips[i];
    h = ag::bilinear_resize(h, skip.dim(1), skip.dim(2));
    h = stage(up_[i], ag::concat0({h, skip}));
  }
  return ag::add(image, out_.forward(h));
}

Var NU2Net::forward(const Var& image) const { return apply_tail(pre_tail(image), config_.tail); }

Tensor NU2Net::enhance(const Tensor& image) const {
  ag::NoGradGuard guard;
  const Index div = config_.divisor();
  const Index h = image.dim(1), w = image.dim(2);
  const Index ph = (h + div - 1) / div * div, pw = (w + div - 1) / div * div;
  const bool padded = ph != h || pw != w;
  Tensor out = forward(Var(padded ? pad_edge(image, ph, pw) : image)).value();
  if (padded) {
    Tensor crop({3, h, w});
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) crop.at(c, y, x) = out.at(c, y, x);
    out = std::move(crop);
  }
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

void NU2Net::collect_parameters(const std::string& prefix, nn::NamedParams& out) const {
  for (std::size_t i = 0; i < down_.size(); ++i)
    for (std::size_t b = 0; b < down_[i].size(); ++b)
      down_[i][b].collect_parameters(prefix + "down." + std::to_string(i) + "." + std::to_string(b) + ".", out);
  for (std::size_t b = 0; b < bottleneck_.size(); ++b)
    bottleneck_[b].collect_parameters(prefix + "bottleneck." + std::to_string(b) + ".", out);
  for (std::size_t i = 0; i < up_.size(); ++i)
    for (std::size_t b = 0; b < up_[i].size(); ++b)
      up_[i][b].collect_parameters(prefix + "up." + std::to_string(i) + "." + std::to_string(b) + ".", out);
  out_.collect_parameters(prefix + "out.", out);
}

void save_nu2net(const std::filesystem::path& path, const NU2Net& model, const nlohmann::json& extra) {
  ckpt::save_checkpoint(path, model, kNU2NetKind, to_json(model.config()), extra);
}

NU2Net load_nu2net(const std::filesystem::path& path) {
  const nlohmann::json side = ckpt::read_sidecar(path, kNU2NetKind);
  NU2NetConfig config;
  try {
    config = nu2net_config_from_json(side.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": invalid enhancer config: " + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(path.string() + ": invalid enhancer config: " + e.what());
  }
  NU2Net model(config);
  ckpt::assign_parameters(model, ckpt::load_tensors(path), path.string());
  return model;
}

}  // namespace uranker::uie
