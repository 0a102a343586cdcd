#include "uranker/uranker_config.hpp"

#include <charconv>
#include <sstream>

#include "uranker/errors.hpp"

namespace uranker::core {

std::string to_string(ConnectionMode m) {
  switch (m) {
    case ConnectionMode::Dynamic: return "dynamic";
    case ConnectionMode::Direct: return "direct";
    case ConnectionMode::Neighbour: return "neighbour";
    case ConnectionMode::Dense: return "dense";
  }
  return "?";
}

std::string to_string(AttentionKind k) { return k == AttentionKind::Conv ? "conv" : "plain"; }

ConnectionMode parse_connection_mode(const std::string& s) {
  if (s == "dynamic") return ConnectionMode::Dynamic;
  if (s == "direct") return ConnectionMode::Direct;
  if (s == "neighbour" || s == "neighbor") return ConnectionMode::Neighbour;
  if (s == "dense") return ConnectionMode::Dense;
  throw ConfigError("unknown connection_mode '" + s + "' (expected dynamic|direct|neighbour|dense)");
}

AttentionKind parse_attention_kind(const std::string& s) {
  if (s == "conv") return AttentionKind::Conv;
  if (s == "plain") return AttentionKind::Plain;
  throw ConfigError("unknown attention kind '" + s + "' (expected conv|plain)");
}

void URankerConfig::validate() const {
  if (num_scales < 1) throw ConfigError("num_scales must be >= 1");
  if (static_cast<int>(widths.size()) != num_scales || static_cast<int>(heads.size()) != num_scales) {
    throw ConfigError("widths and heads need one entry per scale (" + std::to_string(num_scales) + ")");
  }
  for (int s = 0; s < num_scales; ++s) {
    if (widths[s] < 1 || heads[s] < 1) throw ConfigError("widths and heads must be positive");
    if (widths[s] % heads[s]) {
      throw ConfigError("width " + std::to_string(widths[s]) + " not divisible by " + std::to_string(heads[s]) +
                        " heads at scale " + std::to_string(s));
    }
  }
  if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
  if (serial_depth < 1) throw ConfigError("serial_depth must be >= 1");
  if (dcpb_groups < 0) throw ConfigError("dcpb_groups must be >= 0");
  if (parallel_scales < 1 || parallel_scales > num_scales) {
    throw ConfigError("parallel_scales must be in [1, num_scales]");
  }
  if (mlp_ratio <= 0.0) throw ConfigError("mlp_ratio must be positive");
  if (hist_bins < 2) throw ConfigError("hist_bins must be >= 2");
}

Index URankerConfig::total_stride() const {
  Index s = 1;
  for (int i = 0; i < num_scales; ++i) s *= stride_of(i);
  return s;
}

URankerConfig URankerConfig::toy() {
  URankerConfig c;
  c.num_scales = 2;
  c.widths = {8, 16};
  c.heads = {2, 2};
  c.patch_size = 4;
  c.serial_depth = 1;
  c.dcpb_groups = 1;
  c.parallel_scales = 2;
  c.mlp_ratio = 2.0;
  c.hist_bins = 32;
  return c;
}

nlohmann::json to_json(const URankerConfig& c) {
  return {
      {"num_scales", c.num_scales},
      {"widths", c.widths},
      {"heads", c.heads},
      {"patch_size", c.patch_size},
      {"serial_depth", c.serial_depth},
      {"dcpb_groups", c.dcpb_groups},
      {"parallel_scales", c.parallel_scales},
      {"mlp_ratio", c.mlp_ratio},
      {"connection_mode", to_string(c.connection)},
      {"attention", to_string(c.attention)},
      {"hist_bins", c.hist_bins},
      {"use_histogram", c.use_histogram},
  };
}

URankerConfig uranker_config_from_json(const nlohmann::json& j) {
  URankerConfig c;
  try {
    c.num_scales = j.at("num_scales").get<int>();
    c.widths = j.at("widths").get<std::vector<Index>>();
    c.heads = j.at("heads").get<std::vector<int>>();
    c.patch_size = j.at("patch_size").get<Index>();
    c.serial_depth = j.at("serial_depth").get<int>();
    c.dcpb_groups = j.at("dcpb_groups").get<int>();
    c.parallel_scales = j.at("parallel_scales").get<int>();
    c.mlp_ratio = j.at("mlp_ratio").get<double>();
    c.connection = parse_connection_mode(j.at("connection_mode").get<std::string>());
    c.attention = parse_attention_kind(j.at("attention").get<std::string>());
    c.hist_bins = j.at("hist_bins").get<Index>();
    c.use_histogram = j.at("use_histogram").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed URanker config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<Index> parse_index_list(const std::string& key, const std::string& value) {
  std::vector<Index> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_long(key, item));
  }
  if (out.empty()) throw ConfigError("empty list for '" + key + "'");
  return out;
}

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}
}  // namespace

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
}

long parse_long(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + value + "'");
}

bool apply_config_key(URankerConfig& c, const std::string& key, const std::string& value) {
  if (key == "num_scales") {
    c.num_scales = static_cast<int>(parse_long(key, value));
  } else if (key == "widths") {
    c.widths = parse_index_list(key, value);
  } else if (key == "heads") {
    c.heads.clear();
    for (Index h : parse_index_list(key, value)) c.heads.push_back(static_cast<int>(h));
  } else if (key == "patch_size") {
    c.patch_size = parse_long(key, value);
  } else if (key == "serial_depth") {
    c.serial_depth = static_cast<int>(parse_long(key, value));
  } else if (key == "dcpb_groups") {
    c.dcpb_groups = static_cast<int>(parse_long(key, value));
  } else if (key == "parallel_scales") {
    c.parallel_scales = static_cast<int>(parse_long(key, value));
  } else if (key == "mlp_ratio") {
    c.mlp_ratio = parse_double(key, value);
  } else if (key == "connection_mode") {
    c.connection = parse_connection_mode(trim(value));
  } else if (key == "attention") {
    c.attention = parse_attention_kind(trim(value));
  } else if (key == "hist_bins") {
    c.hist_bins = parse_long(key, value);
  } else if (key == "use_histogram") {
    c.use_histogram = parse_bool(key, value);
  } else {
    return false;
  }
  return true;
}

}  // namespace uranker::core
