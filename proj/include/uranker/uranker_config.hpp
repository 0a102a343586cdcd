#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "uranker/tensor.hpp"

namespace uranker::core {

/// How parallel blocks exchange features across scales.
enum class ConnectionMode {
  Dynamic,    // learnable amplitude per (target, source) pair, initialised to 0
  Direct,     // no exchange
  Neighbour,  // adjacent scales only, unit weight
  Dense,      // every other scale, unit weight
};

enum class AttentionKind {
  Conv,   // factorised attention + depthwise-conv relative position term
  Plain,  // softmax multi-head self-attention, no positional terms
};

using uranker::to_string;
std::string to_string(ConnectionMode m);
std::string to_string(AttentionKind k);
ConnectionMode parse_connection_mode(const std::string& s);
AttentionKind parse_attention_kind(const std::string& s);

struct URankerConfig {
  int num_scales = 4;
  std::vector<Index> widths{64, 128, 256, 320};
  std::vector<int> heads{8, 8, 8, 8};
  Index patch_size = 4;  // stride of the first patch embedding; later ones use 2
  int serial_depth = 2;  // attention + feed-forward layers per serial block
  int dcpb_groups = 2;
  int parallel_scales = 3;  // the coarsest this-many scales enter the parallel groups
  double mlp_ratio = 4.0;
  ConnectionMode connection = ConnectionMode::Dynamic;
  AttentionKind attention = AttentionKind::Conv;
  Index hist_bins = 64;
  bool use_histogram = true;

  /// Throws ConfigError on inconsistent fields.
  void validate() const;
  Index total_stride() const;
  Index stride_of(int scale) const { return scale == 0 ? patch_size : 2; }
  int first_parallel_scale() const { return num_scales - parallel_scales; }
  /// Class token plus (optionally) the histogram token.
  Index special_tokens() const { return use_histogram ? 2 : 1; }

  /// Two scales, tiny widths; used for gradient checks and desk-scale training.
  static URankerConfig toy();
};

nlohmann::json to_json(const URankerConfig& c);
URankerConfig uranker_config_from_json(const nlohmann::json& j);

/// Applies one flat `key = value` setting. Returns false for keys that do
/// not belong to this config; throws ConfigError on malformed values.
bool apply_config_key(URankerConfig& c, const std::string& key, const std::string& value);

/// Helpers shared by the flat key-value config readers.
std::vector<Index> parse_index_list(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
long parse_long(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

}  // namespace uranker::core
