#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "newsrecon/biencoder.hpp"
#include "newsrecon/cluster_event.hpp"
#include "newsrecon/date.hpp"
#include "newsrecon/metrics.hpp"
#include "newsrecon/rerank_loc.hpp"

namespace newsrecon {

/// How template texts become vectors when the cache misses.
enum class TemplateEmbedder { fake, world, cache_only };
std::string to_string(TemplateEmbedder e);
TemplateEmbedder parse_template_embedder(std::string_view s);

/// Every tunable of the engine. Loaded from a flat `key = value` file;
/// unknown keys and malformed values are rejected.
struct Config {
  std::uint64_t seed = 0;
  int k_loc = 20;
  int k_evt = 50;
  int n_window_days = 7;
  int n_min_size = 3;
  int min_clusters = 2;

  BiEncoderTrainConfig biencoder;
  CrossTrainConfig xenc_loc;
  CrossTrainConfig xenc_evt{15, 1e-3, 1e-5, 128, 50, 4, Combiner{true, true, true}, 0};
  MetricConfig metrics;

  std::optional<Date> variant_max_date;
  std::string variant_name = "full";

  TemplateEmbedder template_embedder = TemplateEmbedder::fake;

  // Artifact paths; relative paths resolve against the config file's folder.
  std::map<std::string, std::filesystem::path> paths;

  Config();

  void validate() const;
  ClusterRules cluster_rules() const { return {n_window_days, n_min_size}; }

  /// Applies one key; throws ConfigError naming the key on failure.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base = {});
  static Config parse(std::string_view text, const std::filesystem::path& base = {});
  static Config load(const std::filesystem::path& path);
  /// Canonical text of every key, sorted; parse(to_text()) round-trips.
  std::string to_text() const;

  /// Path for `name` (e.g. "corpus"); throws ConfigError when unset.
  const std::filesystem::path& path(const std::string& name) const;
  bool has_path(const std::string& name) const;

  /// Fingerprints of the settings each trained artifact depends on.
  std::uint64_t biencoder_hash() const;
  std::uint64_t loc_scorer_hash() const;
  std::uint64_t event_scorer_hash() const;
};

/// Artifact path keys understood by `path.<name>`.
const std::vector<std::string>& known_path_keys();

}  // namespace newsrecon
