#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "newsrecon/embedding.hpp"

namespace newsrecon {

/// Seeded pseudo-random unit vector derived from the payload text. Matches the
/// sidecar's --fake mode so engine CI runs without model weights.
std::vector<float> fake_unit_vector(std::string_view payload, std::size_t dim, std::uint64_t seed = 0);

/// Frozen text encoder as seen by the engine.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  /// Unit vector for `text`; must be deterministic and thread-safe.
  virtual std::vector<float> embed(const std::string& text) const = 0;
};

class FakeTextEmbedder final : public TextEmbedder {
 public:
  explicit FakeTextEmbedder(std::size_t dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  std::vector<float> embed(const std::string& text) const override { return fake_unit_vector(text, dim_, seed_); }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Cache row id of a template: hex XXH64 of its text.
std::string template_key(std::string_view text);

/// Template text -> embedding, backed by an NREC file. Misses go to the
/// fallback embedder; without one a miss raises LookupError. Safe for
/// concurrent use; returned spans stay valid for the cache's lifetime.
class TemplateCache {
 public:
  TemplateCache(std::size_t dim, std::shared_ptr<const TextEmbedder> fallback);
  /// Starts from the rows of an existing cache file when it exists.
  static std::unique_ptr<TemplateCache> open(const std::filesystem::path& path, std::size_t dim,
                                             std::shared_ptr<const TextEmbedder> fallback);

  std::size_t dim() const { return dim_; }
  std::span<const float> get(const std::string& text);
  std::size_t size() const;
  std::size_t misses() const;

  /// Rows sorted by key, so identical contents give identical files.
  EmbeddingMatrix to_matrix() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t dim_;
  std::shared_ptr<const TextEmbedder> fallback_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<float>> rows_;
  std::size_t misses_ = 0;
};

}  // namespace newsrecon
