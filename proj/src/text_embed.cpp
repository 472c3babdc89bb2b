#include "newsrecon/text_embed.hpp"

#include <cmath>

#include "newsrecon/error.hpp"
#include "newsrecon/hash.hpp"

namespace newsrecon {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<float> fake_unit_vector(std::string_view payload, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw PreconditionError("embedding dimension must be positive");
  std::uint64_t state = xxh64(payload, seed);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    x = 2.0 * u - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(norm > 0 ? v[i] / norm : 0.0);
  return out;
}

std::string template_key(std::string_view text) { return hex64(xxh64(text)); }

TemplateCache::TemplateCache(std::size_t dim, std::shared_ptr<const TextEmbedder> fallback)
    : dim_(dim), fallback_(std::move(fallback)) {
  if (dim_ == 0) throw PreconditionError("template cache dimension must be positive");
  if (fallback_ && fallback_->dim() != dim_)
    throw DimensionError("template embedder has dim " + std::to_string(fallback_->dim()) + ", cache expects " +
                         std::to_string(dim_));
}

std::unique_ptr<TemplateCache> TemplateCache::open(const std::filesystem::path& path, std::size_t dim,
                                                   std::shared_ptr<const TextEmbedder> fallback) {
  auto cache = std::make_unique<TemplateCache>(dim, std::move(fallback));
  if (std::filesystem::exists(path)) {
    const auto m = load_matrix(path);
    if (m.dim() != dim)
      throw DimensionError("template cache " + path.string() + " has dim " + std::to_string(m.dim()) +
                           ", expected " + std::to_string(dim));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const auto r = m.row(i);
      cache->rows_.emplace(m.ids()[i], std::vector<float>(r.begin(), r.end()));
    }
  }
  return cache;
}

std::span<const float> TemplateCache::get(const std::string& text) {
  const std::string key = template_key(text);
  {
    std::lock_guard lock(mu_);
    if (const auto it = rows_.find(key); it != rows_.end()) return it->second;
    if (!fallback_) throw LookupError("template not in cache: '" + text + "'");
  }
  auto v = fallback_->embed(text);
  if (v.size() != dim_) throw DimensionError("template embedder returned a vector of the wrong size");
  normalize(v);
  std::lock_guard lock(mu_);
  const auto [it, inserted] = rows_.emplace(key, std::move(v));
  if (inserted) ++misses_;
  return it->second;
}

std::size_t TemplateCache::size() const {
  std::lock_guard lock(mu_);
  return rows_.size();
}

std::size_t TemplateCache::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

EmbeddingMatrix TemplateCache::to_matrix() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  std::vector<float> data;
  for (const auto& [key, v] : rows_) {
    ids.push_back(key);
    data.insert(data.end(), v.begin(), v.end());
  }
  return EmbeddingMatrix(std::move(ids), dim_, std::move(data));
}

void TemplateCache::save(const std::filesystem::path& path) const { save_matrix(to_matrix(), path); }

}  // namespace newsrecon
