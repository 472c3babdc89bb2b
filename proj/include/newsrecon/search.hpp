#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "newsrecon/embedding.hpp"

namespace newsrecon {

struct SearchHit {
  std::string article_id;
  int caption_idx = -1;
  float score = 0.0f;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Optional per-row admission mask (1 = searchable); empty means all rows.
using RowMask = std::vector<unsigned char>;

/// Exact cosine top-k at article level. Each article scores the max over its
/// caption rows and appears once. Order: score desc, article id asc, caption
/// idx asc. Returns min(k, admitted articles) hits.
std::vector<SearchHit> top_k(std::span<const float> query, const EmbeddingMatrix& matrix, std::size_t k,
                             const RowMask& mask = {});

/// Same as top_k, but single-threaded throughout.
std::vector<SearchHit> top_k_serial(std::span<const float> query, const EmbeddingMatrix& matrix,
                                    std::size_t k, const RowMask& mask = {});

/// One top_k per query row, queries spread over workers; output order follows
/// the query rows.
std::vector<std::vector<SearchHit>> top_k_batch(const EmbeddingMatrix& queries, const EmbeddingMatrix& matrix,
                                                std::size_t k, const RowMask& mask = {});

/// Mask admitting only rows whose article id is in `allowed` (sorted ascending).
RowMask mask_for_articles(const EmbeddingMatrix& matrix, const std::vector<std::string>& allowed_sorted);

}  // namespace newsrecon
