#include "newsrecon/search.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

#include "newsrecon/error.hpp"
#include "newsrecon/kernels.hpp"

namespace newsrecon {
namespace {

struct Best {
  float score = -std::numeric_limits<float>::infinity();
  int caption = -1;
  bool seen = false;
};

bool hit_before(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.article_id != b.article_id) return a.article_id < b.article_id;
  return a.caption_idx < b.caption_idx;
}

std::vector<SearchHit> select(std::span<const double> scores, const EmbeddingMatrix& matrix, std::size_t k,
                              const RowMask& mask) {
  std::vector<Best> best(matrix.articles().size());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    if (!mask.empty() && !mask[r]) continue;
    const auto s = static_cast<float>(scores[r]);
    Best& b = best[matrix.row_article(r)];
    const int cap = matrix.row_caption(r);
    if (!b.seen || s > b.score || (s == b.score && cap < b.caption)) b = {s, cap, true};
  }
  std::vector<SearchHit> hits;
  for (std::size_t a = 0; a < best.size(); ++a)
    if (best[a].seen) hits.push_back({matrix.articles()[a], best[a].caption, best[a].score});
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), hit_before);
  hits.resize(n);
  return hits;
}

void check(std::span<const float> query, const EmbeddingMatrix& matrix, const RowMask& mask) {
  if (query.size() != matrix.dim())
    throw DimensionError("query dim " + std::to_string(query.size()) + " != matrix dim " +
                         std::to_string(matrix.dim()));
  if (!mask.empty() && mask.size() != matrix.rows()) throw DimensionError("row mask size does not match matrix");
}

}  // namespace

std::vector<SearchHit> top_k(std::span<const float> query, const EmbeddingMatrix& matrix, std::size_t k,
                             const RowMask& mask) {
  check(query, matrix, mask);
  std::vector<double> scores(matrix.rows());
  kernels::dot_rows(matrix.data(), matrix.dim(), query, scores);
  return select(scores, matrix, k, mask);
}

std::vector<SearchHit> top_k_serial(std::span<const float> query, const EmbeddingMatrix& matrix, std::size_t k,
                                    const RowMask& mask) {
  check(query, matrix, mask);
  std::vector<double> scores(matrix.rows());
  kernels::serial::dot_rows(matrix.data(), matrix.dim(), query, scores);
  return select(scores, matrix, k, mask);
}

std::vector<std::vector<SearchHit>> top_k_batch(const EmbeddingMatrix& queries, const EmbeddingMatrix& matrix,
                                                std::size_t k, const RowMask& mask) {
  if (queries.dim() != matrix.dim()) throw DimensionError("query matrix dim does not match index dim");
  std::vector<std::vector<SearchHit>> out(queries.rows());
  const auto n = static_cast<std::int64_t>(queries.rows());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t q = 0; q < n; ++q) {
    const auto uq = static_cast<std::size_t>(q);
    out[uq] = top_k_serial(queries.row(uq), matrix, k, mask);
  }
  return out;
}

RowMask mask_for_articles(const EmbeddingMatrix& matrix, const std::vector<std::string>& allowed_sorted) {
  RowMask mask(matrix.rows(), 0);
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const auto& a = matrix.articles()[matrix.row_article(r)];
    mask[r] = std::binary_search(allowed_sorted.begin(), allowed_sorted.end(), a) ? 1 : 0;
  }
  return mask;
}

}  // namespace newsrecon
