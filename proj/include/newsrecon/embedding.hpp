#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace newsrecon {

/// Tolerance on the stored L2 norm of every row.
inline constexpr double kNormTolerance = 1e-4;

/// Caption rows are keyed "articleId#captionIdx"; any other id maps to the
/// whole article with caption_idx = -1.
struct RowKey {
  std::string article_id;
  int caption_idx = -1;
};
RowKey parse_row_id(std::string_view id);
std::string caption_row_id(std::string_view article_id, int caption_idx);

/// Row-major f32 matrix of unit vectors keyed by entity id. Immutable once
/// built, so concurrent readers need no locking.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(std::size_t dim = 1);
  /// Validates shape and id uniqueness; rows off the unit sphere are
  /// renormalized with a warning.
  EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<float> data);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws LookupError naming the id.
  std::span<const float> at(std::string_view id) const;

  /// Distinct article ids in ascending order, and each row's index into it.
  const std::vector<std::string>& articles() const { return articles_; }
  std::size_t row_article(std::size_t row) const { return row_article_[row]; }
  int row_caption(std::size_t row) const { return row_caption_[row]; }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  void index_rows();

  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::string> articles_;
  std::vector<std::size_t> row_article_;
  std::vector<int> row_caption_;
};

/// Accumulates rows (normalizing each) and produces an indexed matrix.
class MatrixBuilder {
 public:
  explicit MatrixBuilder(std::size_t dim);
  void add(std::string id, std::span<const float> vec);
  std::size_t rows() const { return ids_.size(); }
  EmbeddingMatrix build() &&;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
};

/// In-place L2 normalization; zero vectors are left unchanged.
void normalize(std::span<float> v);
double l2_norm(std::span<const float> v);
double dot(std::span<const float> a, std::span<const float> b);

// NREC binary format:
//   "NREC" | u16 version=1 | u32 dim | u64 rows | rows*dim f32
//   | rows * (u32 len, utf-8 id) | u64 XXH64(seed 0) of all preceding bytes
// All integers and floats little-endian.
std::vector<std::byte> encode_matrix(const EmbeddingMatrix& m);
EmbeddingMatrix decode_matrix(std::span<const std::byte> bytes, const std::string& source = "<memory>");

EmbeddingMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path);

}  // namespace newsrecon
