#include "newsrecon/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "newsrecon/binary_io.hpp"
#include "newsrecon/error.hpp"
#include "newsrecon/log.hpp"

namespace newsrecon {

RowKey parse_row_id(std::string_view id) {
  const auto hash = id.rfind('#');
  if (hash != std::string_view::npos && hash + 1 < id.size()) {
    int idx = 0;
    const auto tail = id.substr(hash + 1);
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), idx);
    if (ec == std::errc{} && ptr == tail.data() + tail.size() && idx >= 0)
      return {std::string(id.substr(0, hash)), idx};
  }
  return {std::string(id), -1};
}

std::string caption_row_id(std::string_view article_id, int caption_idx) {
  return std::string(article_id) + "#" + std::to_string(caption_idx);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

double l2_norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

void normalize(std::span<float> v) {
  const double n = l2_norm(v);
  if (n == 0.0) return;
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) / n);
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DimensionError("embedding dim must be positive");
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<float> data)
    : dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
  if (dim_ == 0) throw DimensionError("embedding dim must be positive");
  if (data_.size() != ids_.size() * dim_)
    throw DimensionError("payload has " + std::to_string(data_.size()) + " floats, expected " +
                         std::to_string(ids_.size() * dim_));
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    auto r = std::span<float>(data_.data() + i * dim_, dim_);
    const double n = l2_norm(r);
    if (!std::isfinite(n) || n == 0.0) throw FormatError("row '" + ids_[i] + "' is zero or non-finite");
    if (std::abs(n - 1.0) > kNormTolerance) {
      log::warn("row '" + ids_[i] + "' has norm " + std::to_string(n) + "; renormalized");
      normalize(r);
    }
  }
  index_rows();
}

MatrixBuilder::MatrixBuilder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DimensionError("embedding dim must be positive");
}

void MatrixBuilder::add(std::string id, std::span<const float> vec) {
  if (vec.size() != dim_)
    throw DimensionError("vector for '" + id + "' has dim " + std::to_string(vec.size()) + ", matrix dim " +
                         std::to_string(dim_));
  const std::size_t start = data_.size();
  data_.insert(data_.end(), vec.begin(), vec.end());
  normalize(std::span<float>(data_.data() + start, dim_));
  ids_.push_back(std::move(id));
}

EmbeddingMatrix MatrixBuilder::build() && { return EmbeddingMatrix(std::move(ids_), dim_, std::move(data_)); }

void EmbeddingMatrix::index_rows() {
  by_id_.clear();
  by_id_.reserve(ids_.size());
  std::vector<RowKey> keys;
  keys.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!by_id_.emplace(ids_[i], i).second) throw FormatError("duplicate id '" + ids_[i] + "'");
    keys.push_back(parse_row_id(ids_[i]));
  }
  articles_.clear();
  for (const auto& k : keys) articles_.push_back(k.article_id);
  std::sort(articles_.begin(), articles_.end());
  articles_.erase(std::unique(articles_.begin(), articles_.end()), articles_.end());
  row_article_.resize(ids_.size());
  row_caption_.resize(ids_.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    row_article_[i] = static_cast<std::size_t>(
        std::lower_bound(articles_.begin(), articles_.end(), keys[i].article_id) - articles_.begin());
    row_caption_[i] = keys[i].caption_idx;
  }
}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingMatrix::at(std::string_view id) const {
  const auto r = find(id);
  if (!r) throw LookupError("no embedding for id '" + std::string(id) + "'");
  return row(*r);
}

std::vector<std::byte> encode_matrix(const EmbeddingMatrix& m) {
  io::ByteWriter w;
  w.put_magic("NREC");
  w.put_u16(1);
  w.put_u32(static_cast<std::uint32_t>(m.dim()));
  w.put_u64(m.rows());
  w.put_f32s(m.data());
  for (const auto& id : m.ids()) w.put_string(id);
  w.put_checksum();
  return w.take();
}

EmbeddingMatrix decode_matrix(std::span<const std::byte> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("NREC");
  if (const auto version = r.u16(); version != 1) r.fail("unsupported NREC version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  if (dim == 0) r.fail("dim must be positive");
  const std::uint64_t rows = r.u64();
  const std::uint64_t floats = rows * dim;
  if (rows != 0 && floats / rows != dim) r.fail("rows*dim overflows");
  if (r.remaining() / 4 < floats) {
    const std::uint64_t complete = r.remaining() / 4 / dim;
    r.fail("truncated payload: header declares " + std::to_string(rows) + " rows of dim " + std::to_string(dim) +
           ", only " + std::to_string(complete) + " complete rows present");
  }
  std::vector<float> data(floats);
  r.f32s(data, "vector payload");
  std::vector<std::string> ids;
  ids.reserve(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    if (r.remaining() <= 8)
      r.fail("id block has " + std::to_string(i) + " ids, header declares " + std::to_string(rows));
    ids.push_back(r.string("id " + std::to_string(i)));
  }
  r.verify_checksum();
  r.expect_end();
  try {
    return EmbeddingMatrix(std::move(ids), dim, std::move(data));
  } catch (const FormatError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
  return decode_matrix(io::read_file(path), path.string());
}

void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  io::write_file(path, encode_matrix(m));
}

}  // namespace newsrecon
