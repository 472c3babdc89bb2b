#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "newsrecon/embedding.hpp"
#include "newsrecon/labeling.hpp"
#include "newsrecon/search.hpp"

namespace newsrecon {

/// Linear map x -> x * weight + bias, followed by L2 normalization.
struct ProjectionHead {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<float> weight;  // in_dim x out_dim, row-major
  std::vector<float> bias;    // out_dim

  /// Identity when in_dim == out_dim, truncated identity otherwise.
  static ProjectionHead identity(std::size_t in_dim, std::size_t out_dim);

  void validate() const;
  /// Projects and normalizes one vector.
  std::vector<float> apply(std::span<const float> x) const;
  /// Projects every row; ids are kept.
  EmbeddingMatrix apply(const EmbeddingMatrix& m) const;

  friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;
};

struct HeadPair {
  ProjectionHead image;
  ProjectionHead text;
  /// Fingerprint of the configuration the heads were trained under.
  std::uint64_t config_hash = 0;

  static HeadPair identity(std::size_t image_dim, std::size_t text_dim, std::size_t out_dim = 0);
  void validate() const;

  friend bool operator==(const HeadPair&, const HeadPair&) = default;
};

// "NRHD" | u16 version | u32 image_in | u32 text_in | u32 out | u64 config_hash
//   | image W, image b | text W, text b (f32) | u64 XXH64 of preceding bytes
std::vector<std::byte> encode_heads(const HeadPair& h);
HeadPair decode_heads(std::span<const std::byte> bytes, const std::string& source = "<memory>");
HeadPair load_heads(const std::filesystem::path& path);
void save_heads(const HeadPair& h, const std::filesystem::path& path);

enum class TextField { caption, abstract };
std::string to_string(TextField f);
TextField parse_text_field(std::string_view s);

struct BiEncoderTrainConfig {
  int epochs = 10;
  double learning_rate = 3e-5;
  int batch_size = 256;
  double n_random = 0.5;
  double temperature = 0.07;
  double momentum = 0.0;
  double weight_decay = 0.0;
  int recall_k = 100;
  /// Output width of both heads; 0 keeps the text dimension.
  std::size_t out_dim = 0;
  TextField input_field = TextField::caption;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One (image, text row) training pair. Random pairs use an article's own
/// image, looked up by article id in the article-image matrix.
struct TrainPair {
  std::string image_id;
  std::string text_row_id;
  bool random = false;

  friend bool operator==(const TrainPair&, const TrainPair&) = default;
};

struct TrainBatch {
  std::vector<TrainPair> pairs;
  /// Articles event-relevant to some image already in the batch; their text
  /// rows may not be added for another image.
  std::set<std::string> forbidden;
  std::size_t n_supervised = 0;
  std::size_t n_random = 0;
};

/// Precomputed sampling pools for build_batch.
class BatchSource {
 public:
  /// `text` rows are captions ("article#i") or abstracts (article id).
  /// Train images with no event-relevant article present in `text` are
  /// dropped. Random-pair articles must have a row in `article_images` and be
  /// event-relevant to no image in `labels`.
  BatchSource(const LabelStore& labels, const std::vector<std::string>& train_image_ids,
              const EmbeddingMatrix& text, const EmbeddingMatrix* article_images);

  const std::vector<std::string>& images() const { return images_; }
  const std::vector<std::string>& random_pool() const { return random_pool_; }
  const std::set<std::string>& event_relevant(const std::string& image_id) const;
  /// Text row ids of an article.
  const std::vector<std::string>& rows_of(const std::string& article_id) const;
  /// Event-relevant articles that have text rows, sorted.
  const std::vector<std::string>& candidates(const std::string& image_id) const;

 private:
  const LabelStore& labels_;
  std::vector<std::string> images_;
  std::vector<std::string> random_pool_;
  std::map<std::string, std::vector<std::string>> rows_;
  std::map<std::string, std::vector<std::string>> candidates_;
};

/// Supervised pairs first (ceil((1 - n_random) * B)), then random self-pairs
/// (floor(n_random * B)). No text row in the result is event-relevant to two
/// images of the batch. Images and random articles are tried in shuffled
/// order, with the image pass redrawn up to 16 times when it falls short; a
/// batch that still cannot be filled is returned short with a warning.
TrainBatch build_batch(const BatchSource& source, std::size_t batch_size, double n_random, std::mt19937_64& rng);

/// Checks the forbidden-caption invariant; returns the first violation.
std::optional<std::string> batch_violation(const TrainBatch& batch, const BatchSource& source);

struct InfoNceResult {
  double loss = 0.0;
  std::vector<double> grad_image;    // B x d
  std::vector<double> grad_caption;  // B x d
};

/// Symmetric InfoNCE over S = images * captions^T / tau, averaged over both
/// directions; row i of each input is a positive pair.
InfoNceResult info_nce_loss(std::span<const double> images, std::span<const double> captions, std::size_t batch,
                            std::size_t dim, double temperature);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double recall = 0.0;
};

struct BiEncoderTrainResult {
  HeadPair heads;
  /// Dev recall of the initial (identity) heads.
  double baseline_recall = 0.0;
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

struct BiEncoderData {
  const EmbeddingMatrix& query_images;  // train and dev query images
  const EmbeddingMatrix& text;          // caption or abstract rows
  const EmbeddingMatrix* article_images = nullptr;
  const LabelStore& labels;
  std::vector<std::string> train_ids;
  std::vector<std::string> dev_ids;
};

/// Fraction of images with at least one event-relevant article in the top k.
double event_recall_at_k(const HeadPair& heads, const EmbeddingMatrix& query_images, const EmbeddingMatrix& text,
                         const LabelStore& labels, const std::vector<std::string>& image_ids, std::size_t k);

BiEncoderTrainResult train_biencoder(const BiEncoderData& data, const BiEncoderTrainConfig& cfg);

/// Projects the image, searches the projected text matrix.
std::vector<SearchHit> retrieve_event_candidates(std::span<const float> image_embedding, const HeadPair& heads,
                                                 const EmbeddingMatrix& projected_text, std::size_t k,
                                                 const RowMask& mask = {});

}  // namespace newsrecon
