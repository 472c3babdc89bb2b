#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "newsrecon/article.hpp"
#include "newsrecon/labeling.hpp"
#include "newsrecon/search.hpp"

namespace newsrecon {

/// Which element-wise combinations of (image, template) feed the scorer.
/// Feature order is concatenation [img, tmpl], then img*tmpl, then |img-tmpl|.
struct Combiner {
  bool concatenation = false;
  bool multiplication = false;
  bool difference = false;

  /// Number of d-sized blocks in the feature vector.
  std::size_t parts() const { return (concatenation ? 2 : 0) + (multiplication ? 1 : 0) + (difference ? 1 : 0); }
  /// "concatenation+multiplication+difference" style.
  std::string str() const;
  static Combiner parse(std::string_view s);
  std::uint8_t bits() const;
  static Combiner from_bits(std::uint8_t b);

  friend bool operator==(const Combiner&, const Combiner&) = default;
};

/// sigmoid(w . combine(image, template) + b)
struct CrossScorer {
  std::size_t dim = 0;
  Combiner combiner;
  std::vector<float> weight;
  float bias = 0.0f;
  std::uint64_t config_hash = 0;

  /// All-zero weights: scores 0.5 everywhere.
  static CrossScorer zeros(std::size_t dim, Combiner combiner);

  std::size_t feature_size() const { return combiner.parts() * dim; }
  void validate() const;
  void features(std::span<const float> image, std::span<const float> tmpl, std::span<double> out) const;
  double logit(std::span<const float> image, std::span<const float> tmpl) const;
  /// Strictly inside (0, 1).
  float score(std::span<const float> image, std::span<const float> tmpl) const;

  friend bool operator==(const CrossScorer&, const CrossScorer&) = default;
};

float score_location(std::span<const float> image, std::span<const float> tmpl, const CrossScorer& scorer);

// magic | u16 version | u32 dim | u8 combiner bits | u64 config_hash | f32 weights | f32 bias | u64 XXH64
// "NRXL" holds the location scorer, "NRXE" the event scorer.
std::vector<std::byte> encode_scorer(const CrossScorer& s, std::string_view magic);
CrossScorer decode_scorer(std::span<const std::byte> bytes, std::string_view magic,
                          const std::string& source = "<memory>");
CrossScorer load_scorer(const std::filesystem::path& path, std::string_view magic);
void save_scorer(const CrossScorer& s, const std::filesystem::path& path, std::string_view magic);

inline constexpr std::string_view kLocScorerMagic = "NRXL";
inline constexpr std::string_view kEventScorerMagic = "NRXE";

/// "An image from k1, k2"; no keywords gives "An image from unknown location".
std::string make_loc_template(const Article& article);

struct ScoredArticle {
  std::string article_id;
  float s_bi = 0.0f;
  float s_loc = 0.0f;
  float s_comb = 0.0f;

  friend bool operator==(const ScoredArticle&, const ScoredArticle&) = default;
};

/// max(s_bi, 0) * s_loc
float combine_scores(float s_bi, float s_loc);

/// Recomputes s_comb and sorts by s_comb desc, s_bi desc, article id asc.
std::vector<ScoredArticle> rerank_by_location(std::vector<ScoredArticle> hits);

/// One training example for a cross scorer.
struct TemplatePair {
  std::string image_id;
  std::string template_text;
  float label = 0.0f;
};

/// One positive (uniform over location-relevant hits) and up to n_negative
/// irrelevant hits with pairwise-distinct, non-empty keyword sets. Nothing
/// when no hit is location-relevant.
std::vector<TemplatePair> sample_loc_training_pairs(const std::string& image_id, const std::vector<SearchHit>& hits,
                                                    const ArticleIndex& articles,
                                                    const RelevanceLabels& labels, int n_negative,
                                                    std::mt19937_64& rng);

struct CrossTrainConfig {
  int epochs = 5;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  int batch_size = 128;
  int top_k = 20;
  int n_negative = 4;
  Combiner combiner{true, false, false};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Embedded training example.
struct PairExample {
  std::span<const float> image;
  std::span<const float> tmpl;
  float label = 0.0f;
};

struct CrossEpochLog {
  int epoch = 0;
  double loss = 0.0;
  double recall = 0.0;
};

struct CrossTrainResult {
  CrossScorer scorer;
  /// Dev recall of the initial (all-zero) scorer.
  double baseline_recall = 0.0;
  int best_epoch = 0;
  std::vector<CrossEpochLog> log;
};

/// Dev metric for checkpoint selection (higher is better).
using ScorerEvaluator = std::function<double(const CrossScorer&)>;

/// Mini-batch SGD on binary cross-entropy; keeps the best-epoch scorer.
CrossTrainResult train_cross_scorer(const std::vector<PairExample>& pairs, std::size_t dim,
                                    const CrossTrainConfig& cfg, const ScorerEvaluator& evaluate);

}  // namespace newsrecon
