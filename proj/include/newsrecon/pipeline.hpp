#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsrecon/article.hpp"
#include "newsrecon/biencoder.hpp"
#include "newsrecon/cluster_event.hpp"
#include "newsrecon/config.hpp"
#include "newsrecon/embedding.hpp"
#include "newsrecon/labeling.hpp"
#include "newsrecon/metrics.hpp"
#include "newsrecon/rerank_loc.hpp"
#include "newsrecon/search.hpp"
#include "newsrecon/text_embed.hpp"

namespace newsrecon {

/// Everything the engine reads: corpus, query images, labels, embeddings.
/// Article pointers in `index` refer into `corpus`, so the dataset moves but
/// never copies.
struct Dataset {
  CorpusStore corpus;
  ArticleIndex index;
  std::vector<ImageRecord> images;
  LabelStore labels;
  EmbeddingMatrix image_embeddings;
  /// Caption rows ("article#i") or abstract rows (article id).
  EmbeddingMatrix text_embeddings;
  std::optional<EmbeddingMatrix> article_image_embeddings;
  Gazetteer gazetteer;

  Dataset() = default;
  Dataset(const Dataset&) = delete;
  Dataset& operator=(const Dataset&) = delete;
  Dataset(Dataset&&) = default;
  Dataset& operator=(Dataset&&) = default;

  /// Reads every path the config names. Labels are computed against the
  /// active variant when path.labels is absent.
  static Dataset load(const Config& cfg);

  void reindex() { index = index_articles(corpus); }
  const ImageRecord& image(const std::string& id) const;
  /// Image ids of a split, in file order.
  std::vector<std::string> image_ids(Split split) const;
};

/// Article ids of the configured corpus variant, sorted.
std::vector<std::string> active_article_ids(const Dataset& data, const Config& cfg);

/// The three trained stages.
struct Models {
  HeadPair heads;
  CrossScorer location;
  CrossScorer event;
};

/// Loads heads and scorers from the configured paths and rejects checkpoints
/// trained under different settings unless allow_stale is set.
Models load_models(const Config& cfg, bool allow_stale = false);
/// Just the bi-encoder heads, with the same staleness check.
HeadPair load_trained_heads(const Config& cfg, bool allow_stale = false);

/// Builds the template embedder the config asks for; null for cache-only.
std::shared_ptr<const TextEmbedder> make_template_embedder(const Config& cfg, std::size_t dim);
/// Opens path.template_cache (or an in-memory cache) backed by that embedder.
std::unique_ptr<TemplateCache> open_template_cache(const Config& cfg, std::size_t dim);

struct StageTimings {
  double biencoder = 0.0;
  double location = 0.0;
  double clustering = 0.0;
  double event = 0.0;
};

struct RetrievalResult {
  std::string image_id;
  /// Bi-encoder top k_evt, by s_bi.
  std::vector<SearchHit> candidates;
  std::vector<ScoredArticle> location_ranking;
  std::vector<ArticleCluster> clusters;
  std::vector<std::string> event_ranking;
  StageTimings timings;

  std::vector<std::string> location_ids() const;
};

/// Rankings and clusters; timings only when asked, since they vary run to run.
nlohmann::json to_json(const RetrievalResult& r, bool with_timings = false);
/// Reads back the rankings written by to_json; clusters and timings are not
/// restored. Throws FormatError on a malformed record.
RetrievalResult result_from_json(const nlohmann::json& j);
/// One to_json record per line.
std::vector<RetrievalResult> load_results(const std::filesystem::path& path);

/// One query image through retrieval, location reranking, clustering and
/// event reranking.
class Engine {
 public:
  /// `active` lists the searchable article ids (sorted).
  Engine(const Dataset& data, const Config& cfg, Models models, TemplateCache& templates,
         std::vector<std::string> active);

  RetrievalResult retrieve(const std::string& image_id) const;
  RetrievalResult retrieve(std::span<const float> image, const std::string& image_id) const;
  /// Queries spread over worker threads; output follows the input order.
  std::vector<RetrievalResult> run_batch(const std::vector<std::string>& image_ids) const;

  /// Bi-encoder top-k over the active articles.
  std::vector<SearchHit> candidates(std::span<const float> image, std::size_t k) const;
  const Models& models() const { return models_; }
  const Config& config() const { return cfg_; }
  const EmbeddingMatrix& projected_text() const { return projected_; }

 private:
  const Dataset& data_;
  const Config& cfg_;
  Models models_;
  TemplateCache& templates_;
  EmbeddingMatrix projected_;
  RowMask mask_;
};

/// Location-reranked candidates (first k_loc hits) for one image.
std::vector<ScoredArticle> rerank_candidates(std::span<const float> image, const std::vector<SearchHit>& hits,
                                             std::size_t k_loc, const CrossScorer& scorer,
                                             const ArticleIndex& articles, TemplateCache& templates);

/// Fraction of images whose top-1 is location-relevant, reranked or in s_bi
/// order when `scorer` is null. Images with no location-relevant article are
/// left out.
double location_recall_at_1(const Engine& engine, const Dataset& data, const std::vector<std::string>& image_ids,
                            const CrossScorer* scorer, TemplateCache& templates);
/// Same for the event ranking against event-relevant articles.
double event_recall_at_1(const Engine& engine, const Dataset& data, const std::vector<std::string>& image_ids,
                         const CrossScorer* scorer, TemplateCache& templates);

BiEncoderTrainResult train_biencoder_stage(const Dataset& data, const Config& cfg,
                                           const std::vector<std::string>& active);
CrossTrainResult train_location_stage(const Dataset& data, const Config& cfg, const HeadPair& heads,
                                      TemplateCache& templates, const std::vector<std::string>& active);
CrossTrainResult train_event_stage(const Dataset& data, const Config& cfg, const HeadPair& heads,
                                   TemplateCache& templates, const std::vector<std::string>& active);

MetricsReport evaluate_run(const std::vector<RetrievalResult>& results, const Dataset& data, const Config& cfg);

enum class PromptTask { date, location };
std::string to_string(PromptTask t);
PromptTask parse_prompt_task(std::string_view s);

/// Evidence prompt templates (evidence_prompt.txt and the two question files).
struct EvidencePrompt {
  std::string body;
  std::string date_question;
  std::string location_question;

  static EvidencePrompt load(const std::filesystem::path& dir);
};

/// Fills the evidence prompt with the top_n articles of the task's ranking.
/// Throws PreconditionError when that ranking is empty.
std::string render_evidence_prompt(const RetrievalResult& result, PromptTask task, const std::string& max_date,
                                   const ArticleIndex& articles, const EvidencePrompt& prompt,
                                   std::size_t top_n = 3);

}  // namespace newsrecon
