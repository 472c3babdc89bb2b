#pragma once

#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsrecon/article.hpp"
#include "newsrecon/date.hpp"
#include "newsrecon/labeling.hpp"
#include "newsrecon/rerank_loc.hpp"
#include "newsrecon/search.hpp"

namespace newsrecon {

/// Articles from the same retrieved list that plausibly report one event.
struct ArticleCluster {
  /// Members by descending s_bi (ties by id).
  std::vector<std::string> article_ids;
  Date start_date;
  Date end_date;
  /// Keywords every member carries.
  std::set<std::string> shared_locations;
  std::optional<float> s_evt;
  std::string representative_id;

  friend bool operator==(const ArticleCluster&, const ArticleCluster&) = default;
};

nlohmann::json to_json(const ArticleCluster& c);

struct ClusterRules {
  int n_window = 7;
  int n_min_size = 3;

  /// Largest allowed end - start, in days.
  int max_span_days() const { return 2 * n_window; }
};

/// Why `ids` would not be a valid cluster (shared keyword, span, size), or
/// nothing when it is.
std::optional<std::string> cluster_violation(const std::vector<std::string>& ids, const ArticleIndex& articles,
                                             const ClusterRules& rules);

/// Greedy first-fit over hits in descending s_bi: each article joins the first
/// group whose keyword intersection it shares and whose span it keeps within
/// 2 * n_window days, else starts a group. Groups under n_min_size dissolve;
/// the dissolved articles are then offered to the surviving clusters until
/// none can join.
std::vector<ArticleCluster> form_clusters(const std::vector<SearchHit>& hits, const ArticleIndex& articles,
                                          const ClusterRules& rules);

/// "An image between START and END in LOC1, LOC2" with sorted locations.
std::string make_event_template(const ArticleCluster& cluster);

/// Template text -> embedding.
using TemplateEmbedFn = std::function<std::span<const float>(const std::string&)>;

/// Fills s_evt for every cluster.
void score_clusters(std::span<const float> image, std::vector<ArticleCluster>& clusters, const CrossScorer& scorer,
                    const TemplateEmbedFn& embed);

/// Final event ranking. With fewer than min_clusters clusters: the hits in
/// s_bi order. Otherwise cluster representatives by s_evt desc (ties: earlier
/// start, then representative id), followed by every other hit in s_bi order.
std::vector<std::string> rank_events(const std::vector<ArticleCluster>& clusters, const std::vector<SearchHit>& hits,
                                     int min_clusters);

/// Hits in descending s_bi, ties by article id.
std::vector<std::string> s_bi_order(const std::vector<SearchHit>& hits);

/// One positive cluster (uniform over clusters holding an event-relevant
/// article) and up to n_negative other clusters with distinct templates.
std::vector<TemplatePair> sample_event_training_pairs(const std::string& image_id,
                                                      const std::vector<ArticleCluster>& clusters,
                                                      const RelevanceLabels& labels, int n_negative,
                                                      std::mt19937_64& rng);

}  // namespace newsrecon
