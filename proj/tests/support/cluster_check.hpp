#pragma once

// Random clustering instances checked against the brute-force enumerator.

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "newsrecon/cluster_event.hpp"
#include "support/oracles.hpp"

namespace oracle {

/// Builds one instance of up to max_articles articles from `seed`, clusters
/// it, and returns a description of the first broken property.
inline std::optional<std::string> check_clustering(std::uint64_t seed, std::size_t max_articles = 12) {
  using namespace newsrecon;
  std::mt19937_64 rng(seed);
  const std::size_t n = 1 + rng() % max_articles;
  const int n_window = static_cast<int>(1 + rng() % 7);
  const int n_min_size = static_cast<int>(1 + rng() % 4);
  const std::vector<std::string> vocab = {"Kyiv", "Ukraine", "Paris", "France", "Lyon"};
  const Date base(2022, 3, 1);

  std::vector<Article> corpus;
  std::vector<ClusterItem> items;
  std::vector<SearchHit> hits;
  std::uniform_real_distribution<float> score(-0.2f, 1.0f);
  for (std::size_t i = 0; i < n; ++i) {
    Article a;
    a.id = "a" + std::to_string(i);
    a.headline = "h";
    const long day = static_cast<long>(rng() % (4 * static_cast<unsigned>(n_window) + 3));
    a.published_at = base.plus_days(day);
    ClusterItem it{a.id, day, {}};
    for (const auto& k : vocab)
      if (rng() % 3 == 0) {
        a.geo_keywords.push_back(k);
        it.keywords.insert(k);
      }
    corpus.push_back(a);
    items.push_back(it);
    hits.push_back({a.id, -1, score(rng)});
  }
  const auto index = index_articles(corpus);
  const ClusterRules rules{n_window, n_min_size};
  const auto clusters = form_clusters(hits, index, rules);
  const auto valid = enumerate_valid(items, n_window, n_min_size);

  std::set<std::string> used;
  auto item = [&](const std::string& id) -> const ClusterItem& {
    return *std::find_if(items.begin(), items.end(), [&](const ClusterItem& x) { return x.id == id; });
  };
  auto s_bi = [&](const std::string& id) {
    return std::find_if(hits.begin(), hits.end(), [&](const SearchHit& h) { return h.article_id == id; })->score;
  };
  const std::string tag = "seed " + std::to_string(seed) + ": ";
  for (const auto& c : clusters) {
    auto ids = c.article_ids;
    std::sort(ids.begin(), ids.end());
    if (!valid.count(ids)) return tag + "emitted cluster breaks a rule";
    for (const auto& id : ids)
      if (!used.insert(id).second) return tag + "article " + id + " in two clusters";

    std::set<std::string> shared = item(ids[0]).keywords;
    long lo = item(ids[0]).day, hi = lo;
    for (const auto& id : ids) {
      std::set<std::string> keep;
      for (const auto& k : shared)
        if (item(id).keywords.count(k)) keep.insert(k);
      shared = keep;
      lo = std::min(lo, item(id).day);
      hi = std::max(hi, item(id).day);
    }
    if (shared != c.shared_locations) return tag + "shared_locations differ from the member intersection";
    if (c.start_date != base.plus_days(lo) || c.end_date != base.plus_days(hi)) return tag + "wrong date bounds";
    for (const auto& id : ids)
      if (s_bi(id) > s_bi(c.representative_id)) return tag + "representative is not the best s_bi member";
  }
  // Maximality: no unclustered article can join any emitted cluster.
  for (const auto& c : clusters)
    for (const auto& x : items) {
      if (used.count(x.id)) continue;
      auto ids = c.article_ids;
      ids.push_back(x.id);
      std::sort(ids.begin(), ids.end());
      if (valid.count(ids)) return tag + "article " + x.id + " could extend a cluster";
    }
  // Greedy policy: with n_min_size 1 every keyworded article ends up clustered.
  if (n_min_size == 1)
    for (const auto& x : items)
      if (!x.keywords.empty() && !used.count(x.id)) return tag + "keyworded article left unclustered";
  return std::nullopt;
}

}  // namespace oracle
