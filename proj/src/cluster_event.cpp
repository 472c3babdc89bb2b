#include "newsrecon/cluster_event.hpp"

#include <algorithm>
#include <map>

#include "newsrecon/error.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

struct Member {
  std::string id;
  float s_bi;
  Date date;
  std::set<std::string> keywords;
};

struct Group {
  std::vector<const Member*> members;
  std::set<std::string> shared;
  Date start, end;

  bool accepts(const Member& m, const ClusterRules& rules) const {
    const Date lo = std::min(start, m.date), hi = std::max(end, m.date);
    if (days_between(lo, hi) > rules.max_span_days()) return false;
    return std::any_of(m.keywords.begin(), m.keywords.end(), [&](const auto& k) { return shared.contains(k); });
  }

  void add(const Member& m) {
    if (members.empty()) {
      shared = m.keywords;
      start = end = m.date;
    } else {
      std::set<std::string> keep;
      std::set_intersection(shared.begin(), shared.end(), m.keywords.begin(), m.keywords.end(),
                            std::inserter(keep, keep.end()));
      shared = std::move(keep);
      start = std::min(start, m.date);
      end = std::max(end, m.date);
    }
    members.push_back(&m);
  }
};

std::set<std::string> keywords_of(const Article& a) {
  std::set<std::string> s;
  for (const auto& k : a.geo_keywords)
    if (auto t = text::trim(k); !t.empty()) s.insert(std::move(t));
  return s;
}

const Article& lookup(const ArticleIndex& articles, const std::string& id) {
  const auto it = articles.find(id);
  if (it == articles.end() || !it->second) throw LookupError("article '" + id + "' is not in the corpus");
  return *it->second;
}

bool by_score(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.article_id < b.article_id;
}

}  // namespace

nlohmann::json to_json(const ArticleCluster& c) {
  nlohmann::json j = {{"article_ids", c.article_ids},
                      {"start_date", c.start_date.iso()},
                      {"end_date", c.end_date.iso()},
                      {"shared_locations", c.shared_locations},
                      {"representative_id", c.representative_id},
                      {"template", make_event_template(c)}};
  j["s_evt"] = c.s_evt ? nlohmann::json(*c.s_evt) : nlohmann::json(nullptr);
  return j;
}

std::optional<std::string> cluster_violation(const std::vector<std::string>& ids, const ArticleIndex& articles,
                                             const ClusterRules& rules) {
  if (static_cast<int>(ids.size()) < rules.n_min_size)
    return "cluster has " + std::to_string(ids.size()) + " articles, minimum is " + std::to_string(rules.n_min_size);
  std::set<std::string> shared;
  Date lo, hi;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Article& a = lookup(articles, ids[i]);
    const auto kws = keywords_of(a);
    if (i == 0) {
      shared = kws;
      lo = hi = a.published_at;
      continue;
    }
    std::set<std::string> keep;
    std::set_intersection(shared.begin(), shared.end(), kws.begin(), kws.end(), std::inserter(keep, keep.end()));
    shared = std::move(keep);
    lo = std::min(lo, a.published_at);
    hi = std::max(hi, a.published_at);
  }
  if (shared.empty()) return std::string("members share no location keyword");
  if (days_between(lo, hi) > rules.max_span_days())
    return "cluster spans " + std::to_string(days_between(lo, hi)) + " days, limit is " +
           std::to_string(rules.max_span_days());
  return std::nullopt;
}

std::vector<ArticleCluster> form_clusters(const std::vector<SearchHit>& hits, const ArticleIndex& articles,
                                          const ClusterRules& rules) {
  if (rules.n_window < 0 || rules.n_min_size < 1) throw PreconditionError("invalid clustering rules");
  std::vector<SearchHit> ordered = hits;
  std::sort(ordered.begin(), ordered.end(), by_score);
  std::vector<Member> members;
  members.reserve(ordered.size());
  for (const auto& h : ordered) {
    const Article& a = lookup(articles, h.article_id);
    members.push_back({h.article_id, h.score, a.published_at, keywords_of(a)});
  }

  std::vector<Group> groups;
  std::vector<const Member*> loose;
  for (const auto& m : members) {
    if (m.keywords.empty()) {
      loose.push_back(&m);
      continue;
    }
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.accepts(m, rules); });
    if (it == groups.end()) it = groups.insert(groups.end(), Group{});
    it->add(m);
  }

  std::vector<Group> kept;
  for (auto& g : groups) {
    if (static_cast<int>(g.members.size()) >= rules.n_min_size) kept.push_back(std::move(g));
    else loose.insert(loose.end(), g.members.begin(), g.members.end());
  }
  // Offer dissolved articles to the surviving clusters, best s_bi first.
  std::sort(loose.begin(), loose.end(), [](const Member* a, const Member* b) {
    if (a->s_bi != b->s_bi) return a->s_bi > b->s_bi;
    return a->id < b->id;
  });
  for (bool changed = true; changed;) {
    changed = false;
    for (auto it = loose.begin(); it != loose.end();) {
      auto g = std::find_if(kept.begin(), kept.end(), [&](const Group& c) { return c.accepts(**it, rules); });
      if (g == kept.end()) {
        ++it;
        continue;
      }
      g->add(**it);
      it = loose.erase(it);
      changed = true;
    }
  }

  std::vector<ArticleCluster> out;
  for (auto& g : kept) {
    std::sort(g.members.begin(), g.members.end(), [](const Member* a, const Member* b) {
      if (a->s_bi != b->s_bi) return a->s_bi > b->s_bi;
      return a->id < b->id;
    });
    ArticleCluster c;
    for (const Member* m : g.members) c.article_ids.push_back(m->id);
    c.start_date = g.start;
    c.end_date = g.end;
    c.shared_locations = g.shared;
    c.representative_id = c.article_ids.front();
    out.push_back(std::move(c));
  }
  return out;
}

std::string make_event_template(const ArticleCluster& cluster) {
  const std::vector<std::string> locs(cluster.shared_locations.begin(), cluster.shared_locations.end());
  return "An image between " + cluster.start_date.iso() + " and " + cluster.end_date.iso() + " in " +
         text::join(locs, ", ");
}

void score_clusters(std::span<const float> image, std::vector<ArticleCluster>& clusters, const CrossScorer& scorer,
                    const TemplateEmbedFn& embed) {
  for (auto& c : clusters) c.s_evt = scorer.score(image, embed(make_event_template(c)));
}

std::vector<std::string> s_bi_order(const std::vector<SearchHit>& hits) {
  std::vector<SearchHit> sorted = hits;
  std::sort(sorted.begin(), sorted.end(), by_score);
  std::vector<std::string> out;
  out.reserve(sorted.size());
  for (const auto& h : sorted) out.push_back(h.article_id);
  return out;
}

std::vector<std::string> rank_events(const std::vector<ArticleCluster>& clusters, const std::vector<SearchHit>& hits,
                                     int min_clusters) {
  if (static_cast<int>(clusters.size()) < min_clusters) return s_bi_order(hits);
  std::vector<const ArticleCluster*> order;
  for (const auto& c : clusters) {
    if (!c.s_evt) throw PreconditionError("cluster '" + c.representative_id + "' has no event score");
    order.push_back(&c);
  }
  std::sort(order.begin(), order.end(), [](const ArticleCluster* a, const ArticleCluster* b) {
    if (*a->s_evt != *b->s_evt) return *a->s_evt > *b->s_evt;
    if (a->start_date != b->start_date) return a->start_date < b->start_date;
    return a->representative_id < b->representative_id;
  });
  std::vector<std::string> out;
  std::set<std::string> emitted;
  for (const auto* c : order) {
    out.push_back(c->representative_id);
    emitted.insert(c->representative_id);
  }
  for (const auto& id : s_bi_order(hits))
    if (!emitted.contains(id)) out.push_back(id);
  return out;
}

std::vector<TemplatePair> sample_event_training_pairs(const std::string& image_id,
                                                      const std::vector<ArticleCluster>& clusters,
                                                      const RelevanceLabels& labels, int n_negative,
                                                      std::mt19937_64& rng) {
  std::vector<const ArticleCluster*> relevant, irrelevant;
  for (const auto& c : clusters) {
    const bool rel = std::any_of(c.article_ids.begin(), c.article_ids.end(),
                                 [&](const std::string& id) { return labels.event_relevant.contains(id); });
    (rel ? relevant : irrelevant).push_back(&c);
  }
  if (relevant.empty()) return {};
  std::vector<TemplatePair> out;
  std::uniform_int_distribution<std::size_t> pick(0, relevant.size() - 1);
  const std::string positive = make_event_template(*relevant[pick(rng)]);
  out.push_back({image_id, positive, 1.0f});
  std::shuffle(irrelevant.begin(), irrelevant.end(), rng);
  std::set<std::string> seen{positive};
  for (const auto* c : irrelevant) {
    if (static_cast<int>(out.size()) - 1 >= n_negative) break;
    auto t = make_event_template(*c);
    if (seen.insert(t).second) out.push_back({image_id, std::move(t), 0.0f});
  }
  return out;
}

}  // namespace newsrecon
