#include "newsrecon/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <random>
#include <sstream>

#include "newsrecon/error.hpp"
#include "newsrecon/hash.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/synth.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

/// Runs one stage, prefixing any failure with the stage name.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const LookupError& e) {
    throw LookupError(std::string(name) + " stage: " + e.what());
  } catch (const Error& e) {
    throw Error(std::string(name) + " stage: " + e.what());
  }
}

void check_hash(std::uint64_t stored, std::uint64_t expected, const std::string& what, bool allow_stale) {
  if (stored == expected) return;
  const std::string msg = what + " was trained under different settings (checkpoint " + hex64(stored) +
                          ", config " + hex64(expected) + ")";
  if (!allow_stale) throw ConfigError(msg + "; retrain or pass --allow-stale");
  log::warn(msg + "; using it anyway");
}

/// Text rows restricted to the given articles.
EmbeddingMatrix restrict_rows(const EmbeddingMatrix& m, const std::vector<std::string>& active_sorted) {
  if (active_sorted.size() >= m.articles().size() &&
      std::includes(active_sorted.begin(), active_sorted.end(), m.articles().begin(), m.articles().end()))
    return m;
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (!std::binary_search(active_sorted.begin(), active_sorted.end(), m.articles()[m.row_article(i)])) continue;
    ids.push_back(m.ids()[i]);
    const auto r = m.row(i);
    data.insert(data.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(std::move(ids), m.dim(), std::move(data));
}

std::vector<std::string> labelled(const Dataset& data, Split split) {
  std::vector<std::string> out;
  for (const auto& id : data.image_ids(split))
    if (data.labels.find(id)) out.push_back(id);
  return out;
}

std::string top1(const std::vector<ScoredArticle>& ranking) {
  return ranking.empty() ? std::string() : ranking.front().article_id;
}

/// Cached per-image state for dev-set evaluation during cross training.
struct DevQuery {
  std::string image_id;
  std::span<const float> image;
  std::vector<SearchHit> hits;
  std::vector<ArticleCluster> clusters;
  const RelevanceLabels* labels = nullptr;
};

double loc_recall(const std::vector<DevQuery>& queries, const CrossScorer* scorer, std::size_t k_loc,
                  const ArticleIndex& articles, TemplateCache& templates) {
  std::size_t n = 0, hit = 0;
  for (const auto& q : queries) {
    if (q.labels->location_relevant.empty()) continue;
    ++n;
    std::string best;
    if (scorer) best = top1(rerank_candidates(q.image, q.hits, k_loc, *scorer, articles, templates));
    else if (!q.hits.empty()) best = q.hits.front().article_id;
    if (q.labels->location_relevant.contains(best)) ++hit;
  }
  return n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n);
}

double evt_recall(const std::vector<DevQuery>& queries, const CrossScorer* scorer, int min_clusters,
                  TemplateCache& templates) {
  const TemplateEmbedFn embed = [&](const std::string& t) { return templates.get(t); };
  std::size_t n = 0, hit = 0;
  for (const auto& q : queries) {
    if (q.labels->event_relevant.empty()) continue;
    ++n;
    std::vector<std::string> ranking;
    if (scorer && static_cast<int>(q.clusters.size()) >= min_clusters) {
      auto clusters = q.clusters;
      score_clusters(q.image, clusters, *scorer, embed);
      ranking = rank_events(clusters, q.hits, min_clusters);
    } else {
      ranking = s_bi_order(q.hits);
    }
    if (!ranking.empty() && q.labels->event_relevant.contains(ranking.front())) ++hit;
  }
  return n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n);
}

std::vector<DevQuery> dev_queries(const Engine& engine, const Dataset& data, const std::vector<std::string>& ids,
                                  std::size_t k, const ClusterRules* rules) {
  std::vector<DevQuery> out;
  for (const auto& id : ids) {
    const auto* labels = data.labels.find(id);
    if (!labels) continue;
    DevQuery q{id, data.image_embeddings.at(id), {}, {}, labels};
    q.hits = engine.candidates(q.image, k);
    if (rules) q.clusters = form_clusters(q.hits, data.index, *rules);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<PairExample> embed_pairs(const std::vector<TemplatePair>& pairs, const Dataset& data,
                                     TemplateCache& templates) {
  std::vector<PairExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs)
    out.push_back({data.image_embeddings.at(p.image_id), templates.get(p.template_text), p.label});
  return out;
}

CrossTrainConfig seeded(CrossTrainConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- dataset

Dataset Dataset::load(const Config& cfg) {
  Dataset d;
  d.corpus = CorpusStore::load(cfg.path("corpus"));
  d.reindex();
  d.images = load_images(cfg.path("images"));
  d.image_embeddings = load_matrix(cfg.path("image_embeddings"));
  d.text_embeddings = load_matrix(cfg.path(cfg.biencoder.input_field == TextField::caption ? "caption_embeddings"
                                                                                          : "abstract_embeddings"));
  if (cfg.has_path("article_image_embeddings"))
    d.article_image_embeddings = load_matrix(cfg.path("article_image_embeddings"));
  if (cfg.has_path("gazetteer")) d.gazetteer = Gazetteer::load(cfg.path("gazetteer"));
  if (cfg.has_path("labels")) {
    d.labels = LabelStore::load(cfg.path("labels"));
  } else {
    std::vector<Article> active;
    for (const auto& id : active_article_ids(d, cfg)) active.push_back(d.corpus.at(id));
    d.labels = label_all(d.images, active, cfg.n_window_days);
  }
  return d;
}

const ImageRecord& Dataset::image(const std::string& id) const {
  for (const auto& r : images)
    if (r.id == id) return r;
  throw LookupError("image '" + id + "' is not in the image list");
}

std::vector<std::string> Dataset::image_ids(Split split) const {
  std::vector<std::string> out;
  for (const auto& r : images)
    if (r.split == split) out.push_back(r.id);
  return out;
}

std::vector<std::string> active_article_ids(const Dataset& data, const Config& cfg) {
  CorpusVariant v{cfg.variant_name, cfg.variant_max_date.value_or(Date(9999, 12, 31)), {}};
  if (cfg.has_path("variant_exclude")) v.excluded_article_ids = read_id_list(cfg.path("variant_exclude"));
  std::vector<std::string> ids;
  for (const auto& a : apply_variant(data.corpus, v)) ids.push_back(a.id);
  return ids;
}

Models load_models(const Config& cfg, bool allow_stale) {
  Models m{load_heads(cfg.path("heads")), load_scorer(cfg.path("xenc_loc"), kLocScorerMagic),
           load_scorer(cfg.path("xenc_evt"), kEventScorerMagic)};
  check_hash(m.heads.config_hash, cfg.biencoder_hash(), "bi-encoder heads", allow_stale);
  check_hash(m.location.config_hash, cfg.loc_scorer_hash(), "location scorer", allow_stale);
  check_hash(m.event.config_hash, cfg.event_scorer_hash(), "event scorer", allow_stale);
  return m;
}

HeadPair load_trained_heads(const Config& cfg, bool allow_stale) {
  auto heads = load_heads(cfg.path("heads"));
  check_hash(heads.config_hash, cfg.biencoder_hash(), "bi-encoder heads", allow_stale);
  return heads;
}

std::shared_ptr<const TextEmbedder> make_template_embedder(const Config& cfg, std::size_t dim) {
  switch (cfg.template_embedder) {
    case TemplateEmbedder::fake: return std::make_shared<FakeTextEmbedder>(dim);
    case TemplateEmbedder::world: return std::make_shared<synth::WorldTextEmbedder>(load_matrix(cfg.path("world")));
    case TemplateEmbedder::cache_only: return nullptr;
  }
  return nullptr;
}

std::unique_ptr<TemplateCache> open_template_cache(const Config& cfg, std::size_t dim) {
  auto embedder = make_template_embedder(cfg, dim);
  if (cfg.has_path("template_cache")) return TemplateCache::open(cfg.path("template_cache"), dim, std::move(embedder));
  if (!embedder) throw ConfigError("embedder.templates = cache needs path.template_cache");
  return std::make_unique<TemplateCache>(dim, std::move(embedder));
}

// ---------------------------------------------------------------- engine

std::vector<std::string> RetrievalResult::location_ids() const {
  std::vector<std::string> ids;
  ids.reserve(location_ranking.size());
  for (const auto& s : location_ranking) ids.push_back(s.article_id);
  return ids;
}

nlohmann::json to_json(const RetrievalResult& r, bool with_timings) {
  nlohmann::json loc = nlohmann::json::array();
  for (const auto& s : r.location_ranking)
    loc.push_back({{"article_id", s.article_id}, {"s_bi", s.s_bi}, {"s_loc", s.s_loc}, {"s_comb", s.s_comb}});
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : r.clusters) clusters.push_back(to_json(c));
  nlohmann::json j = {{"image_id", r.image_id},
                      {"location_ranking", loc},
                      {"event_ranking", r.event_ranking},
                      {"clusters", clusters}};
  if (with_timings)
    j["timings"] = {{"biencoder", r.timings.biencoder},
                    {"location", r.timings.location},
                    {"clustering", r.timings.clustering},
                    {"event", r.timings.event}};
  return j;
}

RetrievalResult result_from_json(const nlohmann::json& j) {
  try {
    RetrievalResult r;
    r.image_id = j.at("image_id").get<std::string>();
    for (const auto& s : j.at("location_ranking"))
      r.location_ranking.push_back({s.at("article_id").get<std::string>(), s.at("s_bi").get<float>(),
                                    s.at("s_loc").get<float>(), s.at("s_comb").get<float>()});
    r.event_ranking = j.at("event_ranking").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad retrieval record: ") + e.what());
  }
}

std::vector<RetrievalResult> load_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<RetrievalResult> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(result_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Engine::Engine(const Dataset& data, const Config& cfg, Models models, TemplateCache& templates,
               std::vector<std::string> active)
    : data_(data), cfg_(cfg), models_(std::move(models)), templates_(templates) {
  cfg_.validate();
  models_.heads.validate();
  if (models_.heads.text.in_dim != data_.text_embeddings.dim())
    throw DimensionError("text head expects dim " + std::to_string(models_.heads.text.in_dim) +
                         ", text embeddings have " + std::to_string(data_.text_embeddings.dim()));
  if (models_.heads.image.in_dim != data_.image_embeddings.dim())
    throw DimensionError("image head expects dim " + std::to_string(models_.heads.image.in_dim) +
                         ", image embeddings have " + std::to_string(data_.image_embeddings.dim()));
  for (const CrossScorer* s : {&models_.location, &models_.event}) {
    s->validate();
    if (s->dim != data_.image_embeddings.dim() || s->dim != templates_.dim())
      throw DimensionError("cross scorer dim " + std::to_string(s->dim) + " does not match the embeddings");
  }
  std::sort(active.begin(), active.end());
  projected_ = models_.heads.text.apply(data_.text_embeddings);
  mask_ = mask_for_articles(projected_, active);
}

std::vector<SearchHit> Engine::candidates(std::span<const float> image, std::size_t k) const {
  return retrieve_event_candidates(image, models_.heads, projected_, k, mask_);
}

RetrievalResult Engine::retrieve(const std::string& image_id) const {
  return retrieve(data_.image_embeddings.at(image_id), image_id);
}

RetrievalResult Engine::retrieve(std::span<const float> image, const std::string& image_id) const {
  RetrievalResult r;
  r.image_id = image_id;

  auto t0 = Clock::now();
  r.candidates = stage("bi-encoder", [&] { return candidates(image, static_cast<std::size_t>(cfg_.k_evt)); });
  r.timings.biencoder = seconds_since(t0);

  t0 = Clock::now();
  r.location_ranking = stage("location", [&] {
    return rerank_candidates(image, r.candidates, static_cast<std::size_t>(cfg_.k_loc), models_.location,
                             data_.index, templates_);
  });
  r.timings.location = seconds_since(t0);

  t0 = Clock::now();
  r.clusters = stage("clustering", [&] { return form_clusters(r.candidates, data_.index, cfg_.cluster_rules()); });
  r.timings.clustering = seconds_since(t0);

  t0 = Clock::now();
  r.event_ranking = stage("event", [&] {
    if (static_cast<int>(r.clusters.size()) >= cfg_.min_clusters)
      score_clusters(image, r.clusters, models_.event, [&](const std::string& t) { return templates_.get(t); });
    return rank_events(r.clusters, r.candidates, cfg_.min_clusters);
  });
  r.timings.event = seconds_since(t0);
  return r;
}

std::vector<RetrievalResult> Engine::run_batch(const std::vector<std::string>& image_ids) const {
  std::vector<RetrievalResult> out(image_ids.size());
  std::vector<std::exception_ptr> errors(image_ids.size());
  const auto n = static_cast<std::ptrdiff_t>(image_ids.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = retrieve(image_ids[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<ScoredArticle> rerank_candidates(std::span<const float> image, const std::vector<SearchHit>& hits,
                                             std::size_t k_loc, const CrossScorer& scorer,
                                             const ArticleIndex& articles, TemplateCache& templates) {
  std::vector<ScoredArticle> scored;
  const std::size_t n = std::min(k_loc, hits.size());
  scored.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = articles.find(hits[i].article_id);
    if (it == articles.end()) throw LookupError("article '" + hits[i].article_id + "' is not in the corpus");
    const float s_loc = score_location(image, templates.get(make_loc_template(*it->second)), scorer);
    scored.push_back({hits[i].article_id, hits[i].score, s_loc, 0.0f});
  }
  return rerank_by_location(std::move(scored));
}

double location_recall_at_1(const Engine& engine, const Dataset& data, const std::vector<std::string>& image_ids,
                            const CrossScorer* scorer, TemplateCache& templates) {
  const auto k = static_cast<std::size_t>(engine.config().k_loc);
  return loc_recall(dev_queries(engine, data, image_ids, k, nullptr), scorer, k, data.index, templates);
}

double event_recall_at_1(const Engine& engine, const Dataset& data, const std::vector<std::string>& image_ids,
                         const CrossScorer* scorer, TemplateCache& templates) {
  const auto rules = engine.config().cluster_rules();
  const auto k = static_cast<std::size_t>(engine.config().k_evt);
  return evt_recall(dev_queries(engine, data, image_ids, k, &rules), scorer, engine.config().min_clusters, templates);
}

// ---------------------------------------------------------------- training

BiEncoderTrainResult train_biencoder_stage(const Dataset& data, const Config& cfg,
                                           const std::vector<std::string>& active) {
  const EmbeddingMatrix text = restrict_rows(data.text_embeddings, active);
  const BiEncoderData in{data.image_embeddings,
                         text,
                         data.article_image_embeddings ? &*data.article_image_embeddings : nullptr,
                         data.labels,
                         labelled(data, Split::train),
                         labelled(data, Split::dev)};
  auto bc = cfg.biencoder;
  bc.seed = cfg.seed;
  auto result = train_biencoder(in, bc);
  result.heads.config_hash = cfg.biencoder_hash();
  return result;
}

namespace {

Engine scout(const Dataset& data, const Config& cfg, const HeadPair& heads, TemplateCache& templates,
             const std::vector<std::string>& active) {
  const std::size_t d = data.image_embeddings.dim();
  return Engine(data, cfg, Models{heads, CrossScorer::zeros(d, cfg.xenc_loc.combiner), CrossScorer::zeros(d, cfg.xenc_evt.combiner)},
                templates, active);
}

}  // namespace

CrossTrainResult train_location_stage(const Dataset& data, const Config& cfg, const HeadPair& heads,
                                      TemplateCache& templates, const std::vector<std::string>& active) {
  const Engine engine = scout(data, cfg, heads, templates, active);
  const auto top_k = static_cast<std::size_t>(cfg.xenc_loc.top_k);
  std::mt19937_64 rng(cfg.seed ^ 0x6c6f63ULL);
  std::vector<TemplatePair> pairs;
  for (const auto& q : dev_queries(engine, data, labelled(data, Split::train), top_k, nullptr)) {
    auto p = sample_loc_training_pairs(q.image_id, q.hits, data.index, *q.labels, cfg.xenc_loc.n_negative, rng);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  const auto dev = dev_queries(engine, data, labelled(data, Split::dev), static_cast<std::size_t>(cfg.k_loc), nullptr);
  const auto k_loc = static_cast<std::size_t>(cfg.k_loc);
  auto result = train_cross_scorer(embed_pairs(pairs, data, templates), data.image_embeddings.dim(),
                                   seeded(cfg.xenc_loc, cfg.seed), [&](const CrossScorer& s) {
                                     return loc_recall(dev, &s, k_loc, data.index, templates);
                                   });
  result.scorer.config_hash = cfg.loc_scorer_hash();
  return result;
}

CrossTrainResult train_event_stage(const Dataset& data, const Config& cfg, const HeadPair& heads,
                                   TemplateCache& templates, const std::vector<std::string>& active) {
  const Engine engine = scout(data, cfg, heads, templates, active);
  const auto rules = cfg.cluster_rules();
  std::mt19937_64 rng(cfg.seed ^ 0x657674ULL);
  std::vector<TemplatePair> pairs;
  for (const auto& q :
       dev_queries(engine, data, labelled(data, Split::train), static_cast<std::size_t>(cfg.xenc_evt.top_k), &rules)) {
    auto p = sample_event_training_pairs(q.image_id, q.clusters, *q.labels, cfg.xenc_evt.n_negative, rng);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  const auto dev = dev_queries(engine, data, labelled(data, Split::dev), static_cast<std::size_t>(cfg.k_evt), &rules);
  auto result = train_cross_scorer(embed_pairs(pairs, data, templates), data.image_embeddings.dim(),
                                   seeded(cfg.xenc_evt, cfg.seed), [&](const CrossScorer& s) {
                                     return evt_recall(dev, &s, cfg.min_clusters, templates);
                                   });
  result.scorer.config_hash = cfg.event_scorer_hash();
  return result;
}

// ---------------------------------------------------------------- evaluation

MetricsReport evaluate_run(const std::vector<RetrievalResult>& results, const Dataset& data, const Config& cfg) {
  std::vector<QueryMetrics> queries;
  queries.reserve(results.size());
  for (const auto& r : results) {
    const auto preds = extract_predictions(r.location_ids(), r.event_ranking, data.index);
    queries.push_back(score_query(data.image(r.image_id), preds, data.gazetteer, cfg.metrics));
  }
  return aggregate(std::move(queries));
}

// ---------------------------------------------------------------- prompts

std::string to_string(PromptTask t) { return t == PromptTask::date ? "date" : "location"; }

PromptTask parse_prompt_task(std::string_view s) {
  if (s == "date") return PromptTask::date;
  if (s == "location") return PromptTask::location;
  throw PreconditionError("prompt task must be date or location, got '" + std::string(s) + "'");
}

EvidencePrompt EvidencePrompt::load(const std::filesystem::path& dir) {
  return {trim_newline(read_text(dir / "evidence_prompt.txt")),
          trim_newline(read_text(dir / "evidence_question_date.txt")),
          trim_newline(read_text(dir / "evidence_question_location.txt"))};
}

std::string render_evidence_prompt(const RetrievalResult& result, PromptTask task, const std::string& max_date,
                                   const ArticleIndex& articles, const EvidencePrompt& prompt, std::size_t top_n) {
  const auto ids = task == PromptTask::date ? result.event_ranking : result.location_ids();
  if (ids.empty()) throw PreconditionError("no ranked article for image '" + result.image_id + "'");
  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < std::min(top_n, ids.size()); ++i) {
    const auto it = articles.find(ids[i]);
    if (it == articles.end()) throw LookupError("article '" + ids[i] + "' is not in the corpus");
    const Article& a = *it->second;
    blocks.push_back("Article " + std::to_string(i + 1) + ":\nHeadline: " + a.headline + "\nAbstract: " + a.abstract +
                     "\nPublication date: " + a.published_at.iso() +
                     "\nLocations: " + text::join(a.geo_keywords, ", "));
  }
  std::string question = task == PromptTask::date ? text::replace_all(prompt.date_question, "{MAX_DATE}", max_date)
                                                  : prompt.location_question;
  std::string out = text::replace_all(prompt.body, "{TASK}", to_string(task));
  out = text::replace_all(std::move(out), "{ARTICLES}", text::join(blocks, "\n\n"));
  return text::replace_all(std::move(out), "{QUESTION}", question);
}

}  // namespace newsrecon
