// newsrecon: command-line surface over the retrieval engine.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsrecon/article.hpp"
#include "newsrecon/config.hpp"
#include "newsrecon/error.hpp"
#include "newsrecon/http.hpp"
#include "newsrecon/labeling.hpp"
#include "newsrecon/llm.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/news_api.hpp"
#include "newsrecon/pipeline.hpp"
#include "newsrecon/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace newsrecon;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool json = false;
  bool allow_stale = false;
  bool quiet = false;
};

Config load_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this command");
  Config c = Config::load(g.config);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

void print_json(const json& j) { std::cout << j.dump() << '\n'; }

CorpusStore load_or_empty(const fs::path& path) {
  if (fs::exists(path)) return CorpusStore::load(path);
  return {};
}

void save_templates(const Config& cfg, const TemplateCache& cache) {
  if (cfg.has_path("template_cache")) cache.save(cfg.path("template_cache"));
}

std::vector<std::string> images_for(const Dataset& data, const std::vector<std::string>& ids,
                                    const std::string& split) {
  if (!ids.empty()) return ids;
  if (split.empty()) throw PreconditionError("give --image-id or --split");
  return data.image_ids(parse_split(split));
}

// ---------------------------------------------------------------- ingest

struct IngestOpts {
  std::string source = "nytimes";
  int year = 0, month = 0;
  std::string date;
  std::vector<std::string> keywords;
  std::string key_env;
  std::string replay_dir, cache_dir;
  double min_interval_s = 6.0;
};

int run_ingest(const Globals& g, const IngestOpts& o) {
  const Config cfg = load_config(g);
  const Source source = parse_source(o.source);
  std::string env = o.key_env;
  if (env.empty()) env = source == Source::nytimes ? "NYT_API_KEY" : "GUARDIAN_API_KEY";
  std::string key;
  if (const char* v = std::getenv(env.c_str())) key = v;

  std::unique_ptr<http::Transport> base;
  if (!o.replay_dir.empty()) base = std::make_unique<http::ReplayTransport>(o.replay_dir);
  else base = std::make_unique<http::NetworkTransport>();
  std::unique_ptr<http::CachingTransport> cached;
  http::Transport* transport = base.get();
  if (!o.cache_dir.empty()) {
    cached = std::make_unique<http::CachingTransport>(o.cache_dir, *base);
    transport = cached.get();
  }
  if (key.empty() && transport->offline()) key = "offline";
  http::RateLimiter limiter(transport->offline() ? 0.0 : o.min_interval_s);
  NewsApiClient client(*transport, {}, &limiter);

  std::vector<Article> fetched;
  if (source == Source::nytimes) {
    if (o.year == 0 || o.month == 0) throw PreconditionError("nytimes ingest needs --year and --month");
    fetched = client.fetch_nyt_month(o.year, o.month, key);
  } else {
    std::optional<Date> d;
    if (!o.date.empty()) d = Date::parse(o.date);
    fetched = client.fetch_guardian_matches(d, o.keywords, key);
  }

  auto store = load_or_empty(cfg.path("corpus"));
  std::size_t added = 0;
  for (auto& a : fetched) {
    added += !store.contains(a.id);
    store.upsert(std::move(a));
  }
  store.save(cfg.path("corpus"));
  if (g.json) print_json({{"fetched", fetched.size()}, {"added", added}, {"corpus_size", store.size()}});
  else std::printf("fetched %zu articles, %zu new, corpus now %zu\n", fetched.size(), added, store.size());
  return 0;
}

// ---------------------------------------------------------------- filter / caption

struct LlmOpts {
  std::string url, model, key_env, fixtures, prompts;
  bool redo = false;
};

LlmEndpointConfig llm_config(const LlmOpts& o) {
  LlmEndpointConfig c;
  if (!o.url.empty()) c.base_url = o.url;
  if (!o.model.empty()) c.model_name = o.model;
  if (!o.key_env.empty()) c.api_key_env_var = o.key_env;
  if (!o.fixtures.empty()) c.fixture_dir = fs::path(o.fixtures);
  return c;
}

json stats_json(const EnrichStats& s) {
  return {{"kept", s.kept},
          {"dropped", s.dropped},
          {"filter_failed", s.filter_failed},
          {"captioned", s.captioned},
          {"caption_failed", s.caption_failed}};
}

int run_enrich(const Globals& g, const LlmOpts& o, bool caption) {
  const Config cfg = load_config(g);
  auto store = CorpusStore::load(cfg.path("corpus"));
  EndpointChatModel llm(llm_config(o));
  const auto prompts = PromptLibrary::load(o.prompts.empty() ? PromptLibrary::default_dir() : fs::path(o.prompts));
  const auto stats = caption ? caption_store(store, llm, prompts, !o.redo) : filter_store(store, llm, prompts, !o.redo);
  store.save(cfg.path("corpus"));
  if (g.json) {
    print_json(stats_json(stats));
  } else if (caption) {
    std::printf("captioned %zu articles, %zu failed\n", stats.captioned, stats.caption_failed);
  } else {
    std::printf("kept %zu, dropped %zu, %zu failed\n", stats.kept, stats.dropped, stats.filter_failed);
  }
  return 0;
}

// ---------------------------------------------------------------- variant / label / index

int run_variant(const Globals& g, const std::string& out) {
  const Config cfg = load_config(g);
  CorpusVariant v{cfg.variant_name, cfg.variant_max_date.value_or(Date(9999, 12, 31)), {}};
  if (cfg.has_path("variant_exclude")) v.excluded_article_ids = read_id_list(cfg.path("variant_exclude"));
  const auto store = CorpusStore::load(cfg.path("corpus"));
  const auto articles = apply_variant(store, v);
  if (!out.empty()) {
    CorpusStore sub;
    for (const auto& a : articles) sub.insert(a);
    sub.save(out);
  }
  if (g.json) {
    json ids = json::array();
    for (const auto& a : articles) ids.push_back(a.id);
    print_json({{"variant", v.name}, {"articles", articles.size()}, {"corpus_size", store.size()}, {"ids", ids}});
  } else {
    std::printf("variant %s: %zu of %zu articles\n", v.name.c_str(), articles.size(), store.size());
  }
  return 0;
}

int run_label(const Globals& g, const std::string& out) {
  Config cfg = load_config(g);
  const fs::path target = out.empty() ? cfg.path("labels") : fs::path(out);
  cfg.paths.erase("labels");
  Dataset data;
  data.corpus = CorpusStore::load(cfg.path("corpus"));
  data.reindex();
  data.images = load_images(cfg.path("images"));
  std::vector<Article> active;
  for (const auto& id : active_article_ids(data, cfg)) active.push_back(data.corpus.at(id));
  const auto labels = label_all(data.images, active, cfg.n_window_days);
  labels.save(target);
  std::size_t loc = 0, evt = 0, no_evt = 0;
  for (const auto& [id, l] : labels.all()) {
    loc += l.location_relevant.size();
    evt += l.event_relevant.size();
    no_evt += l.event_relevant.empty();
  }
  if (g.json)
    print_json({{"images", labels.size()},
                {"location_relevant", loc},
                {"event_relevant", evt},
                {"images_without_event_relevant", no_evt}});
  else
    std::printf("labelled %zu images: %zu location-relevant, %zu event-relevant pairs; %zu images without any "
                "event-relevant article\n",
                labels.size(), loc, evt, no_evt);
  return 0;
}

int run_index(const Globals& g) {
  const Config cfg = load_config(g);
  const auto data = Dataset::load(cfg);
  const auto active = active_article_ids(data, cfg);
  std::size_t covered = 0;
  std::vector<std::string> missing;
  for (const auto& id : active) {
    const auto& have = data.text_embeddings.articles();
    if (std::binary_search(have.begin(), have.end(), id)) ++covered;
    else missing.push_back(id);
  }
  std::size_t images_missing = 0;
  for (const auto& r : data.images) images_missing += !data.image_embeddings.find(r.id).has_value();
  if (g.json) {
    print_json({{"text_rows", data.text_embeddings.rows()},
                {"text_dim", data.text_embeddings.dim()},
                {"image_rows", data.image_embeddings.rows()},
                {"image_dim", data.image_embeddings.dim()},
                {"active_articles", active.size()},
                {"articles_with_text", covered},
                {"articles_without_text", missing},
                {"images_without_embedding", images_missing}});
  } else {
    std::printf("text: %zu rows x %zu, images: %zu rows x %zu\n", data.text_embeddings.rows(),
                data.text_embeddings.dim(), data.image_embeddings.rows(), data.image_embeddings.dim());
    std::printf("%zu of %zu active articles have text rows; %zu images lack an embedding\n", covered, active.size(),
                images_missing);
  }
  return missing.empty() && images_missing == 0 ? 0 : 1;
}

// ---------------------------------------------------------------- training

json epoch_log(const std::vector<EpochLog>& log) {
  json out = json::array();
  for (const auto& e : log) out.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"recall", e.recall}});
  return out;
}

json epoch_log(const std::vector<CrossEpochLog>& log) {
  json out = json::array();
  for (const auto& e : log) out.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"recall", e.recall}});
  return out;
}

template <class Log>
void print_training(const Globals& g, const std::string& what, double baseline, int best_epoch, const Log& log,
                    const fs::path& saved) {
  if (g.json) {
    print_json({{"stage", what},
                {"baseline_recall", baseline},
                {"best_epoch", best_epoch},
                {"log", epoch_log(log)},
                {"checkpoint", saved.string()}});
    return;
  }
  std::printf("%s: baseline recall %.4f\n", what.c_str(), baseline);
  for (const auto& e : log) std::printf("  epoch %2d  loss %.5f  recall %.4f\n", e.epoch, e.loss, e.recall);
  std::printf("best epoch %d, saved %s\n", best_epoch, saved.string().c_str());
}

int run_train_biencoder(const Globals& g) {
  const Config cfg = load_config(g);
  const auto data = Dataset::load(cfg);
  const auto result = train_biencoder_stage(data, cfg, active_article_ids(data, cfg));
  save_heads(result.heads, cfg.path("heads"));
  print_training(g, "bi-encoder", result.baseline_recall, result.best_epoch, result.log, cfg.path("heads"));
  return 0;
}

int run_train_cross(const Globals& g, bool event) {
  const Config cfg = load_config(g);
  const auto data = Dataset::load(cfg);
  const auto heads = load_trained_heads(cfg, g.allow_stale);
  auto templates = open_template_cache(cfg, data.text_embeddings.dim());
  const auto active = active_article_ids(data, cfg);
  const auto result = event ? train_event_stage(data, cfg, heads, *templates, active)
                            : train_location_stage(data, cfg, heads, *templates, active);
  const fs::path out = cfg.path(event ? "xenc_evt" : "xenc_loc");
  save_scorer(result.scorer, out, event ? kEventScorerMagic : kLocScorerMagic);
  save_templates(cfg, *templates);
  print_training(g, event ? "event scorer" : "location scorer", result.baseline_recall, result.best_epoch,
                 result.log, out);
  return 0;
}

// ---------------------------------------------------------------- retrieval

struct RetrieveOpts {
  std::vector<std::string> image_ids;
  std::string split;
  std::string out;
  bool timings = false;
};

struct Session {
  Config cfg;
  Dataset data;
  std::unique_ptr<TemplateCache> templates;
  std::optional<Engine> engine;

  explicit Session(const Globals& g) : cfg(load_config(g)), data(Dataset::load(cfg)) {
    templates = open_template_cache(cfg, data.text_embeddings.dim());
    engine.emplace(data, cfg, load_models(cfg, g.allow_stale), *templates, active_article_ids(data, cfg));
  }
};

void print_ids(const char* label, const std::vector<std::string>& ids) {
  std::printf("  %s:", label);
  for (const auto& id : ids) std::printf(" %s", id.c_str());
  std::printf("\n");
}

int run_retrieve(const Globals& g, const RetrieveOpts& o) {
  Session s(g);
  const auto results = s.engine->run_batch(images_for(s.data, o.image_ids, o.split));
  save_templates(s.cfg, *s.templates);
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    for (const auto& r : results) f << to_json(r, o.timings).dump() << '\n';
    if (!f) throw Error("cannot write " + o.out);
  }
  for (const auto& r : results) {
    if (g.json) {
      print_json(to_json(r, o.timings));
      continue;
    }
    std::printf("%s\n", r.image_id.c_str());
    print_ids("location", r.location_ids());
    print_ids("event", r.event_ranking);
    if (o.timings)
      std::printf("  timings: bi-encoder %.4fs, location %.4fs, clustering %.4fs, event %.4fs\n",
                  r.timings.biencoder, r.timings.location, r.timings.clustering, r.timings.event);
  }
  return 0;
}

int run_dump_clusters(const Globals& g, const RetrieveOpts& o) {
  Session s(g);
  const auto results = s.engine->run_batch(images_for(s.data, o.image_ids, o.split));
  save_templates(s.cfg, *s.templates);
  for (const auto& r : results) {
    if (g.json) {
      json clusters = json::array();
      for (const auto& c : r.clusters) clusters.push_back(to_json(c));
      print_json({{"image_id", r.image_id}, {"clusters", clusters}});
      continue;
    }
    std::printf("%s: %zu clusters\n", r.image_id.c_str(), r.clusters.size());
    for (const auto& c : r.clusters) {
      std::printf("  [%s .. %s] representative %s, places:", c.start_date.iso().c_str(), c.end_date.iso().c_str(),
                  c.representative_id.c_str());
      for (const auto& p : c.shared_locations) std::printf(" %s", p.c_str());
      std::printf("\n   ");
      for (const auto& m : c.article_ids) std::printf(" %s", m.c_str());
      std::printf("\n");
    }
  }
  return 0;
}

int run_evaluate(const Globals& g, const std::string& run_file, const RetrieveOpts& o) {
  const Config cfg = load_config(g);
  std::vector<RetrievalResult> results;
  std::unique_ptr<Session> session;
  const Dataset* data = nullptr;
  Dataset loaded;
  if (!run_file.empty()) {
    loaded.corpus = CorpusStore::load(cfg.path("corpus"));
    loaded.reindex();
    loaded.images = load_images(cfg.path("images"));
    if (cfg.has_path("gazetteer")) loaded.gazetteer = Gazetteer::load(cfg.path("gazetteer"));
    data = &loaded;
    results = load_results(run_file);
  } else {
    session = std::make_unique<Session>(g);
    data = &session->data;
    results = session->engine->run_batch(images_for(*data, o.image_ids, o.split.empty() ? "test" : o.split));
    save_templates(session->cfg, *session->templates);
  }
  const auto report = evaluate_run(results, *data, cfg);
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    f << report.jsonl();
    if (!f) throw Error("cannot write " + o.out);
  }
  if (g.json) std::cout << report.jsonl();
  else std::cout << report.table();
  return 0;
}

struct PromptOpts {
  std::string image_id, task = "date", max_date, prompts, run_file;
  std::size_t top_n = 3;
};

int run_render_prompt(const Globals& g, const PromptOpts& o) {
  const Config cfg = load_config(g);
  const PromptTask task = parse_prompt_task(o.task);
  const std::string max_date =
      !o.max_date.empty() ? o.max_date : cfg.variant_max_date ? cfg.variant_max_date->iso() : Date(2023, 12, 31).iso();
  Date::parse(max_date);
  const auto prompt = EvidencePrompt::load(o.prompts.empty() ? PromptLibrary::default_dir() : fs::path(o.prompts));

  std::string text;
  if (!o.run_file.empty()) {
    const auto corpus = CorpusStore::load(cfg.path("corpus"));
    const auto index = index_articles(corpus);
    for (const auto& r : load_results(o.run_file))
      if (r.image_id == o.image_id) text = render_evidence_prompt(r, task, max_date, index, prompt, o.top_n);
    if (text.empty()) throw LookupError("image '" + o.image_id + "' is not in " + o.run_file);
  } else {
    Session s(g);
    const auto r = s.engine->retrieve(o.image_id);
    save_templates(s.cfg, *s.templates);
    text = render_evidence_prompt(r, task, max_date, s.data.index, prompt, o.top_n);
  }
  if (g.json) print_json({{"image_id", o.image_id}, {"task", to_string(task)}, {"prompt", text}});
  else std::cout << text << '\n';
  return 0;
}

// ---------------------------------------------------------------- templates / synth

int run_templates(const Globals& g, const std::string& manifest) {
  const Config cfg = load_config(g);
  const auto data = Dataset::load(cfg);
  std::set<std::string> texts;
  for (const auto& id : active_article_ids(data, cfg)) texts.insert(make_loc_template(data.corpus.at(id)));
  if (!manifest.empty()) {
    std::ofstream f(manifest);
    for (const auto& t : texts) f << json{{"id", template_key(t)}, {"kind", "text"}, {"payload", t}}.dump() << '\n';
    if (!f) throw Error("cannot write " + manifest);
  } else {
    auto cache = open_template_cache(cfg, data.text_embeddings.dim());
    for (const auto& t : texts) cache->get(t);
    if (!cfg.has_path("template_cache")) throw ConfigError("templates needs path.template_cache or --manifest");
    cache->save(cfg.path("template_cache"));
  }
  if (g.json) print_json({{"location_templates", texts.size()}});
  else std::printf("%zu location templates\n", texts.size());
  return 0;
}

struct SynthOpts {
  std::string out;
  bool small = false;
};

int run_synth(const Globals& g, const SynthOpts& o) {
  if (o.out.empty()) throw PreconditionError("synth needs --out");
  const std::uint64_t seed = g.seed.value_or(7);
  synth::WorldConfig wc;
  wc.seed = seed;
  if (o.small) {
    wc.n_towns = 10;
    wc.n_weeks = 8;
    wc.n_articles = 300;
    wc.n_train_images = 80;
    wc.n_dev_images = 20;
    wc.n_test_images = 20;
  }
  const auto world = synth::generate(wc);
  synth::write_world(world, o.out);

  Config cfg = synth::scaled_config(seed);
  if (o.small) cfg.biencoder.batch_size = 16;
  cfg.paths = {{"corpus", "corpus.jsonl"},
               {"images", "images.jsonl"},
               {"labels", "labels.jsonl"},
               {"gazetteer", "gazetteer.csv"},
               {"image_embeddings", "images.nrec"},
               {"article_image_embeddings", "article_images.nrec"},
               {"caption_embeddings", "captions.nrec"},
               {"world", "places.nrec"},
               {"template_cache", "templates.nrec"},
               {"heads", "heads.nrhd"},
               {"xenc_loc", "xenc_loc.nrxl"},
               {"xenc_evt", "xenc_evt.nrxe"}};
  const fs::path conf = fs::path(o.out) / "newsrecon.conf";
  std::ofstream(conf) << cfg.to_text();
  if (g.json)
    print_json({{"config", conf.string()}, {"articles", world.corpus.size()}, {"images", world.images.size()}});
  else
    std::printf("wrote %zu articles and %zu images; config %s\n", world.corpus.size(), world.images.size(),
                conf.string().c_str());
  return 0;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const PreconditionError*>(&e) ||
      dynamic_cast<const FormatError*>(&e) || dynamic_cast<const LookupError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const CredentialError*>(&e))
    return 1;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"newsrecon: date and location estimation for news images by retrieving related articles"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("-c,--config", g.config, "Config file (flat key = value)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_flag("--allow-stale", g.allow_stale, "Use checkpoints trained under different settings");
  app.add_flag("-q,--quiet", g.quiet, "Suppress warnings");
  app.fallthrough();

  std::function<int()> action;

  IngestOpts ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Fetch news articles into the corpus");
  c_ingest->add_option("--source", ingest.source, "nytimes or guardian")->check(CLI::IsMember({"nytimes", "guardian"}));
  c_ingest->add_option("--year", ingest.year, "Archive year (nytimes)");
  c_ingest->add_option("--month", ingest.month, "Archive month (nytimes)");
  c_ingest->add_option("--date", ingest.date, "Query date YYYY-MM-DD (guardian)");
  c_ingest->add_option("--keyword", ingest.keywords, "Search keyword (guardian, repeatable)");
  c_ingest->add_option("--key-env", ingest.key_env, "Environment variable holding the API key");
  c_ingest->add_option("--replay", ingest.replay_dir, "Serve responses from this fixture directory only");
  c_ingest->add_option("--cache", ingest.cache_dir, "Store responses here and reuse them on re-runs");
  c_ingest->add_option("--min-interval", ingest.min_interval_s, "Seconds between requests");
  c_ingest->callback([&] { action = [&] { return run_ingest(g, ingest); }; });

  LlmOpts llm;
  auto add_llm = [&llm](CLI::App* c) {
    c->add_option("--llm-url", llm.url, "Chat-completions base URL");
    c->add_option("--llm-model", llm.model, "Model name");
    c->add_option("--llm-key-env", llm.key_env, "Environment variable holding the LLM key");
    c->add_option("--llm-fixtures", llm.fixtures, "Replay LLM responses from this directory");
    c->add_option("--prompts", llm.prompts, "Prompt template directory");
    c->add_flag("--redo", llm.redo, "Reprocess articles that already have a result");
  };
  auto* c_filter = app.add_subcommand("filter", "Mark articles that describe a visual event");
  add_llm(c_filter);
  c_filter->callback([&] { action = [&] { return run_enrich(g, llm, false); }; });
  auto* c_caption = app.add_subcommand("caption", "Generate image-like captions for kept articles");
  add_llm(c_caption);
  c_caption->callback([&] { action = [&] { return run_enrich(g, llm, true); }; });

  std::string variant_out;
  auto* c_variant = app.add_subcommand("variant", "Show or write the configured corpus variant");
  c_variant->add_option("--out", variant_out, "Write the variant's articles as JSONL");
  c_variant->callback([&] { action = [&] { return run_variant(g, variant_out); }; });

  std::string label_out;
  auto* c_label = app.add_subcommand("label", "Compute relevance labels for every image");
  c_label->add_option("--out", label_out, "Output file (default path.labels)");
  c_label->callback([&] { action = [&] { return run_label(g, label_out); }; });

  auto* c_index = app.add_subcommand("index", "Check embedding coverage of the active corpus");
  c_index->callback([&] { action = [&] { return run_index(g); }; });

  auto* c_tb = app.add_subcommand("train-biencoder", "Train the projection heads");
  c_tb->callback([&] { action = [&] { return run_train_biencoder(g); }; });
  auto* c_tl = app.add_subcommand("train-xenc-loc", "Train the location scorer");
  c_tl->callback([&] { action = [&] { return run_train_cross(g, false); }; });
  auto* c_te = app.add_subcommand("train-xenc-evt", "Train the event scorer");
  c_te->callback([&] { action = [&] { return run_train_cross(g, true); }; });

  RetrieveOpts ret;
  auto add_queries = [&ret](CLI::App* c) {
    c->add_option("--image-id", ret.image_ids, "Query image id (repeatable)");
    c->add_option("--split", ret.split, "All images of a split")->check(CLI::IsMember({"train", "dev", "test"}));
  };
  auto* c_retrieve = app.add_subcommand("retrieve", "Rank articles for query images");
  add_queries(c_retrieve);
  c_retrieve->add_option("--out", ret.out, "Also write one JSON record per image here");
  c_retrieve->add_flag("--timings", ret.timings, "Report stage timings");
  c_retrieve->callback([&] { action = [&] { return run_retrieve(g, ret); }; });

  auto* c_clusters = app.add_subcommand("dump-clusters", "Show the event clusters formed for query images");
  add_queries(c_clusters);
  c_clusters->callback([&] { action = [&] { return run_dump_clusters(g, ret); }; });

  std::string run_file;
  auto* c_eval = app.add_subcommand("evaluate", "Score rankings against the ground truth");
  add_queries(c_eval);
  c_eval->add_option("--run", run_file, "Score a saved retrieve --out file instead of retrieving");
  c_eval->add_option("--out", ret.out, "Write the per-query report (JSONL) here");
  c_eval->callback([&] { action = [&] { return run_evaluate(g, run_file, ret); }; });

  PromptOpts prompt;
  auto* c_prompt = app.add_subcommand("render-prompt", "Render the evidence prompt for one image");
  c_prompt->add_option("--image-id", prompt.image_id, "Query image id")->required();
  c_prompt->add_option("--task", prompt.task, "date or location")->check(CLI::IsMember({"date", "location"}));
  c_prompt->add_option("--max-date", prompt.max_date, "Upper end of the date range (YYYY-MM-DD)");
  c_prompt->add_option("--top-n", prompt.top_n, "Articles to include");
  c_prompt->add_option("--prompts", prompt.prompts, "Prompt template directory");
  c_prompt->add_option("--run", prompt.run_file, "Take the rankings from a saved retrieve --out file");
  c_prompt->callback([&] { action = [&] { return run_render_prompt(g, prompt); }; });

  std::string manifest;
  auto* c_templates = app.add_subcommand("templates", "Embed location templates into the template cache");
  c_templates->add_option("--manifest", manifest, "Write an embedding manifest instead of embedding");
  c_templates->callback([&] { action = [&] { return run_templates(g, manifest); }; });

  SynthOpts synth_opts;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic world and a config for it");
  c_synth->add_option("--out", synth_opts.out, "Output directory")->required();
  c_synth->add_flag("--small", synth_opts.small, "A few hundred articles instead of thousands");
  c_synth->callback([&] { action = [&] { return run_synth(g, synth_opts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  std::optional<log::ScopedSink> quiet;
  if (g.quiet) quiet.emplace([](log::Level, std::string_view) {});
  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
}
