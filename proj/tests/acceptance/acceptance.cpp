// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "newsrecon/binary_io.hpp"
#include "newsrecon/biencoder.hpp"
#include "newsrecon/error.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/pipeline.hpp"
#include "newsrecon/synth.hpp"
#include "support/cluster_check.hpp"
#include "support/metric_check.hpp"
#include "support/oracles.hpp"

using namespace newsrecon;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed sub-checks of one criterion.
class Checks {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome outcome() const {
    Outcome o;
    o.pass = failures_.empty();
    std::vector<std::string> parts = o.pass ? notes_ : failures_;
    for (std::size_t i = 0; i < parts.size(); ++i) o.detail += (i ? "; " : "") + parts[i];
    return o;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ------------------------------------------------------------ metrics

Outcome metric_oracle_suite() {
  Checks c;
  const auto t0 = Clock::now();
  const double city = oracle::worst_city_error();
  c.require(city < 0.005, "city-pair error " + fmt("%.4f", city));
  c.note("worst city-pair error " + fmt("%.3f%%", 100 * city));

  const auto worst = oracle::metric_oracle_errors(1000, 2024);
  double max_err = 0;
  for (const auto& [name, err] : worst) {
    c.require(err <= 1e-9, name + " differs from oracle by " + fmt("%.3g", err));
    max_err = std::max(max_err, err);
  }
  c.note("1000 random cases, max diff " + fmt("%.2g", max_err));

  const GeoPoint paris{48.8566, 2.3522};
  auto pd = [](const char* s) { return PartialDate::parse(s); };
  auto hl = [](const char* s) { return HierLocation::parse(s); };
  c.require(haversine_km(paris, paris) == 0.0, "haversine(a, a) != 0");
  c.require(std::abs(haversine_km({0, 0}, {0, 180}) - oracle::kPi * kEarthRadiusKm) < 1e-9, "antipodal != pi R");
  c.require(great_loc_km(0) == 1.0 && great_loc_km(1000) == 0.0, "great_loc boundaries");
  c.require(co_delta_km(0) == 1.0 && co_delta_km(1000) == 0.5 && std::abs(co_delta_km(9000) - 0.1) < 1e-15,
            "co_delta boundaries");
  c.require(delta_year(pd("2000"), pd("2000")) == 1.0 && delta_year(pd("2001"), pd("2000")) == 0.5 &&
                std::abs(delta_year(pd("2009"), pd("2000")) - 0.1) < 1e-15,
            "delta boundaries");
  c.require(great_date(pd("2019-04-21"), pd("2019-04-21")) == 1.0, "identical dates != 1");
  c.require(great_date(pd("2019-04-21"), pd("2019")) == 1.0, "year ground truth must ignore month/day");
  c.require(example_f1(hl("Paris, France, Europe"), hl("Paris, France, Europe")) == 1.0, "E-F1 identity");
  c.require(std::abs(example_f1(hl("France, Europe"), hl("Paris, France, Europe")) - 0.8) < 1e-15, "E-F1 0.8 case");
  c.require(std::abs(example_f1(hl("Berlin, Germany, Europe"), hl("Paris, France, Europe")) - 1.0 / 3) < 1e-15,
            "E-F1 1/3 case");
  c.require(em_at_k_date({"2015-06-12"}, pd("2015-06"), 1) == 1, "EM truncation");
  c.require(em_at_k_location({"x", "y", "z", "w", "Paris"}, "Paris", 1) == 0 &&
                em_at_k_location({"x", "y", "z", "w", "Paris"}, "Paris", 5) == 1,
            "EM position");
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.require(secs < 10.0, "runtime " + fmt("%.1fs", secs));
  c.note(fmt("%.2fs", secs));
  return c.outcome();
}

Outcome worked_examples() {
  Checks c;
  const Gazetteer g({{"Paris", "France", "Europe", {48.8566, 2.3522}}, {"France", "", "Europe", {46.6, 2.2}}});
  const auto expanded = g.expand(HierLocation::parse("Paris, France"));
  std::set<std::vector<std::string>> chains;
  for (std::size_t i = 0; i < expanded.components.size(); ++i)
    chains.emplace(expanded.components.begin() + static_cast<std::ptrdiff_t>(i), expanded.components.end());
  const std::set<std::vector<std::string>> expected = {
      {"Paris", "France", "Europe"}, {"France", "Europe"}, {"Europe"}};
  c.require(chains == expected, "Paris chain set is " + expanded.str());

  DateScoreParts parts;
  DateScoring scoring;
  scoring.t_day = 15;
  great_date(PartialDate::parse("2019-04-11"), PartialDate::parse("2019-04-21"), scoring, &parts);
  c.require(parts.day && std::abs(*parts.day - 1.0 / 3.0) <= 1e-12, "S_day != 1/3");
  c.note("S_day " + fmt("%.15f", parts.day.value_or(-1)));

  const double gl = great_loc_km(343.6);
  c.require(std::abs(gl - 0.6564) <= 1e-3, "GREAT_loc(343.6) = " + fmt("%.5f", gl));
  const double gl_pl = great_loc({48.8566, 2.3522}, {51.5074, -0.1278});
  c.require(std::abs(gl_pl - 0.6564) <= 1e-3, "GREAT_loc(Paris, London) = " + fmt("%.5f", gl_pl));
  c.note("GREAT_loc " + fmt("%.4f", gl));
  return c.outcome();
}

// ------------------------------------------------------------ bi-encoder

Outcome gradient_check() {
  Checks c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0, 0.3);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t b = 1 + rng() % 8, d = 1 + rng() % 16;
    const double tau = t % 2 ? 0.07 : 1.0;
    std::vector<double> x(b * d), y(b * d);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    const auto r = info_nce_loss(x, y, b, d, tau);
    const double h = 1e-6;
    auto probe = [&](std::vector<double>& v, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double up = info_nce_loss(x, y, b, d, tau).loss;
        v[i] = keep - h;
        const double down = info_nce_loss(x, y, b, d, tau).loss;
        v[i] = keep;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-3, std::abs(fd) + std::abs(grad[i])));
      }
    };
    probe(x, r.grad_image);
    probe(y, r.grad_caption);
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.require(worst < 1e-4, "max relative error " + fmt("%.3g", worst));
  c.require(secs < 5.0, "runtime " + fmt("%.1fs", secs));
  c.note("50 instances, max relative error " + fmt("%.2g", worst) + ", " + fmt("%.2fs", secs));
  return c.outcome();
}

Outcome batch_builder_property() {
  Checks c;
  log::ScopedSink quiet([](log::Level, std::string_view) {});
  std::size_t violations = 0, ratio_errors = 0, short_batches = 0, batches = 0;
  for (std::uint64_t pool_seed = 0; pool_seed < 20; ++pool_seed) {
    // 300 images, each event-relevant to 3-5 of 80 shared articles drawn
    // with a strong bias toward the low ids, so most image pairs conflict.
    std::mt19937_64 rng(pool_seed);
    LabelStore labels;
    std::vector<std::string> train, text_ids, own;
    for (int a = 0; a < 80; ++a)
      for (int k = 0; k < 3; ++k) text_ids.push_back(caption_row_id("hot" + std::to_string(a), k));
    for (int a = 0; a < 60; ++a) {
      text_ids.push_back(caption_row_id("cold" + std::to_string(a), 0));
      own.push_back("cold" + std::to_string(a));
    }
    for (int i = 0; i < 300; ++i) {
      RelevanceLabels l;
      l.image_id = "img" + std::to_string(i);
      const int n = 3 + static_cast<int>(rng() % 3);
      while (static_cast<int>(l.event_relevant.size()) < n)
        l.event_relevant.insert("hot" + std::to_string(std::min(rng() % 80, rng() % 80)));
      l.location_relevant = l.event_relevant;
      labels.put(l);
      train.push_back(l.image_id);
    }
    std::normal_distribution<float> g;
    auto matrix = [&](const std::vector<std::string>& ids) {
      MatrixBuilder b(4);
      for (const auto& id : ids) b.add(id, std::vector<float>{g(rng), g(rng), g(rng), g(rng)});
      return std::move(b).build();
    };
    const auto text = matrix(text_ids), images = matrix(own);
    const BatchSource src(labels, train, text, &images);
    for (int i = 0; i < 500; ++i) {
      const std::size_t bs = 2 + rng() % 31;  // 2..32
      const double nr = static_cast<double>(rng() % 11) / 10.0;
      const auto b = build_batch(src, bs, nr, rng);
      ++batches;
      if (batch_violation(b, src)) ++violations;
      const double want_random = nr * static_cast<double>(bs);
      if (b.pairs.size() < bs) ++short_batches;
      if (std::abs(static_cast<double>(b.n_random) - want_random) > 1.0 ||
          std::abs(static_cast<double>(b.n_supervised) - (static_cast<double>(bs) - want_random)) > 1.0)
        ++ratio_errors;
    }
  }
  c.require(violations == 0, std::to_string(violations) + " forbidden-caption violations");
  c.require(ratio_errors == 0, std::to_string(ratio_errors) + " batches off the n_random proportion");
  c.require(short_batches == 0, std::to_string(short_batches) + " short batches");
  c.note(std::to_string(batches) + " batches of 2-32 pairs, 0 violations, 0 off-proportion");
  return c.outcome();
}

// ------------------------------------------------------------ clustering

Outcome clustering_oracle() {
  Checks c;
  const auto t0 = Clock::now();
  std::size_t bad = 0;
  std::string first;
  for (std::uint64_t s = 0; s < 500; ++s)
    if (const auto p = oracle::check_clustering(1000 + s)) {
      if (!bad++) first = *p;
    }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.require(bad == 0, std::to_string(bad) + " failing instances, first: " + first);
  c.require(secs < 30.0, "runtime " + fmt("%.1fs", secs));
  c.note("500 instances, " + fmt("%.2fs", secs));
  return c.outcome();
}

// ------------------------------------------------------------ synthetic runs

struct SyntheticRun {
  double bi_baseline = 0, bi_best = 0;
  double loc_bi = 0, loc_rerank = 0, evt_bi = 0, evt_rerank = 0;
  std::vector<double> great_by_size;
  std::string rankings;
  std::string report;
  std::vector<std::byte> checkpoints;
  std::vector<RetrievalResult> results;
  int k_evt = 0, k_loc = 0;
  double train_seconds = 0, eval_seconds = 0, size_seconds = 0;
};

SyntheticRun run_synthetic(std::uint64_t seed) {
  log::ScopedSink quiet([](log::Level, std::string_view) {});
  SyntheticRun out;
  auto t0 = Clock::now();
  synth::WorldConfig wc;
  wc.seed = seed;
  const auto world = synth::generate(wc);
  const auto data = synth::to_dataset(world);
  const Config cfg = synth::scaled_config(seed);
  out.k_evt = cfg.k_evt;
  out.k_loc = cfg.k_loc;
  const auto active = data.corpus.ids();
  TemplateCache cache(synth::kDim, std::make_shared<synth::WorldTextEmbedder>(world.places));

  const auto bi = train_biencoder_stage(data, cfg, active);
  out.bi_baseline = bi.baseline_recall;
  for (const auto& e : bi.log)
    if (e.epoch == bi.best_epoch) out.bi_best = e.recall;
  const auto loc = train_location_stage(data, cfg, bi.heads, cache, active);
  const auto evt = train_event_stage(data, cfg, bi.heads, cache, active);
  out.train_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  t0 = Clock::now();
  const Engine engine(data, cfg, Models{bi.heads, loc.scorer, evt.scorer}, cache, active);
  const auto test = data.image_ids(Split::test);
  out.loc_bi = location_recall_at_1(engine, data, test, nullptr, cache);
  out.loc_rerank = location_recall_at_1(engine, data, test, &engine.models().location, cache);
  out.evt_bi = event_recall_at_1(engine, data, test, nullptr, cache);
  out.evt_rerank = event_recall_at_1(engine, data, test, &engine.models().event, cache);
  out.results = engine.run_batch(test);
  for (const auto& r : out.results) out.rankings += to_json(r).dump() + "\n";
  out.report = evaluate_run(out.results, data, cfg).jsonl();
  for (const auto& bytes : {encode_heads(bi.heads), encode_scorer(loc.scorer, kLocScorerMagic),
                            encode_scorer(evt.scorer, kEventScorerMagic)})
    out.checkpoints.insert(out.checkpoints.end(), bytes.begin(), bytes.end());
  out.eval_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  // Nested thirds of the corpus (every third id, then two of every three).
  t0 = Clock::now();
  for (int part = 1; part <= 3; ++part) {
    std::vector<std::string> subset;
    for (std::size_t i = 0; i < active.size(); ++i)
      if (static_cast<int>(i % 3) < part) subset.push_back(active[i]);
    const Engine sized(data, cfg, engine.models(), cache, subset);
    const auto report = evaluate_run(sized.run_batch(test), data, cfg);
    out.great_by_size.push_back(report.means.count("great") ? report.means.at("great") : 0.0);
  }
  out.size_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

Outcome algorithm_conformance(const SyntheticRun& run) {
  Checks c;
  std::size_t few = 0, many = 0;
  for (const auto& r : run.results) {
    std::set<std::string> top_k;
    for (const auto& h : r.candidates) top_k.insert(h.article_id);
    const std::set<std::string> evt(r.event_ranking.begin(), r.event_ranking.end());
    c.require(evt.size() == r.event_ranking.size(), r.image_id + ": duplicate in event ranking");
    c.require(evt == top_k, r.image_id + ": event ranking is not a permutation of the top-K");
    std::set<std::string> top_loc;
    for (std::size_t i = 0; i < std::min<std::size_t>(r.candidates.size(), static_cast<std::size_t>(run.k_loc)); ++i)
      top_loc.insert(s_bi_order(r.candidates)[i]);
    const auto loc_ids = r.location_ids();
    const std::set<std::string> loc(loc_ids.begin(), loc_ids.end());
    c.require(loc.size() == loc_ids.size(), r.image_id + ": duplicate in location ranking");
    c.require(loc == top_loc, r.image_id + ": location ranking is not a permutation of the top-k_loc");
    if (r.clusters.size() < 2) {
      ++few;
      c.require(r.event_ranking == s_bi_order(r.candidates), r.image_id + ": |C| < 2 but ranking differs from s_bi");
    } else {
      ++many;
    }
  }
  // Direct rule checks on random hit lists with zero or one cluster.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int t = 0; t < 1000; ++t) {
    std::vector<SearchHit> hits;
    for (int i = 0; i < 20; ++i) hits.push_back({"a" + std::to_string(i), -1, u(rng)});
    std::vector<ArticleCluster> clusters;
    if (t % 2) {
      ArticleCluster one;
      one.article_ids = {"a3", "a7", "a9"};
      one.representative_id = "a3";
      one.s_evt = 0.99f;
      clusters.push_back(one);
    }
    std::vector<SearchHit> sorted = hits;
    std::sort(sorted.begin(), sorted.end(), [](const SearchHit& a, const SearchHit& b) {
      return a.score != b.score ? a.score > b.score : a.article_id < b.article_id;
    });
    std::vector<std::string> want;
    for (const auto& h : sorted) want.push_back(h.article_id);
    c.require(rank_events(clusters, hits, 2) == want, "random instance with |C| < 2 differs from s_bi order");
  }
  c.note(std::to_string(run.results.size()) + " test queries (" + std::to_string(few) + " with |C|<2, " +
         std::to_string(many) + " reranked) + 1000 random |C|<2 instances");
  return c.outcome();
}

Outcome synthetic_end_to_end(const SyntheticRun& run) {
  Checks c;
  c.require(run.bi_best > run.bi_baseline,
            "bi-encoder dev R@100 " + fmt("%.4f", run.bi_best) + " <= identity " + fmt("%.4f", run.bi_baseline));
  c.require(run.loc_rerank > run.loc_bi,
            "location R@1 " + fmt("%.4f", run.loc_rerank) + " <= bi-encoder " + fmt("%.4f", run.loc_bi));
  c.require(run.evt_rerank > run.evt_bi,
            "event R@1 " + fmt("%.4f", run.evt_rerank) + " <= bi-encoder " + fmt("%.4f", run.evt_bi));
  const double secs = run.train_seconds + run.eval_seconds;
  c.require(secs < 300.0, "runtime " + fmt("%.1fs", secs));
  c.note("(a) dev R@100 " + fmt("%.3f", run.bi_baseline) + " -> " + fmt("%.3f", run.bi_best));
  c.note("(b) test location R@1 " + fmt("%.3f", run.loc_bi) + " -> " + fmt("%.3f", run.loc_rerank));
  c.note("(c) test event R@1 " + fmt("%.3f", run.evt_bi) + " -> " + fmt("%.3f", run.evt_rerank));
  c.note(fmt("%.1fs", secs));
  return c.outcome();
}

Outcome corpus_size_trend(const SyntheticRun& run) {
  Checks c;
  const auto& g = run.great_by_size;
  c.require(g.size() == 3 && g[0] <= g[1] && g[1] <= g[2],
            "GREAT by size " + fmt("%.4f", g[0]) + " / " + fmt("%.4f", g[1]) + " / " + fmt("%.4f", g[2]));
  c.require(run.size_seconds < 120.0, "runtime " + fmt("%.1fs", run.size_seconds));
  c.note("GREAT 1/3 " + fmt("%.4f", g[0]) + ", 2/3 " + fmt("%.4f", g[1]) + ", full " + fmt("%.4f", g[2]));
  c.note(fmt("%.1fs", run.size_seconds));
  return c.outcome();
}

Outcome determinism(const SyntheticRun& a, const SyntheticRun& b) {
  Checks c;
  c.require(a.rankings == b.rankings, "rankings differ between runs");
  c.require(a.report == b.report, "reports differ between runs");
  c.require(a.checkpoints == b.checkpoints, "checkpoints differ between runs");
  c.note(std::to_string(a.rankings.size() + a.report.size() + a.checkpoints.size()) + " bytes compared");
  return c.outcome();
}

// ------------------------------------------------------------ formats

Outcome format_round_trips() {
  Checks c;
  const fs::path dir = fs::temp_directory_path() / "newsrecon_acceptance_formats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(8);
  std::normal_distribution<float> g;

  MatrixBuilder mb(6);
  for (int i = 0; i < 25; ++i)
    mb.add(caption_row_id("nytimes:" + std::to_string(i / 3), i % 3), std::vector<float>{g(rng), g(rng), g(rng), g(rng), g(rng), g(rng)});
  const auto matrix = std::move(mb).build();

  auto heads = HeadPair::identity(6, 6, 4);
  for (auto& w : heads.image.weight) w = g(rng);
  for (auto& w : heads.text.bias) w = g(rng);
  heads.config_hash = 0xfeedULL;
  auto loc = CrossScorer::zeros(6, Combiner::parse("concatenation"));
  auto evt = CrossScorer::zeros(6, Combiner::parse("concatenation+multiplication+difference"));
  for (auto* s : {&loc, &evt}) {
    for (auto& w : s->weight) w = g(rng);
    s->bias = g(rng);
  }
  TemplateCache cache(6, std::make_shared<FakeTextEmbedder>(6, 3));
  for (int i = 0; i < 10; ++i) cache.get("An image from Place" + std::to_string(i));

  struct Format {
    std::string name;
    std::function<void(const fs::path&)> save;
    std::function<void(const fs::path&, const fs::path&)> load_save;
    std::function<void(const fs::path&)> load;
  };
  const std::vector<Format> formats = {
      {"NREC", [&](const fs::path& p) { save_matrix(matrix, p); },
       [](const fs::path& in, const fs::path& o) { save_matrix(load_matrix(in), o); },
       [](const fs::path& p) { load_matrix(p); }},
      {"NRHD", [&](const fs::path& p) { save_heads(heads, p); },
       [](const fs::path& in, const fs::path& o) { save_heads(load_heads(in), o); },
       [](const fs::path& p) { load_heads(p); }},
      {"NRXL", [&](const fs::path& p) { save_scorer(loc, p, kLocScorerMagic); },
       [](const fs::path& in, const fs::path& o) { save_scorer(load_scorer(in, kLocScorerMagic), o, kLocScorerMagic); },
       [](const fs::path& p) { load_scorer(p, kLocScorerMagic); }},
      {"NRXE", [&](const fs::path& p) { save_scorer(evt, p, kEventScorerMagic); },
       [](const fs::path& in, const fs::path& o) {
         save_scorer(load_scorer(in, kEventScorerMagic), o, kEventScorerMagic);
       },
       [](const fs::path& p) { load_scorer(p, kEventScorerMagic); }},
      {"template cache", [&](const fs::path& p) { cache.save(p); },
       [](const fs::path& in, const fs::path& o) { TemplateCache::open(in, 6, nullptr)->save(o); },
       [](const fs::path& p) { TemplateCache::open(p, 6, nullptr); }},
  };

  std::size_t corruptions = 0;
  for (const auto& f : formats) {
    const auto first = dir / (f.name + ".1"), second = dir / (f.name + ".2"), bad = dir / (f.name + ".bad");
    f.save(first);
    f.load_save(first, second);
    const auto bytes = io::read_file(first);
    c.require(bytes == io::read_file(second), f.name + ": save -> load -> save changed the bytes");

    std::vector<std::pair<std::string, std::vector<std::byte>>> cases;
    auto with = [&](std::string what, auto&& edit) {
      auto b = bytes;
      edit(b);
      cases.emplace_back(std::move(what), std::move(b));
    };
    with("bad magic", [](auto& b) { b[0] = std::byte{'Z'}; });
    with("unknown version", [](auto& b) { b[4] = std::byte{0x7f}; });
    with("flipped payload byte", [](auto& b) { b[b.size() / 2] ^= std::byte{0x10}; });
    with("flipped checksum byte", [](auto& b) { b.back() ^= std::byte{0x01}; });
    with("truncated", [](auto& b) { b.resize(b.size() - 5); });
    with("trailing byte", [](auto& b) { b.push_back(std::byte{0}); });
    with("header only", [](auto& b) { b.resize(6); });
    with("empty", [](auto& b) { b.clear(); });
    for (const auto& [what, b] : cases) {
      io::write_file(bad, b);
      bool format_error = false;
      try {
        f.load(bad);
      } catch (const FormatError&) {
        format_error = true;
      } catch (const std::exception& e) {
        c.require(false, f.name + " " + what + ": wrong error type: " + e.what());
        continue;
      }
      c.require(format_error, f.name + " " + what + ": loaded without error");
      ++corruptions;
    }
  }
  fs::remove_all(dir);
  c.note(std::to_string(formats.size()) + " formats byte-identical, " + std::to_string(corruptions) +
         " corrupted files rejected");
  return c.outcome();
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::printf("%s %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto guarded = [&](const char* name, const std::function<Outcome()>& f) {
    try {
      report(name, f());
    } catch (const std::exception& e) {
      report(name, Outcome{false, std::string("exception: ") + e.what()});
    }
  };

  guarded("metric_oracle_suite", metric_oracle_suite);
  guarded("worked_examples", worked_examples);
  guarded("gradient_check", gradient_check);
  guarded("batch_builder_property", batch_builder_property);
  guarded("clustering_oracle", clustering_oracle);

  std::optional<SyntheticRun> first, second;
  try {
    first = run_synthetic(7);
    second = run_synthetic(7);
  } catch (const std::exception& e) {
    std::printf("synthetic run failed: %s\n", e.what());
  }
  if (first && second) {
    guarded("algorithm_conformance", [&] { return algorithm_conformance(*first); });
    guarded("synthetic_end_to_end", [&] { return synthetic_end_to_end(*first); });
    guarded("corpus_size_trend", [&] { return corpus_size_trend(*first); });
    guarded("determinism", [&] { return determinism(*first, *second); });
  } else {
    for (const char* n : {"algorithm_conformance", "synthetic_end_to_end", "corpus_size_trend", "determinism"})
      report(n, Outcome{false, "synthetic run did not complete"});
  }
  guarded("format_round_trips", format_round_trips);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
