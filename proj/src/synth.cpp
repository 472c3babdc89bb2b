#include "newsrecon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "newsrecon/error.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon::synth {
namespace {

constexpr std::size_t kLocEnd = 22;
constexpr std::size_t kKindRegion = 22;
constexpr std::size_t kKindTown = 23;
constexpr std::size_t kTimeBegin = 24;
constexpr std::size_t kEventBegin = 32;
constexpr std::size_t kEventEnd = 48;
constexpr double kKindWeight = 0.5;
constexpr double kPeriods[] = {30.0, 91.0, 365.0, 1461.0};

using Vec = std::vector<double>;

std::string numbered(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

Vec gaussian_block(std::mt19937_64& rng, std::size_t begin, std::size_t end, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(kDim, 0.0);
  double n = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    v[i] = g(rng);
    n += v[i] * v[i];
  }
  n = std::sqrt(n);
  for (std::size_t i = begin; i < end; ++i) v[i] *= scale / n;
  return v;
}

void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < kDim; ++i) y[i] += a * x[i];
}

Vec unit(Vec v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

std::vector<float> to_float(const Vec& v) { return std::vector<float>(v.begin(), v.end()); }

Vec time_vec(const Date& d) {
  const auto f = time_features(d);
  Vec v(kDim, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) v[kTimeBegin + i] = f[i];
  return v;
}

/// Independent noise per row: isotropic over the signal blocks plus a
/// modality-specific nuisance block.
Vec noise(std::mt19937_64& rng, double shared, double nuisance) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(kDim, 0.0);
  const double s = shared / std::sqrt(static_cast<double>(kEventEnd));
  const double t = nuisance / std::sqrt(static_cast<double>(kDim - kEventEnd));
  for (std::size_t i = 0; i < kEventEnd; ++i) v[i] = s * g(rng);
  for (std::size_t i = kEventEnd; i < kDim; ++i) v[i] = t * g(rng);
  return v;
}

struct Town {
  std::string name;
  std::size_t region;
  Vec place;
  GeoPoint point;
};

struct Region {
  std::string name;
  Vec place;
  GeoPoint point;
};

struct Event {
  Date date;
  Vec identity;
};

}  // namespace

void WorldConfig::validate() const {
  if (n_towns == 0 || towns_per_region == 0 || n_towns % towns_per_region != 0)
    throw ConfigError("n_towns must be a positive multiple of towns_per_region");
  if (n_weeks == 0 || n_articles == 0) throw ConfigError("n_weeks and n_articles must be positive");
  if (p_town_and_region < 0 || p_town_only < 0 || p_town_and_region + p_town_only > 1)
    throw ConfigError("keyword shares must be non-negative and sum to at most 1");
  if (p_generic < 0 || p_generic >= 1) throw ConfigError("p_generic must be in [0, 1)");
  if (p_generic > 0 && n_foreign == 0) throw ConfigError("generic articles need n_foreign > 0");
  if (p_month_only < 0 || p_month_only > 1) throw ConfigError("p_month_only must be in [0, 1]");
  if (max_captions < 1 || max_captions > static_cast<int>(kMaxNewsCaptions))
    throw ConfigError("max_captions must be in [1, 5]");
}

std::vector<float> time_features(const Date& d) {
  const double t = static_cast<double>(d.days_since_epoch());
  const double scale = 1.0 / std::sqrt(static_cast<double>(std::size(kPeriods)));
  std::vector<float> out;
  for (double p : kPeriods) {
    const double a = 2.0 * std::numbers::pi * t / p;
    out.push_back(static_cast<float>(scale * std::cos(a)));
    out.push_back(static_cast<float>(scale * std::sin(a)));
  }
  return out;
}

World generate(const WorldConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::size_t n_regions = cfg.n_towns / cfg.towns_per_region;
  std::vector<Region> regions;
  for (std::size_t r = 0; r < n_regions; ++r) {
    Vec place = gaussian_block(rng, 0, kLocEnd, 1.0);
    place[kKindRegion] = kKindWeight;
    regions.push_back({numbered("Region", r + 1, 2), unit(place),
                       {-40.0 + 95.0 * unif(rng), -170.0 + 340.0 * unif(rng)}});
  }
  std::vector<Town> towns;
  for (std::size_t t = 0; t < cfg.n_towns; ++t) {
    const std::size_t r = t / cfg.towns_per_region;
    Vec own = gaussian_block(rng, 0, kLocEnd, 0.8);
    Vec place(kDim, 0.0);
    for (std::size_t i = 0; i < kLocEnd; ++i) place[i] = 0.6 * regions[r].place[i] + own[i];
    place = unit(place);
    place[kKindTown] = kKindWeight;
    const GeoPoint c = regions[r].point;
    towns.push_back({numbered("Town", t + 1, 3), r, unit(place),
                     {c.lat - 1.2 + 2.4 * unif(rng), c.lon - 1.2 + 2.4 * unif(rng)}});
  }

  std::vector<Town> foreign;
  const GeoPoint abroad{-20.0, 120.0};
  for (std::size_t f = 0; f < cfg.n_foreign; ++f) {
    Vec place = gaussian_block(rng, 0, kLocEnd, 1.0);
    place[kKindTown] = kKindWeight;
    foreign.push_back({numbered("Farcity", f + 1, 2), 0, unit(place),
                       {abroad.lat - 5.0 + 10.0 * unif(rng), abroad.lon - 5.0 + 10.0 * unif(rng)}});
  }
  // Generic captions sit at the mean of all towns.
  Vec hub(kDim, 0.0);
  for (const auto& t : towns) axpy(1.0, t.place, hub);
  hub = unit(std::move(hub));

  std::vector<std::vector<Event>> events(cfg.n_towns);
  std::uniform_int_distribution<int> weekday(0, 6);
  for (std::size_t t = 0; t < cfg.n_towns; ++t)
    for (std::size_t w = 0; w < cfg.n_weeks; ++w)
      events[t].push_back({cfg.start.plus_days(static_cast<std::int64_t>(7 * w) + weekday(rng)),
                           gaussian_block(rng, kEventBegin, kEventEnd, 1.0)});

  // Zipf popularity over a random ranking of towns.
  std::vector<std::size_t> rank(cfg.n_towns);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> popularity(cfg.n_towns);
  for (std::size_t i = 0; i < cfg.n_towns; ++i)
    popularity[rank[i]] = 1.0 / std::pow(static_cast<double>(i + 1), cfg.zipf_exponent);
  std::discrete_distribution<std::size_t> pick_town(popularity.begin(), popularity.end());
  std::uniform_int_distribution<std::size_t> pick_week(0, cfg.n_weeks - 1);
  std::uniform_int_distribution<int> lag(0, 3);
  std::uniform_int_distribution<int> n_caps(1, cfg.max_captions);

  auto signal = [&](const Vec& place, const Event& e, const Date& d, double w_time) {
    Vec v(kDim, 0.0);
    axpy(cfg.w_location, place, v);
    axpy(cfg.w_event, e.identity, v);
    if (w_time != 0.0) axpy(w_time, time_vec(d), v);
    return v;
  };

  World world;
  world.cfg = cfg;
  struct Placed {
    std::size_t town, week;
  };
  std::vector<Placed> placed;
  MatrixBuilder captions(kDim), article_images(kDim);
  for (std::size_t a = 0; a < cfg.n_articles; ++a) {
    if (unif(rng) < cfg.p_generic) {
      std::uniform_int_distribution<std::size_t> pick_foreign(0, foreign.size() - 1);
      const Town& place = foreign[pick_foreign(rng)];
      const Event ev{cfg.start.plus_days(static_cast<std::int64_t>(7 * pick_week(rng)) + weekday(rng)),
                     gaussian_block(rng, kEventBegin, kEventEnd, 1.0)};
      Article art;
      art.id = "nytimes:" + numbered("synth-", a + 1, 5);
      art.published_at = ev.date;
      art.headline = "Around the world: " + place.name;
      art.abstract = "A roundup of news from " + place.name + ", Farland.";
      art.geo_keywords = {place.name, "Farland"};
      art.keep = true;
      const int nc = n_caps(rng);
      for (int c = 0; c < nc; ++c) {
        art.news_captions.push_back("A crowd gathers in a street");
        Vec v = signal(hub, ev, art.published_at, cfg.w_caption_time);
        axpy(1.0, noise(rng, cfg.shared_noise, cfg.caption_nuisance), v);
        captions.add(caption_row_id(art.id, c), to_float(unit(std::move(v))));
      }
      Vec img = signal(place.place, ev, art.published_at, cfg.w_image_time);
      axpy(1.0, noise(rng, cfg.shared_noise, cfg.image_nuisance), img);
      article_images.add(art.id, to_float(unit(std::move(img))));
      world.corpus.insert(std::move(art));
      continue;
    }
    const std::size_t t = pick_town(rng);
    const std::size_t w = pick_week(rng);
    const Town& town = towns[t];
    const Region& region = regions[town.region];
    const Event& ev = events[t][w];

    Article art;
    art.id = "nytimes:" + numbered("synth-", a + 1, 5);
    art.source = Source::nytimes;
    art.published_at = ev.date.plus_days(lag(rng));
    art.headline = town.name + ": week " + std::to_string(w + 1) + " report";
    art.abstract = "Coverage of the week " + std::to_string(w + 1) + " event in " + town.name + ", " + region.name + ".";
    const double u = unif(rng);
    Vec kw(kDim, 0.0);
    if (u < cfg.p_town_and_region) {
      art.geo_keywords = {town.name, region.name};
      axpy(1.0, town.place, kw);
      axpy(1.0, region.place, kw);
    } else if (u < cfg.p_town_and_region + cfg.p_town_only) {
      art.geo_keywords = {town.name};
      axpy(1.0, town.place, kw);
    } else {
      art.geo_keywords = {region.name};
      axpy(1.0, region.place, kw);
    }
    kw = unit(kw);
    art.keep = true;
    const int nc = n_caps(rng);
    for (int c = 0; c < nc; ++c) {
      art.news_captions.push_back("Scene " + std::to_string(c + 1) + " of the " + town.name + " event");
      Vec v = signal(kw, ev, art.published_at, cfg.w_caption_time);
      axpy(1.0, noise(rng, cfg.shared_noise, cfg.caption_nuisance), v);
      captions.add(caption_row_id(art.id, c), to_float(unit(std::move(v))));
    }
    Vec img = signal(town.place, ev, art.published_at, cfg.w_image_time);
    axpy(1.0, noise(rng, cfg.shared_noise, cfg.image_nuisance), img);
    article_images.add(art.id, to_float(unit(std::move(img))));
    placed.push_back({t, w});
    world.corpus.insert(std::move(art));
  }

  const std::size_t n_images = cfg.n_train_images + cfg.n_dev_images + cfg.n_test_images;
  if (placed.empty()) throw ConfigError("no local article to draw images from");
  std::uniform_int_distribution<std::size_t> pick_article(0, placed.size() - 1);
  std::uniform_int_distribution<int> shoot(0, 2);
  MatrixBuilder image_rows(kDim);
  for (std::size_t i = 0; i < n_images; ++i) {
    const Placed p = placed[pick_article(rng)];
    const Town& town = towns[p.town];
    const Event& ev = events[p.town][p.week];
    const Date d = ev.date.plus_days(shoot(rng));
    ImageRecord rec;
    rec.id = numbered("img-", i + 1, 5);
    rec.gt_location = town.name + ", " + regions[town.region].name;
    rec.gt_coordinates = town.point;
    rec.gt_date = unif(rng) < cfg.p_month_only ? PartialDate{d.year(), d.month(), std::nullopt} : PartialDate::from(d);
    rec.split = i < cfg.n_train_images ? Split::train
                : i < cfg.n_train_images + cfg.n_dev_images ? Split::dev
                                                            : Split::test;
    Vec v = signal(town.place, ev, d, cfg.w_image_time);
    axpy(1.0, noise(rng, cfg.shared_noise, cfg.image_nuisance), v);
    image_rows.add(rec.id, to_float(unit(std::move(v))));
    world.images.push_back(std::move(rec));
  }

  world.image_embeddings = std::move(image_rows).build();
  world.caption_embeddings = std::move(captions).build();
  world.article_image_embeddings = std::move(article_images).build();

  MatrixBuilder places(kDim);
  for (const auto& r : regions) places.add(r.name, to_float(r.place));
  for (const auto& t : towns) places.add(t.name, to_float(t.place));
  if (!foreign.empty()) {
    Vec far(kDim, 0.0);
    for (const auto& f : foreign) axpy(1.0, f.place, far);
    far[kKindRegion] = kKindWeight;
    places.add("Farland", to_float(unit(std::move(far))));
  }
  for (const auto& f : foreign) places.add(f.name, to_float(f.place));
  world.places = std::move(places).build();

  world.gazetteer.push_back({"Synthland", "", "Synthia", {10.0, 10.0}});
  for (const auto& r : regions) world.gazetteer.push_back({r.name, "Synthland", "Synthia", r.point});
  for (const auto& t : towns) world.gazetteer.push_back({t.name, regions[t.region].name, "Synthia", t.point});
  if (!foreign.empty()) world.gazetteer.push_back({"Farland", "", "Farcontinent", abroad});
  for (const auto& f : foreign) world.gazetteer.push_back({f.name, "Farland", "Farcontinent", f.point});
  return world;
}

WorldTextEmbedder::WorldTextEmbedder(EmbeddingMatrix places) : places_(std::move(places)) {
  if (places_.dim() != kDim)
    throw DimensionError("place vectors must have dim " + std::to_string(kDim) + ", got " +
                         std::to_string(places_.dim()));
  for (std::size_t i = 0; i < places_.rows(); ++i) by_name_[text::normalize_space(places_.ids()[i])] = i;
}

bool WorldTextEmbedder::add_places(const std::vector<std::string>& names, std::vector<float>& out) const {
  Vec sum(kDim, 0.0);
  bool any = false;
  for (const auto& n : names) {
    const auto it = by_name_.find(text::normalize_space(n));
    if (it == by_name_.end()) continue;
    const auto row = places_.row(it->second);
    for (std::size_t i = 0; i < kDim; ++i) sum[i] += row[i];
    any = true;
  }
  if (!any) return false;
  sum = unit(std::move(sum));
  for (std::size_t i = 0; i < kDim; ++i) out[i] += static_cast<float>(sum[i]);
  return true;
}

std::vector<float> WorldTextEmbedder::embed(const std::string& text) const {
  static constexpr std::string_view kFrom = "An image from ";
  static constexpr std::string_view kBetween = "An image between ";
  std::vector<float> out(kDim, 0.0f);
  const std::string_view t(text);
  if (t.starts_with(kFrom)) {
    if (add_places(text::split(t.substr(kFrom.size()), ','), out)) {
      normalize(out);
      return out;
    }
  } else if (t.starts_with(kBetween)) {
    const auto rest = t.substr(kBetween.size());
    const auto and_pos = rest.find(" and ");
    const auto in_pos = rest.find(" in ");
    if (and_pos != std::string_view::npos && in_pos != std::string_view::npos && and_pos < in_pos) {
      const auto a = Date::try_parse(rest.substr(0, and_pos));
      const auto b = Date::try_parse(rest.substr(and_pos + 5, in_pos - and_pos - 5));
      if (a && b && add_places(text::split(rest.substr(in_pos + 4), ','), out)) {
        const Date mid = Date::from_days((a->days_since_epoch() + b->days_since_epoch()) / 2);
        const auto f = time_features(mid);
        for (std::size_t i = 0; i < f.size(); ++i) out[kTimeBegin + i] += f[i];
        normalize(out);
        return out;
      }
    }
  }
  return fake_unit_vector(text, kDim);
}

void write_world(const World& world, const std::filesystem::path& dir, int n_window) {
  std::filesystem::create_directories(dir);
  world.corpus.save(dir / "corpus.jsonl");
  save_images(world.images, dir / "images.jsonl");
  std::vector<Article> articles;
  for (const auto& [id, a] : world.corpus.articles()) articles.push_back(a);
  label_all(world.images, articles, n_window).save(dir / "labels.jsonl");
  save_matrix(world.image_embeddings, dir / "images.nrec");
  save_matrix(world.article_image_embeddings, dir / "article_images.nrec");
  save_matrix(world.caption_embeddings, dir / "captions.nrec");
  save_matrix(world.places, dir / "places.nrec");

  std::ofstream g(dir / "gazetteer.csv");
  g << "place,parent,continent,lat,lon\n";
  for (const auto& r : world.gazetteer) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.point.lat, r.point.lon);
    g << r.place << ',' << r.parent << ',' << r.continent << ',' << buf << '\n';
  }
  if (!g) throw Error("cannot write " + (dir / "gazetteer.csv").string());
}

Dataset to_dataset(const World& world, int n_window) {
  Dataset d;
  d.corpus = world.corpus;
  d.reindex();
  d.images = world.images;
  d.image_embeddings = world.image_embeddings;
  d.text_embeddings = world.caption_embeddings;
  d.article_image_embeddings = world.article_image_embeddings;
  d.gazetteer = Gazetteer(world.gazetteer);
  std::vector<Article> articles;
  for (const auto& [id, a] : world.corpus.articles()) articles.push_back(a);
  d.labels = label_all(world.images, articles, n_window);
  return d;
}

Config scaled_config(std::uint64_t seed) {
  Config c;
  c.seed = seed;
  c.template_embedder = TemplateEmbedder::world;
  c.biencoder.epochs = 10;
  c.biencoder.batch_size = 64;
  c.biencoder.learning_rate = 0.05;
  c.biencoder.momentum = 0.9;
  c.biencoder.recall_k = 100;
  c.xenc_loc.epochs = 5;
  c.xenc_loc.batch_size = 32;
  c.xenc_loc.learning_rate = 0.05;
  c.xenc_loc.weight_decay = 0.1;
  c.xenc_evt.epochs = 15;
  c.xenc_evt.batch_size = 32;
  c.xenc_evt.learning_rate = 0.5;
  c.validate();
  return c;
}

}  // namespace newsrecon::synth
