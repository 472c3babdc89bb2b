#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <random>

#include "newsrecon/error.hpp"
#include "newsrecon/labeling.hpp"

using namespace newsrecon;

namespace {

Article art(std::string id, std::string date, std::vector<std::string> kws) {
  Article a;
  a.id = std::move(id);
  a.headline = "h";
  a.published_at = Date::parse(date);
  a.geo_keywords = std::move(kws);
  return a;
}

ImageRecord img(std::string loc, std::optional<std::string> date = std::nullopt) {
  ImageRecord r;
  r.id = "img";
  r.gt_location = std::move(loc);
  if (date) r.gt_date = PartialDate::parse(*date);
  return r;
}

// Independent containment oracle: lowercase, non-alphanumerics to spaces,
// collapse runs, compare every component against every keyword.
std::string fold(const std::string& s) {
  std::string out;
  bool space = true;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) {
      out += static_cast<char>(std::tolower(c));
      space = false;
    } else if (!space) {
      out += ' ';
      space = true;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

bool oracle_relevant(const std::string& gt, const Article& a) {
  std::vector<std::string> comps;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= gt.size(); ++i) {
    if (i == gt.size() || gt[i] == ',') {
      auto c = fold(gt.substr(start, i - start));
      if (!c.empty()) comps.push_back(c);
      start = i + 1;
    }
  }
  for (const auto& kw : a.geo_keywords)
    for (const auto& c : comps)
      if (fold(kw).find(c) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("location relevance examples") {
  const auto image = img("Paris, France");
  const std::vector<Article> arts = {art("a", "2020-01-01", {"France"}), art("b", "2020-01-01", {"Frankfurt, Germany"}),
                                     art("c", "2020-01-01", {"Paris (France)"}), art("d", "2020-01-01", {})};
  CHECK(label_location_relevant(image, arts) == std::set<std::string>{"a", "c"});
  CHECK_THROWS_AS(label_location_relevant(img("  "), arts), PreconditionError);
  CHECK(location_tokens("Paris, FRANCE ,  paris") == std::vector<std::string>{"paris", "france"});
}

TEST_CASE("event window is inclusive at n_window days") {
  const auto image = img("Kyiv, Ukraine", "2022-03-01");
  const std::vector<Article> arts = {
      art("plus7", "2022-03-08", {"Ukraine"}),  art("plus8", "2022-03-09", {"Ukraine"}),
      art("minus7", "2022-02-22", {"Kyiv"}),    art("minus8", "2022-02-21", {"Kyiv"}),
      art("nolocation", "2022-03-01", {"Poland"}),
  };
  CHECK(label_event_relevant(image, arts, 7) == std::set<std::string>{"minus7", "plus7"});
  CHECK(label_event_relevant(image, arts, 0).empty());
}

TEST_CASE("coarse dates give location labels only") {
  const std::vector<Article> arts = {art("a", "2022-03-01", {"Ukraine"})};
  for (const char* d : {"2022", "2022-03"}) {
    const auto l = make_labels(img("Ukraine", std::string(d)), arts, 7);
    CHECK(l.location_relevant.size() == 1);
    CHECK(l.event_relevant.empty());
  }
  CHECK(make_labels(img("Ukraine"), arts, 7).event_relevant.empty());
}

TEST_CASE("subset invariant is enforced") {
  RelevanceLabels l{"x", {"a"}, {"a", "b"}};
  CHECK_THROWS(l.check());
  LabelStore store;
  CHECK_THROWS(store.put(l));
}

TEST_CASE("randomized: oracle agreement, subset, order independence, monotonicity") {
  const std::vector<std::string> places = {"Paris", "France", "Texas", "Paris, Texas", "Lyon", "Kyiv", "Ukraine",
                                           "New York", "York", "Frankfurt", "Germany", "St. Louis"};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(places.size()) - 1), nkw(0, 3), day(0, 60);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Article> arts;
    for (int i = 0; i < 40; ++i) {
      std::vector<std::string> kws;
      for (int k = nkw(rng); k > 0; --k) kws.push_back(places[static_cast<std::size_t>(pick(rng))]);
      arts.push_back(art("a" + std::to_string(i), Date(2021, 1, 1).plus_days(day(rng)).iso(), kws));
    }
    const auto image = img(places[static_cast<std::size_t>(pick(rng))], Date(2021, 1, 1).plus_days(day(rng)).iso());
    const auto labels = make_labels(image, arts, 7);
    CHECK_NOTHROW(labels.check());
    for (const auto& a : arts) CHECK(labels.location_relevant.contains(a.id) == oracle_relevant(image.gt_location, a));
    for (const auto& id : labels.event_relevant) {
      const auto& a = *std::find_if(arts.begin(), arts.end(), [&](const Article& x) { return x.id == id; });
      CHECK(std::llabs(days_between(*image.gt_date->full(), a.published_at)) <= 7);
    }

    auto shuffled = arts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = make_labels(image, shuffled, 7);
    CHECK(again.location_relevant == labels.location_relevant);
    CHECK(again.event_relevant == labels.event_relevant);

    std::set<std::string> prev = labels.event_relevant;
    for (int w = 6; w >= 0; --w) {
      const auto smaller = label_event_relevant(image, arts, w);
      CHECK(std::includes(prev.begin(), prev.end(), smaller.begin(), smaller.end()));
      prev = smaller;
    }
  }
}

TEST_CASE("image and label persistence") {
  const auto dir = std::filesystem::temp_directory_path() / "newsrecon_labels";
  std::filesystem::remove_all(dir);
  ImageRecord r = img("Paris, France", "2019-04");
  r.gt_coordinates = GeoPoint{48.8566, 2.3522};
  r.split = Split::dev;
  save_images({r}, dir / "images.jsonl");
  const auto back = load_images(dir / "images.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(to_json(back[0]) == to_json(r));

  ImageRecord bad = r;
  bad.gt_coordinates = GeoPoint{91.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
  CHECK_THROWS_AS(image_from_json(nlohmann::json::parse(R"({"id":"x","gt_date":"2019-13"})")), FormatError);

  const std::vector<Article> arts = {art("a", "2019-04-10", {"France"}), art("b", "2019-05-30", {"Paris"})};
  const std::vector<ImageRecord> images = {img("France", "2019-04-12"), img("Paris", "2019-06-01")};
  std::vector<ImageRecord> named = images;
  named[1].id = "img2";
  const auto store = label_all(named, arts, 7);
  store.save(dir / "labels.jsonl");
  const auto loaded = LabelStore::load(dir / "labels.jsonl");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded.at("img").event_relevant == std::set<std::string>{"a"});
  CHECK(loaded.at("img2").event_relevant == std::set<std::string>{"b"});
  CHECK_THROWS_AS(loaded.at("nope"), LookupError);
}
