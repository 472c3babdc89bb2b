#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "newsrecon/error.hpp"
#include "newsrecon/metrics.hpp"
#include "support/metric_check.hpp"

using namespace newsrecon;

namespace {

const GeoPoint kParis{48.8566, 2.3522};
const GeoPoint kLondon{51.5074, -0.1278};

PartialDate pd(const char* s) { return PartialDate::parse(s); }

Gazetteer europe() {
  return Gazetteer({{"Paris", "France", "Europe", {48.8566, 2.3522}},
                    {"France", "", "Europe", {46.6, 2.2}},
                    {"Berlin", "Germany", "Europe", {52.52, 13.405}},
                    {"Germany", "", "Europe", {51.1, 10.4}},
                    {"Paris", "Texas", "North America", {33.66, -95.55}}});
}

}  // namespace

TEST_CASE("haversine") {
  CHECK(haversine_km(kParis, kParis) == 0.0);
  CHECK(haversine_km({0, 0}, {0, 180}) == doctest::Approx(std::acos(-1.0) * kEarthRadiusKm).epsilon(1e-12));
  CHECK(haversine_km({0, 0}, {0, 180}) == doctest::Approx(20015.1).epsilon(1e-5));
  CHECK(haversine_km(kParis, kLondon) == doctest::Approx(343.6).epsilon(0.005));
  CHECK(haversine_km(kParis, kLondon) == haversine_km(kLondon, kParis));
  CHECK(oracle::worst_city_error() < 0.005);
}

TEST_CASE("haversine triangle inequality on sampled triples") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = haversine_km(a, b), bc = haversine_km(b, c), ac = haversine_km(a, c);
    CHECK(ac <= (ab + bc) * (1 + 1e-6));
  }
}

TEST_CASE("distance scores") {
  CHECK(great_loc_km(0) == 1.0);
  CHECK(great_loc_km(1000) == 0.0);
  CHECK(great_loc_km(5000) == 0.0);
  CHECK(great_loc_km(343.6) == doctest::Approx(0.6564).epsilon(1e-3));
  CHECK(great_loc(kParis, kLondon) == doctest::Approx(0.6564).epsilon(1e-3));
  CHECK(co_delta_km(0) == 1.0);
  CHECK(co_delta_km(1000) == 0.5);
  CHECK(co_delta_km(9000) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(delta_year(pd("2000"), pd("2000")) == 1.0);
  CHECK(delta_year(pd("2001"), pd("2000")) == 0.5);
  CHECK(delta_year(pd("1991-03"), pd("2000-01-01")) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("great_date") {
  CHECK(great_date(pd("2019-04-21"), pd("2019-04-21")) == 1.0);
  DateScoreParts parts;
  great_date(pd("2019-04-11"), pd("2019-04-21"), {}, &parts);
  REQUIRE(parts.day);
  CHECK(std::abs(*parts.day - 1.0 / 3.0) < 1e-12);

  SUBCASE("year ground truth ignores month and day") {
    great_date(pd("2019-04-21"), pd("2019"), {}, &parts);
    CHECK_FALSE(parts.month);
    CHECK_FALSE(parts.day);
    CHECK(great_date(pd("2019-04-21"), pd("2019")) == 1.0);
  }
  SUBCASE("a coarser prediction scores zero on the missing part") {
    great_date(pd("2019"), pd("2019-04"), {}, &parts);
    CHECK(*parts.month == 0.0);
    CHECK(great_date(pd("2019"), pd("2019-04")) == doctest::Approx(0.75));
  }
  SUBCASE("century is an equality test") {
    great_date(pd("1999"), pd("2000"), {}, &parts);
    CHECK(*parts.century == 0.0);
    CHECK(*parts.decade == doctest::Approx(0.8));
    CHECK(*parts.year == doctest::Approx(0.9));
  }
  SUBCASE("weights renormalize over the evaluated granularities") {
    DateScoring w;
    w.w_month = 7;
    w.w_day = 3;
    CHECK(great_date(pd("2018"), pd("2019"), w) == great_date(pd("2018"), pd("2019")));
  }
  SUBCASE("all-zero weights are a configuration error") {
    DateScoring w;
    w.w_century = w.w_decade = w.w_year = 0;
    CHECK_THROWS_AS(great_date(pd("2018"), pd("2019"), w), ConfigError);
  }
}

TEST_CASE("example_f1") {
  const auto pfe = HierLocation::parse("Paris, France, Europe");
  CHECK(example_f1(pfe, pfe) == 1.0);
  CHECK(example_f1(HierLocation::parse("France, Europe"), pfe) == doctest::Approx(0.8));
  CHECK(example_f1(HierLocation::parse("Berlin, Germany, Europe"), pfe) == doctest::Approx(1.0 / 3.0));
  CHECK(example_f1(pfe, HierLocation::parse("France, Europe")) ==
        example_f1(HierLocation::parse("France, Europe"), pfe));
}

TEST_CASE("gazetteer expansion reproduces the Paris chain") {
  const auto g = europe();
  const auto loc = g.expand(HierLocation::parse("Paris, France"));
  CHECK(loc.components == std::vector<std::string>{"Paris", "France", "Europe"});
  CHECK(g.expand(HierLocation::parse("Paris (France)")).str() == "Paris, France, Europe");
  CHECK(example_f1(g.expand(HierLocation::parse("Paris, France")), HierLocation::parse("Paris, France, Europe")) ==
        1.0);
}

TEST_CASE("geocode") {
  const auto g = europe();
  CHECK(*g.geocode("Paris, France") == GeoPoint{48.8566, 2.3522});
  CHECK(*g.geocode("Paris, Texas") == GeoPoint{33.66, -95.55});
  CHECK(*g.geocode("France") == GeoPoint{46.6, 2.2});
  CHECK_FALSE(g.geocode("Atlantis").has_value());
  CHECK(*g.geocode("Atlantis, Germany") == GeoPoint{51.1, 10.4});
}

TEST_CASE("gazetteer csv") {
  const auto dir = std::filesystem::temp_directory_path() / "newsrecon_gaz_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.csv") << "place,parent,continent,lat,lon\n\"Paris\",France,Europe,48.85,2.35\n";
    std::ofstream(dir / "bad.csv") << "Paris,France,Europe,north,2.35\n";
    std::ofstream(dir / "range.csv") << "Paris,France,Europe,95,2.35\n";
  }
  CHECK(Gazetteer::load(dir / "ok.csv").rows().size() == 1);
  CHECK_THROWS_AS(Gazetteer::load(dir / "bad.csv"), FormatError);
  CHECK_THROWS_AS(Gazetteer::load(dir / "range.csv"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exact match at k") {
  CHECK(em_at_k_date({"2015-06-12"}, pd("2015-06"), 1) == 1);
  CHECK(em_at_k_date({"2014-01-01", "2013", "2012", "2011", "2015-06-01"}, pd("2015-06-01"), 1) == 0);
  CHECK(em_at_k_date({"2014-01-01", "2013", "2012", "2011", "2015-06-01"}, pd("2015-06-01"), 5) == 1);
  CHECK(em_at_k_date({"2015-06-12", "2015-06-13", "2015-07-01"}, pd("2015-07"), 2) == 1);
  CHECK(em_at_k_location({"paris,  FRANCE"}, "Paris, France", 1) == 1);
  CHECK(em_at_k_location({"Lyon, France", "Paris, France"}, "Paris", 1) == 0);
  CHECK(em_at_k_location({"Lyon, France", "Lyon, France", "Paris, France"}, "Paris", 2) == 1);
  CHECK(em_at_k_location({"Paris"}, "Paris, France", 1) == 0);
}

TEST_CASE("metrics match the brute-force oracles on randomized cases") {
  const auto worst = oracle::metric_oracle_errors(1000, 17);
  for (const auto& [name, err] : worst) {
    CAPTURE(name);
    CHECK(err <= 1e-9);
  }
}

TEST_CASE("score_query and aggregation") {
  const auto g = europe();
  ImageRecord gold;
  gold.id = "img";
  gold.gt_location = "Paris, France";
  gold.gt_coordinates = GeoPoint{48.8566, 2.3522};
  gold.gt_date = pd("2019-04-21");
  Predictions p;
  p.locations = {"Paris, France"};
  p.dates = {"2019-04-21"};
  const auto q = score_query(gold, p, g, {});
  CHECK(*q.great == 1.0);
  CHECK(*q.loc_em1 == 1.0);
  CHECK(*q.example_f1 == 1.0);

  const auto empty = score_query(gold, Predictions{}, g, {});
  CHECK_FALSE(empty.great_date);
  CHECK(std::find(empty.skipped.begin(), empty.skipped.end(), "empty_event_ranking") != empty.skipped.end());

  const auto report = aggregate({q, empty});
  CHECK(report.counts.at("great_date") == 1);
  CHECK(report.means.at("great_date") == 1.0);
  CHECK(report.skipped.at("empty_event_ranking") == 1);
  CHECK(aggregate({}).empty());
}

TEST_CASE("extract_predictions") {
  Article a;
  a.id = "a";
  a.published_at = Date(2019, 4, 21);
  a.geo_keywords = {"Paris", "France"};
  Article b;
  b.id = "b";
  b.published_at = Date(2018, 1, 2);
  const std::vector<Article> corpus = {a, b};
  const auto idx = index_articles(corpus);
  const auto p = extract_predictions({"b", "a"}, {"a", "b"}, idx);
  CHECK(p.locations == std::vector<std::string>{"Paris, France"});
  CHECK(p.dates == std::vector<std::string>{"2019-04-21", "2018-01-02"});
  CHECK(extract_predictions({}, {}, idx).dates.empty());
  CHECK_THROWS_AS(extract_predictions({"zz"}, {}, idx), LookupError);
}
