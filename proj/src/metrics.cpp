#include "newsrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "newsrecon/error.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

double rad(double deg) { return deg * std::numbers::pi / 180.0; }

long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

double linear_score(double dist, double threshold) { return std::max(0.0, 1.0 - std::fabs(dist) / threshold); }

std::string norm(std::string_view s) { return text::normalize_space(s); }

std::vector<std::string> norm_components(const HierLocation& loc) {
  std::vector<std::string> out;
  out.reserve(loc.components.size());
  for (const auto& c : loc.components) out.push_back(norm(c));
  return out;
}

std::set<std::vector<std::string>> suffix_chains(const HierLocation& loc) {
  const auto comps = norm_components(loc);
  std::set<std::vector<std::string>> chains;
  for (std::size_t i = 0; i < comps.size(); ++i) chains.emplace(comps.begin() + static_cast<std::ptrdiff_t>(i), comps.end());
  return chains;
}

// CSV line with optional double-quoted fields.
std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": not a number: '" + s + "'");
  }
}

std::vector<std::string> dedup(const std::vector<std::string>& preds) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : preds)
    if (seen.insert(norm(p)).second) out.push_back(p);
  return out;
}

}  // namespace

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double dlat = rad(b.lat - a.lat), dlon = rad(b.lon - a.lon);
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(rad(a.lat)) * std::cos(rad(b.lat)) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

double great_loc_km(double d_km, double scale_km) { return std::max(0.0, 1.0 - d_km / scale_km); }

double great_loc(const GeoPoint& pred, const GeoPoint& gt, double scale_km) {
  return great_loc_km(haversine_km(pred, gt), scale_km);
}

double co_delta_km(double d_km, double scale_km) { return 1.0 / (1.0 + d_km / scale_km); }

double co_delta(const GeoPoint& pred, const GeoPoint& gt, double scale_km) {
  return co_delta_km(haversine_km(pred, gt), scale_km);
}

double delta_year(const PartialDate& pred, const PartialDate& gt, double scale_years) {
  return 1.0 / (1.0 + std::abs(pred.year - gt.year) / scale_years);
}

void DateScoring::validate() const {
  for (double t : {t_decade, t_year, t_month, t_day})
    if (!(t > 0.0)) throw ConfigError("date thresholds must be > 0");
  for (double w : {w_century, w_decade, w_year, w_month, w_day})
    if (!(w >= 0.0)) throw ConfigError("date weights must be >= 0");
}

double great_date(const PartialDate& pred, const PartialDate& gt, const DateScoring& cfg, DateScoreParts* parts) {
  DateScoreParts p;
  p.century = floor_div(pred.year, 100) == floor_div(gt.year, 100) ? 1.0 : 0.0;
  p.decade = linear_score(static_cast<double>(floor_div(pred.year, 10) - floor_div(gt.year, 10)), cfg.t_decade);
  p.year = linear_score(static_cast<double>(pred.year - gt.year), cfg.t_year);
  if (gt.month) {
    p.month = pred.month ? linear_score(static_cast<double>((pred.year * 12L + *pred.month) - (gt.year * 12L + *gt.month)),
                                        cfg.t_month)
                         : 0.0;
  }
  if (gt.day) {
    p.day = pred.day ? linear_score(static_cast<double>(days_between(*gt.full(), *pred.full())), cfg.t_day) : 0.0;
  }
  double num = 0.0, den = 0.0;
  auto add = [&](const std::optional<double>& s, double w) {
    if (!s) return;
    num += w * *s;
    den += w;
  };
  add(p.century, cfg.w_century);
  add(p.decade, cfg.w_decade);
  add(p.year, cfg.w_year);
  add(p.month, cfg.w_month);
  add(p.day, cfg.w_day);
  if (parts) *parts = p;
  if (den <= 0.0) throw ConfigError("all date weights for the evaluated granularities are zero");
  return num / den;
}

HierLocation HierLocation::parse(std::string_view s) {
  HierLocation loc;
  std::set<std::string> seen;
  for (const auto& raw : text::split(s, ',')) {
    for (const auto& part : text::split(text::unparenthesize(raw), ',')) {
      auto t = text::trim(part);
      if (!t.empty() && seen.insert(norm(t)).second) loc.components.push_back(std::move(t));
    }
  }
  return loc;
}

std::string HierLocation::str() const { return text::join(components, ", "); }

Gazetteer::Gazetteer(std::vector<Row> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    rows_[i].point.validate();
    by_place_.emplace(norm(rows_[i].place), i);
  }
}

Gazetteer Gazetteer::load(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error("cannot open gazetteer " + csv.string());
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || line[0] == '#') continue;
    const auto f = csv_fields(line);
    const std::string where = csv.string() + ":" + std::to_string(lineno);
    if (f.size() != 5) throw FormatError(where + ": expected 5 columns (place,parent,continent,lat,lon)");
    if (lineno == 1 && text::trim(f[0]) == "place") continue;
    Row r{text::trim(f[0]), text::trim(f[1]), text::trim(f[2]),
          {parse_double(text::trim(f[3]), where), parse_double(text::trim(f[4]), where)}};
    if (r.place.empty()) throw FormatError(where + ": empty place");
    try {
      r.point.validate();
    } catch (const PreconditionError& e) {
      throw FormatError(where + ": " + e.what());
    }
    rows.push_back(std::move(r));
  }
  return Gazetteer(std::move(rows));
}

const Gazetteer::Row* Gazetteer::find(std::string_view place, std::string_view context) const {
  const auto [lo, hi] = by_place_.equal_range(norm(place));
  if (lo == hi) return nullptr;
  if (!context.empty()) {
    const auto ctx = norm(context);
    for (auto it = lo; it != hi; ++it) {
      const Row& r = rows_[it->second];
      if (norm(r.parent) == ctx || norm(r.continent) == ctx) return &r;
    }
    return nullptr;
  }
  std::size_t first = lo->second;
  for (auto it = lo; it != hi; ++it) first = std::min(first, it->second);
  return &rows_[first];
}

HierLocation Gazetteer::expand(const HierLocation& loc) const {
  HierLocation out = loc;
  std::set<std::string> present;
  for (const auto& c : out.components) present.insert(norm(c));
  for (std::size_t guard = 0; guard < 8 && !out.components.empty(); ++guard) {
    const Row* r = find(out.components.back());
    if (!r) break;
    bool grew = false;
    for (const auto* next : {&r->parent, &r->continent}) {
      if (next->empty() || present.contains(norm(*next))) continue;
      out.components.push_back(*next);
      present.insert(norm(*next));
      grew = true;
      break;
    }
    if (!grew) break;
  }
  return out;
}

std::optional<GeoPoint> Gazetteer::geocode(std::string_view location) const {
  const auto comps = HierLocation::parse(location).components;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const Row* r = i + 1 < comps.size() ? find(comps[i], comps[i + 1]) : find(comps[i]);
    if (r) return r->point;
  }
  return std::nullopt;
}

double example_f1(const HierLocation& pred, const HierLocation& gt) {
  const auto p = suffix_chains(pred), g = suffix_chains(gt);
  if (p.empty() && g.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& c : p) inter += g.count(c);
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p.size() + g.size());
}

int em_at_k_date(const std::vector<std::string>& predictions, const PartialDate& gt, std::size_t k) {
  std::vector<std::string> truncated;
  for (const auto& p : predictions) {
    const auto d = PartialDate::try_parse(text::trim(p));
    if (!d) continue;
    truncated.push_back(d->truncated(gt.granularity()).str());
  }
  const auto ranked = dedup(truncated);
  const std::string want = gt.str();
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (ranked[i] == want) return 1;
  return 0;
}

int em_at_k_location(const std::vector<std::string>& predictions, std::string_view gt, std::size_t k) {
  const auto want = norm_components(HierLocation::parse(gt));
  if (want.empty()) return 0;
  std::vector<std::string> keyed;
  for (const auto& p : predictions) {
    auto comps = norm_components(HierLocation::parse(p));
    std::sort(comps.begin(), comps.end());
    keyed.push_back(text::join(comps, "\x1f"));
  }
  const auto ranked = dedup(keyed);
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    const auto have = text::split(ranked[i], '\x1f');
    const std::set<std::string> s(have.begin(), have.end());
    if (std::all_of(want.begin(), want.end(), [&](const std::string& c) { return s.contains(c); })) return 1;
  }
  return 0;
}

Predictions extract_predictions(const std::vector<std::string>& loc_ranking,
                                const std::vector<std::string>& evt_ranking, const ArticleIndex& articles) {
  auto get = [&](const std::string& id) -> const Article& {
    const auto it = articles.find(id);
    if (it == articles.end()) throw LookupError("ranked article '" + id + "' is not in the corpus");
    return *it->second;
  };
  Predictions p;
  for (const auto& id : loc_ranking) {
    const Article& a = get(id);
    if (!a.geo_keywords.empty()) p.locations.push_back(text::join(a.geo_keywords, ", "));
  }
  for (const auto& id : evt_ranking) p.dates.push_back(get(id).published_at.iso());
  return p;
}

void MetricConfig::validate() const {
  date.validate();
  if (!(great_loc_scale_km > 0.0) || !(co_delta_scale_km > 0.0) || !(delta_scale_years > 0.0))
    throw ConfigError("metric scales must be > 0");
  if (!(great_weight_date >= 0.0) || !(great_weight_loc >= 0.0) || great_weight_date + great_weight_loc <= 0.0)
    throw ConfigError("GREAT weights must be >= 0 and not both zero");
}

QueryMetrics score_query(const ImageRecord& gold, const Predictions& preds, const Gazetteer& gazetteer,
                         const MetricConfig& cfg) {
  QueryMetrics q;
  q.image_id = gold.id;
  if (!gold.gt_date) {
    q.skipped.emplace_back("no_gt_date");
  } else if (preds.dates.empty()) {
    q.skipped.emplace_back("empty_event_ranking");
  } else {
    const auto top = PartialDate::parse(preds.dates.front());
    q.date_em1 = em_at_k_date(preds.dates, *gold.gt_date, 1);
    q.date_em5 = em_at_k_date(preds.dates, *gold.gt_date, 5);
    q.delta = delta_year(top, *gold.gt_date, cfg.delta_scale_years);
    q.great_date = great_date(top, *gold.gt_date, cfg.date);
  }

  if (text::trim(gold.gt_location).empty()) {
    q.skipped.emplace_back("no_gt_location");
  } else if (preds.locations.empty()) {
    q.skipped.emplace_back("empty_location_ranking");
  } else {
    q.loc_em1 = em_at_k_location(preds.locations, gold.gt_location, 1);
    q.loc_em5 = em_at_k_location(preds.locations, gold.gt_location, 5);
    q.example_f1 = example_f1(gazetteer.expand(HierLocation::parse(preds.locations.front())),
                              gazetteer.expand(HierLocation::parse(gold.gt_location)));
  }
  if (!preds.locations.empty()) {
    if (!gold.gt_coordinates) {
      q.skipped.emplace_back("no_gt_coordinates");
    } else if (const auto pt = gazetteer.geocode(preds.locations.front()); !pt) {
      q.skipped.emplace_back("prediction_not_geocoded");
    } else {
      const double d = haversine_km(*pt, *gold.gt_coordinates);
      q.co_delta = co_delta_km(d, cfg.co_delta_scale_km);
      q.great_loc = great_loc_km(d, cfg.great_loc_scale_km);
    }
  }
  if (q.great_date && q.great_loc) {
    q.great = (cfg.great_weight_date * *q.great_date + cfg.great_weight_loc * *q.great_loc) /
              (cfg.great_weight_date + cfg.great_weight_loc);
  }
  return q;
}

namespace {

const std::vector<std::pair<std::string, std::optional<double> QueryMetrics::*>>& metric_fields() {
  static const std::vector<std::pair<std::string, std::optional<double> QueryMetrics::*>> f = {
      {"date_em1", &QueryMetrics::date_em1},     {"date_em5", &QueryMetrics::date_em5},
      {"delta", &QueryMetrics::delta},           {"great_date", &QueryMetrics::great_date},
      {"loc_em1", &QueryMetrics::loc_em1},       {"loc_em5", &QueryMetrics::loc_em5},
      {"example_f1", &QueryMetrics::example_f1}, {"co_delta", &QueryMetrics::co_delta},
      {"great_loc", &QueryMetrics::great_loc},   {"great", &QueryMetrics::great},
  };
  return f;
}

}  // namespace

MetricsReport aggregate(std::vector<QueryMetrics> queries) {
  MetricsReport r;
  std::sort(queries.begin(), queries.end(),
            [](const QueryMetrics& a, const QueryMetrics& b) { return a.image_id < b.image_id; });
  r.queries = std::move(queries);
  for (const auto& [name, field] : metric_fields()) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& q : r.queries)
      if (q.*field) {
        sum += *(q.*field);
        ++n;
      }
    r.counts[name] = n;
    if (n > 0) r.means[name] = sum / static_cast<double>(n);
  }
  for (const auto& q : r.queries)
    for (const auto& s : q.skipped) ++r.skipped[s];
  return r;
}

nlohmann::json MetricsReport::summary_json() const {
  nlohmann::json j;
  j["record"] = "summary";
  j["queries"] = queries.size();
  j["empty"] = empty();
  j["means"] = nlohmann::json::object();
  for (const auto& [k, v] : means) j["means"][k] = v;
  j["counts"] = counts;
  j["skipped"] = skipped;
  return j;
}

std::string MetricsReport::jsonl() const {
  std::string out;
  for (const auto& q : queries) {
    nlohmann::json j;
    j["record"] = "query";
    j["image_id"] = q.image_id;
    for (const auto& [name, field] : metric_fields())
      j[name] = (q.*field) ? nlohmann::json(*(q.*field)) : nlohmann::json(nullptr);
    j["skipped"] = q.skipped;
    out += j.dump() + "\n";
  }
  out += summary_json().dump() + "\n";
  return out;
}

std::string MetricsReport::table() const {
  std::ostringstream os;
  os << "queries: " << queries.size() << (empty() ? " (empty)" : "") << "\n";
  auto row = [&](const char* label, const char* key) {
    os << "  " << std::left << std::setw(12) << label;
    if (const auto it = means.find(key); it != means.end())
      os << std::right << std::fixed << std::setprecision(2) << std::setw(7) << 100.0 * it->second;
    else
      os << std::right << std::setw(7) << "-";
    os << "  (n=" << counts.at(key) << ")\n";
  };
  os << "date\n";
  row("EM@1", "date_em1");
  row("EM@5", "date_em5");
  row("Delta", "delta");
  row("GREAT_date", "great_date");
  os << "location\n";
  row("EM@1", "loc_em1");
  row("EM@5", "loc_em5");
  row("E-F1", "example_f1");
  row("CO-Delta", "co_delta");
  row("GREAT_loc", "great_loc");
  os << "overall\n";
  row("GREAT", "great");
  if (!skipped.empty()) {
    os << "skipped\n";
    for (const auto& [k, v] : skipped) os << "  " << k << ": " << v << "\n";
  }
  return os.str();
}

}  // namespace newsrecon
