#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsrecon/article.hpp"
#include "newsrecon/date.hpp"
#include "newsrecon/geo.hpp"
#include "newsrecon/labeling.hpp"

namespace newsrecon {

/// IUGG mean Earth radius.
inline constexpr double kEarthRadiusKm = 6371.0088;

double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// max(0, 1 - d / scale_km)
double great_loc_km(double d_km, double scale_km = 1000.0);
double great_loc(const GeoPoint& pred, const GeoPoint& gt, double scale_km = 1000.0);

/// 1 / (1 + d / scale_km)
double co_delta_km(double d_km, double scale_km = 1000.0);
double co_delta(const GeoPoint& pred, const GeoPoint& gt, double scale_km = 1000.0);

/// 1 / (1 + |pred.year - gt.year| / scale_years)
double delta_year(const PartialDate& pred, const PartialDate& gt, double scale_years = 1.0);

/// Thresholds and weights of the granularity-decomposed date score.
struct DateScoring {
  double t_decade = 5.0;  // decades
  double t_year = 10.0;   // years
  double t_month = 6.0;   // months
  double t_day = 15.0;    // days
  double w_century = 1.0, w_decade = 1.0, w_year = 1.0, w_month = 1.0, w_day = 1.0;

  void validate() const;
};

/// Per-granularity scores that entered great_date.
struct DateScoreParts {
  std::optional<double> century, decade, year, month, day;
};

/// Weighted mean of S_u over the granularities the ground truth has
/// (century, decade and year always; month and day when present). Century is
/// an equality test, the others max(0, 1 - dist / T_u) with dist the elapsed
/// decades, years, months or days. A prediction lacking a granularity the
/// ground truth has scores 0 there.
double great_date(const PartialDate& pred, const PartialDate& gt, const DateScoring& cfg = {},
                  DateScoreParts* parts = nullptr);

/// Child-to-parent location components, e.g. [Paris, France, Europe].
struct HierLocation {
  std::vector<std::string> components;

  /// Splits on commas after turning "Paris (France)" into "Paris, France".
  static HierLocation parse(std::string_view s);
  std::string str() const;
};

/// Offline place table: place, parent, continent, lat, lon.
class Gazetteer {
 public:
  struct Row {
    std::string place, parent, continent;
    GeoPoint point;
  };

  Gazetteer() = default;
  explicit Gazetteer(std::vector<Row> rows);
  static Gazetteer load(const std::filesystem::path& csv);

  const std::vector<Row>& rows() const { return rows_; }
  /// Row for `place` whose parent or continent equals `context` when given;
  /// first matching row otherwise. Case-insensitive.
  const Row* find(std::string_view place, std::string_view context = {}) const;

  /// Appends missing parent and continent components of the last component.
  HierLocation expand(const HierLocation& loc) const;
  /// Longest-suffix match; nothing when no suffix is in the table.
  std::optional<GeoPoint> geocode(std::string_view location) const;

 private:
  std::vector<Row> rows_;
  std::multimap<std::string, std::size_t> by_place_;
};

/// Dice overlap of the suffix-chain sets of the two locations.
double example_f1(const HierLocation& pred, const HierLocation& gt);

/// 1 iff one of the first k (deduplicated) predictions matches. Dates match
/// after truncation to the ground-truth granularity.
int em_at_k_date(const std::vector<std::string>& predictions, const PartialDate& gt, std::size_t k);
/// Locations match when every ground-truth component appears in the prediction.
int em_at_k_location(const std::vector<std::string>& predictions, std::string_view gt, std::size_t k);

struct Predictions {
  std::vector<std::string> locations;  // ranked, one per article with keywords
  std::vector<std::string> dates;      // ranked ISO dates
};

Predictions extract_predictions(const std::vector<std::string>& loc_ranking,
                                const std::vector<std::string>& evt_ranking, const ArticleIndex& articles);

struct MetricConfig {
  DateScoring date;
  double great_loc_scale_km = 1000.0;
  double co_delta_scale_km = 1000.0;
  double delta_scale_years = 1.0;
  double great_weight_date = 0.5;
  double great_weight_loc = 0.5;

  void validate() const;
};

/// Scores of one query; absent values were skipped.
struct QueryMetrics {
  std::string image_id;
  std::optional<double> date_em1, date_em5, delta, great_date;
  std::optional<double> loc_em1, loc_em5, example_f1, co_delta, great_loc;
  std::optional<double> great;
  std::vector<std::string> skipped;
};

QueryMetrics score_query(const ImageRecord& gold, const Predictions& preds, const Gazetteer& gazetteer,
                         const MetricConfig& cfg);

struct MetricsReport {
  std::vector<QueryMetrics> queries;
  /// Means over the queries where each metric was computed.
  std::map<std::string, double> means;
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::size_t> skipped;

  bool empty() const { return queries.empty(); }
  nlohmann::json summary_json() const;
  /// One record per query followed by the summary record.
  std::string jsonl() const;
  std::string table() const;
};

MetricsReport aggregate(std::vector<QueryMetrics> queries);

}  // namespace newsrecon
