#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace newsrecon {

/// Proleptic-Gregorian calendar day (UTC day precision).
class Date {
 public:
  Date() = default;
  Date(int year, unsigned month, unsigned day);

  /// Parses "YYYY-MM-DD"; a trailing time part ("T...") is ignored.
  static Date parse(std::string_view iso);
  static std::optional<Date> try_parse(std::string_view iso);
  static Date from_days(std::int64_t days_since_epoch);

  int year() const { return static_cast<int>(ymd_.year()); }
  unsigned month() const { return static_cast<unsigned>(ymd_.month()); }
  unsigned day() const { return static_cast<unsigned>(ymd_.day()); }

  std::int64_t days_since_epoch() const;
  Date plus_days(std::int64_t n) const { return from_days(days_since_epoch() + n); }

  std::string iso() const;

  friend bool operator==(const Date& a, const Date& b) { return a.ymd_ == b.ymd_; }
  friend std::strong_ordering operator<=>(const Date& a, const Date& b) {
    return a.days_since_epoch() <=> b.days_since_epoch();
  }

 private:
  std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::January, std::chrono::day{1}};
};

/// Signed difference b - a in days.
inline std::int64_t days_between(const Date& a, const Date& b) {
  return b.days_since_epoch() - a.days_since_epoch();
}

enum class Granularity { year, month, day };

/// A date known to year, month or day precision.
struct PartialDate {
  int year = 0;
  std::optional<unsigned> month;
  std::optional<unsigned> day;

  Granularity granularity() const {
    return day ? Granularity::day : (month ? Granularity::month : Granularity::year);
  }
  std::optional<Date> full() const;

  /// "YYYY", "YYYY-MM" or "YYYY-MM-DD"; validates calendar ranges.
  static PartialDate parse(std::string_view s);
  static std::optional<PartialDate> try_parse(std::string_view s);
  static PartialDate from(const Date& d) { return {d.year(), d.month(), d.day()}; }

  std::string str() const;
  /// Same date cut down to at most the given granularity.
  PartialDate truncated(Granularity g) const;

  friend bool operator==(const PartialDate&, const PartialDate&) = default;
};

}  // namespace newsrecon
