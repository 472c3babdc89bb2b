#include "newsrecon/date.hpp"

#include <charconv>
#include <cstdio>

#include "newsrecon/error.hpp"

namespace newsrecon {
namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date::Date(int y, unsigned m, unsigned d) : ymd_{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}} {
  if (!ymd_.ok()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "invalid calendar date %04d-%02u-%02u", y, m, d);
    throw PreconditionError(buf);
  }
}

std::optional<Date> Date::try_parse(std::string_view iso) {
  if (const auto t = iso.find('T'); t != std::string_view::npos) iso = iso.substr(0, t);
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!parse_int(iso.substr(0, 4), y) || !parse_int(iso.substr(5, 2), m) || !parse_int(iso.substr(8, 2), d))
    return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

Date Date::parse(std::string_view iso) {
  if (auto d = try_parse(iso)) return *d;
  throw PreconditionError("not a valid YYYY-MM-DD date: '" + std::string(iso) + "'");
}

Date Date::from_days(std::int64_t n) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{n}}};
  return Date(static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
              static_cast<unsigned>(ymd.day()));
}

std::int64_t Date::days_since_epoch() const {
  return std::chrono::sys_days{ymd_}.time_since_epoch().count();
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

std::optional<Date> PartialDate::full() const {
  if (!month || !day) return std::nullopt;
  return Date(year, *month, *day);
}

std::optional<PartialDate> PartialDate::try_parse(std::string_view s) {
  PartialDate out;
  if (s.size() < 4 || !parse_int(s.substr(0, 4), out.year)) return std::nullopt;
  if (s.size() == 4) return out;
  int m = 0;
  if (s.size() < 7 || s[4] != '-' || !parse_int(s.substr(5, 2), m) || m < 1 || m > 12) return std::nullopt;
  out.month = static_cast<unsigned>(m);
  if (s.size() == 7) return out;
  auto d = Date::try_parse(s);
  if (!d || (s.size() != 10 && s[10] != 'T')) return std::nullopt;
  out.day = d->day();
  return out;
}

PartialDate PartialDate::parse(std::string_view s) {
  if (auto d = try_parse(s)) return *d;
  throw PreconditionError("not a valid partial date (YYYY[-MM[-DD]]): '" + std::string(s) + "'");
}

std::string PartialDate::str() const {
  char buf[16];
  if (day) std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, *month, *day);
  else if (month) std::snprintf(buf, sizeof buf, "%04d-%02u", year, *month);
  else std::snprintf(buf, sizeof buf, "%04d", year);
  return buf;
}

PartialDate PartialDate::truncated(Granularity g) const {
  PartialDate out{year, std::nullopt, std::nullopt};
  if (g != Granularity::year) out.month = month;
  if (g == Granularity::day) out.day = day;
  if (!out.month) out.day.reset();
  return out;
}

}  // namespace newsrecon
