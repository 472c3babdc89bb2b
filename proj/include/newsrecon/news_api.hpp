#pragma once

#include <optional>
#include <string>
#include <vector>

#include "newsrecon/article.hpp"
#include "newsrecon/http.hpp"

namespace newsrecon {

inline constexpr std::size_t kGuardianPageSize = 20;

/// Archive clients for the two news sources. Raw responses go through the
/// given transport, so wrapping it in a CachingTransport makes re-runs offline.
class NewsApiClient {
 public:
  NewsApiClient(http::Transport& transport, http::RetryPolicy retry = {}, http::RateLimiter* limiter = nullptr)
      : transport_(transport), retry_(std::move(retry)), limiter_(limiter) {}

  std::string nyt_base_url = "https://api.nytimes.com";
  std::string guardian_base_url = "https://content.guardianapis.com";
  /// Half-width of the Guardian date window around a query date.
  int guardian_window_days = 7;

  /// Every archived article of one month; 2010 <= year <= 2023.
  std::vector<Article> fetch_nyt_month(int year, int month, const std::string& api_key);

  /// Up to 20 articles matching the keywords, near `date` when given.
  std::vector<Article> fetch_guardian_matches(const std::optional<Date>& date,
                                              const std::vector<std::string>& keywords,
                                              const std::string& api_key);

 private:
  void check_key(const std::string& api_key) const;

  http::Transport& transport_;
  http::RetryPolicy retry_;
  http::RateLimiter* limiter_;
};

/// Response parsers; malformed items are skipped with a warning.
std::vector<Article> parse_nyt_archive(const std::string& body);
std::vector<Article> parse_guardian_search(const std::string& body);

}  // namespace newsrecon
