#include "newsrecon/news_api.hpp"

#include <regex>

#include "newsrecon/error.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

using nlohmann::json;

std::string str_or_empty(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) return {};
  return j.at(key).get<std::string>();
}

std::string strip_html(const std::string& s) {
  static const std::regex tag("<[^>]*>");
  return text::trim(std::regex_replace(s, tag, ""));
}

std::optional<Article> parse_nyt_item(const json& doc) {
  const std::string raw_id = str_or_empty(doc, "_id");
  const std::string headline = doc.contains("headline") ? str_or_empty(doc.at("headline"), "main") : "";
  const auto date = Date::try_parse(str_or_empty(doc, "pub_date"));
  if (raw_id.empty() || text::trim(headline).empty() || !date) return std::nullopt;

  Article a;
  a.id = "nytimes:" + raw_id;
  a.source = Source::nytimes;
  a.headline = text::trim(headline);
  a.abstract = text::trim(str_or_empty(doc, "lead_paragraph"));
  if (a.abstract.empty()) a.abstract = text::trim(str_or_empty(doc, "abstract"));
  a.published_at = *date;
  if (doc.contains("keywords") && doc.at("keywords").is_array()) {
    for (const auto& kw : doc.at("keywords"))
      if (str_or_empty(kw, "name") == "glocations" && !str_or_empty(kw, "value").empty())
        a.geo_keywords.push_back(str_or_empty(kw, "value"));
  }
  if (doc.contains("multimedia") && doc.at("multimedia").is_array()) {
    for (const auto& m : doc.at("multimedia")) {
      std::string url = str_or_empty(m, "url");
      if (url.empty()) continue;
      if (url.rfind("http", 0) != 0) url = "https://www.nytimes.com/" + url;
      a.image_urls.push_back(url);
    }
  }
  return a;
}

std::optional<Article> parse_guardian_item(const json& item) {
  const std::string raw_id = str_or_empty(item, "id");
  const json fields = item.contains("fields") ? item.at("fields") : json::object();
  std::string headline = str_or_empty(fields, "headline");
  if (headline.empty()) headline = str_or_empty(item, "webTitle");
  const auto date = Date::try_parse(str_or_empty(item, "webPublicationDate"));
  if (raw_id.empty() || text::trim(headline).empty() || !date) return std::nullopt;

  Article a;
  a.id = "guardian:" + raw_id;
  a.source = Source::guardian;
  a.headline = text::trim(headline);
  a.abstract = strip_html(str_or_empty(fields, "trailText"));
  a.published_at = *date;
  // Place tags live under the "world/" taxonomy (world/australia, world/ukraine).
  if (item.contains("tags") && item.at("tags").is_array()) {
    for (const auto& tag : item.at("tags")) {
      const std::string tag_id = str_or_empty(tag, "id");
      if (tag_id.rfind("world/", 0) == 0 && tag_id != "world/world" && !str_or_empty(tag, "webTitle").empty())
        a.geo_keywords.push_back(str_or_empty(tag, "webTitle"));
    }
  }
  if (const auto thumb = str_or_empty(fields, "thumbnail"); !thumb.empty()) a.image_urls.push_back(thumb);
  return a;
}

json parse_body(const std::string& body, const char* what) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + " response is not JSON: " + e.what());
  }
}

}  // namespace

std::vector<Article> parse_nyt_archive(const std::string& body) {
  const json j = parse_body(body, "NYT archive");
  if (!j.contains("response") || !j.at("response").contains("docs") || !j.at("response").at("docs").is_array())
    throw FormatError("NYT archive response has no response.docs array");
  std::vector<Article> out;
  std::size_t index = 0;
  for (const auto& doc : j.at("response").at("docs")) {
    if (auto a = parse_nyt_item(doc)) out.push_back(std::move(*a));
    else log::warn("skipping malformed NYT archive item #" + std::to_string(index));
    ++index;
  }
  return out;
}

std::vector<Article> parse_guardian_search(const std::string& body) {
  const json j = parse_body(body, "Guardian search");
  if (!j.contains("response") || !j.at("response").contains("results") ||
      !j.at("response").at("results").is_array())
    throw FormatError("Guardian response has no response.results array");
  std::vector<Article> out;
  std::size_t index = 0;
  for (const auto& item : j.at("response").at("results")) {
    if (auto a = parse_guardian_item(item)) out.push_back(std::move(*a));
    else log::warn("skipping malformed Guardian item #" + std::to_string(index));
    ++index;
  }
  return out;
}

void NewsApiClient::check_key(const std::string& api_key) const {
  if (api_key.empty() && !transport_.offline()) throw CredentialError("no API key provided");
}

std::vector<Article> NewsApiClient::fetch_nyt_month(int year, int month, const std::string& api_key) {
  if (month < 1 || month > 12) throw PreconditionError("month must be in 1..12, got " + std::to_string(month));
  if (year < 2010 || year > 2023) throw PreconditionError("year must be in 2010..2023, got " + std::to_string(year));
  check_key(api_key);
  http::Request r;
  r.url = nyt_base_url + "/svc/archive/v1/" + std::to_string(year) + "/" + std::to_string(month) + ".json";
  r.query = {{"api-key", api_key}};
  r.secret_names = {"api-key"};
  return parse_nyt_archive(http::send_with_retry(transport_, r, retry_, limiter_).body);
}

std::vector<Article> NewsApiClient::fetch_guardian_matches(const std::optional<Date>& date,
                                                           const std::vector<std::string>& keywords,
                                                           const std::string& api_key) {
  std::vector<std::string> terms;
  for (const auto& k : keywords)
    if (!text::trim(k).empty()) terms.push_back("\"" + text::trim(k) + "\"");
  if (terms.empty() && !date) throw PreconditionError("Guardian query needs keywords or a date");
  check_key(api_key);
  http::Request r;
  r.url = guardian_base_url + "/search";
  if (!terms.empty()) r.query.emplace_back("q", text::join(terms, " OR "));
  if (date) {
    r.query.emplace_back("from-date", date->plus_days(-guardian_window_days).iso());
    r.query.emplace_back("to-date", date->plus_days(guardian_window_days).iso());
  }
  r.query.emplace_back("order-by", "relevance");
  r.query.emplace_back("page-size", std::to_string(kGuardianPageSize));
  r.query.emplace_back("show-fields", "headline,trailText,thumbnail");
  r.query.emplace_back("show-tags", "keyword");
  r.query.emplace_back("api-key", api_key);
  r.secret_names = {"api-key"};
  auto articles = parse_guardian_search(http::send_with_retry(transport_, r, retry_, limiter_).body);
  if (articles.size() > kGuardianPageSize) articles.resize(kGuardianPageSize);
  return articles;
}

}  // namespace newsrecon
