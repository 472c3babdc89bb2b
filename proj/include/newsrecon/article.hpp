#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsrecon/date.hpp"

namespace newsrecon {

enum class Source { nytimes, guardian };

std::string to_string(Source s);
Source parse_source(std::string_view s);

inline constexpr std::size_t kMaxNewsCaptions = 5;

/// One news item in the corpus.
struct Article {
  std::string id;  // source-prefixed, e.g. "nytimes:..."
  Source source = Source::nytimes;
  std::string headline;
  std::string abstract;
  Date published_at;
  std::vector<std::string> geo_keywords;
  std::vector<std::string> news_captions;
  std::vector<std::string> image_urls;
  std::optional<bool> keep;
  /// Processing flags such as "filter-failed" or "caption-failed".
  std::vector<std::string> flags;
  /// Fields this version does not know about, kept verbatim on round-trip.
  nlohmann::json extra = nlohmann::json::object();

  bool has_flag(std::string_view f) const;
  void add_flag(std::string f);
};

nlohmann::json to_json(const Article& a);
/// Schema-validating parse; throws FormatError naming the offending field.
Article article_from_json(const nlohmann::json& j);

/// Single-writer store keyed (and iterated) by article id.
class CorpusStore {
 public:
  /// Fails on a duplicate id.
  void insert(Article a);
  /// Inserts or replaces.
  void upsert(Article a);

  std::size_t size() const { return articles_.size(); }
  bool contains(const std::string& id) const { return articles_.contains(id); }
  const Article& at(const std::string& id) const;
  const Article* find(const std::string& id) const;
  Article* find_mutable(const std::string& id);

  const std::map<std::string, Article>& articles() const { return articles_; }
  std::vector<std::string> ids() const;

  /// One JSON object per line; throws FormatError with the line number.
  static CorpusStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

 private:
  std::map<std::string, Article> articles_;
};

/// A date-bounded, exclusion-filtered view of a store.
struct CorpusVariant {
  std::string name;
  Date max_date;
  std::set<std::string> excluded_article_ids;
};

/// Articles with published_at <= max_date and id not excluded, sorted by id.
/// Unknown excluded ids are ignored.
std::vector<Article> apply_variant(const CorpusStore& store, const CorpusVariant& variant);

/// Id -> article lookup over storage owned elsewhere.
using ArticleIndex = std::map<std::string, const Article*>;
ArticleIndex index_articles(const std::vector<Article>& articles);
ArticleIndex index_articles(const CorpusStore& store);

/// Reads one id per line (blank lines and '#' comments skipped).
std::set<std::string> read_id_list(const std::filesystem::path& path);

}  // namespace newsrecon
