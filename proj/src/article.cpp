#include "newsrecon/article.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "newsrecon/error.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

using nlohmann::json;

const std::set<std::string>& known_fields() {
  static const std::set<std::string> f = {"id",           "source",        "headline",   "abstract", "published_at",
                                          "geo_keywords", "news_captions", "image_urls", "keep",     "flags"};
  return f;
}

std::vector<std::string> string_list(const json& j, const char* field) {
  if (!j.contains(field)) return {};
  const json& v = j.at(field);
  if (!v.is_array()) throw FormatError(std::string("field '") + field + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw FormatError(std::string("field '") + field + "' must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string required_string(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string())
    throw FormatError(std::string("missing or non-string field '") + field + "'");
  return j.at(field).get<std::string>();
}

}  // namespace

std::string to_string(Source s) { return s == Source::nytimes ? "nytimes" : "guardian"; }

Source parse_source(std::string_view s) {
  if (s == "nytimes") return Source::nytimes;
  if (s == "guardian") return Source::guardian;
  throw FormatError("unknown source '" + std::string(s) + "'");
}

bool Article::has_flag(std::string_view f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

void Article::add_flag(std::string f) {
  if (!has_flag(f)) flags.push_back(std::move(f));
}

json to_json(const Article& a) {
  json j = a.extra;
  j["id"] = a.id;
  j["source"] = to_string(a.source);
  j["headline"] = a.headline;
  j["abstract"] = a.abstract;
  j["published_at"] = a.published_at.iso();
  j["geo_keywords"] = a.geo_keywords;
  j["news_captions"] = a.news_captions;
  j["image_urls"] = a.image_urls;
  if (a.keep) j["keep"] = *a.keep;
  if (!a.flags.empty()) j["flags"] = a.flags;
  return j;
}

Article article_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("article record must be an object");
  Article a;
  a.id = required_string(j, "id");
  if (a.id.empty()) throw FormatError("empty article id");
  a.source = parse_source(required_string(j, "source"));
  a.headline = required_string(j, "headline");
  a.abstract = j.contains("abstract") ? required_string(j, "abstract") : std::string();
  const auto date = required_string(j, "published_at");
  const auto parsed = Date::try_parse(date);
  if (!parsed) throw FormatError("article '" + a.id + "': invalid published_at '" + date + "'");
  a.published_at = *parsed;
  a.geo_keywords = string_list(j, "geo_keywords");
  a.news_captions = string_list(j, "news_captions");
  if (a.news_captions.size() > kMaxNewsCaptions)
    throw FormatError("article '" + a.id + "' has " + std::to_string(a.news_captions.size()) + " captions (max 5)");
  a.image_urls = string_list(j, "image_urls");
  if (j.contains("keep") && !j.at("keep").is_null()) {
    if (!j.at("keep").is_boolean()) throw FormatError("field 'keep' must be boolean");
    a.keep = j.at("keep").get<bool>();
  }
  a.flags = string_list(j, "flags");
  for (const auto& [key, value] : j.items())
    if (!known_fields().contains(key)) a.extra[key] = value;
  return a;
}

void CorpusStore::insert(Article a) {
  const std::string id = a.id;
  if (!articles_.emplace(id, std::move(a)).second) throw FormatError("duplicate article id '" + id + "'");
}

void CorpusStore::upsert(Article a) {
  const std::string id = a.id;
  articles_.insert_or_assign(id, std::move(a));
}

const Article& CorpusStore::at(const std::string& id) const {
  const auto it = articles_.find(id);
  if (it == articles_.end()) throw LookupError("no article '" + id + "' in corpus");
  return it->second;
}

const Article* CorpusStore::find(const std::string& id) const {
  const auto it = articles_.find(id);
  return it == articles_.end() ? nullptr : &it->second;
}

Article* CorpusStore::find_mutable(const std::string& id) {
  const auto it = articles_.find(id);
  return it == articles_.end() ? nullptr : &it->second;
}

std::vector<std::string> CorpusStore::ids() const {
  std::vector<std::string> out;
  out.reserve(articles_.size());
  for (const auto& [id, _] : articles_) out.push_back(id);
  return out;
}

CorpusStore CorpusStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  CorpusStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      store.insert(article_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const PreconditionError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return store;
}

std::string CorpusStore::serialize() const {
  std::string out;
  for (const auto& [_, a] : articles_) {
    out += to_json(a).dump();
    out += '\n';
  }
  return out;
}

void CorpusStore::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus file " + path.string());
  out << serialize();
}

std::vector<Article> apply_variant(const CorpusStore& store, const CorpusVariant& variant) {
  std::vector<Article> out;
  for (const auto& [id, a] : store.articles()) {
    if (a.published_at > variant.max_date) continue;
    if (variant.excluded_article_ids.contains(id)) continue;
    out.push_back(a);
  }
  return out;
}

std::set<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open id list " + path.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    ids.insert(t);
  }
  return ids;
}

ArticleIndex index_articles(const std::vector<Article>& articles) {
  ArticleIndex out;
  for (const auto& a : articles) out.emplace(a.id, &a);
  return out;
}

ArticleIndex index_articles(const CorpusStore& store) {
  ArticleIndex out;
  for (const auto& [id, a] : store.articles()) out.emplace(id, &a);
  return out;
}

}  // namespace newsrecon
