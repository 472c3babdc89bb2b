#include "newsrecon/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "newsrecon/error.hpp"
#include "newsrecon/hash.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

struct Field {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_num(const std::string& s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw ConfigError("not a valid number: '" + s + "'");
  return v;
}

Field int_field(std::string key, int& ref) {
  return {std::move(key), [&ref] { return std::to_string(ref); }, [&ref](const std::string& s) { ref = parse_num<int>(s); }};
}

Field u64_field(std::string key, std::uint64_t& ref) {
  return {std::move(key), [&ref] { return std::to_string(ref); },
          [&ref](const std::string& s) { ref = parse_num<std::uint64_t>(s); }};
}

Field size_field(std::string key, std::size_t& ref) {
  return {std::move(key), [&ref] { return std::to_string(ref); },
          [&ref](const std::string& s) { ref = parse_num<std::size_t>(s); }};
}

Field dbl_field(std::string key, double& ref) {
  return {std::move(key), [&ref] { return fmt(ref); }, [&ref](const std::string& s) { ref = parse_num<double>(s); }};
}

void cross_fields(std::vector<Field>& f, const std::string& p, CrossTrainConfig& c) {
  f.push_back(int_field(p + "epochs", c.epochs));
  f.push_back(dbl_field(p + "learning_rate", c.learning_rate));
  f.push_back(dbl_field(p + "weight_decay", c.weight_decay));
  f.push_back(int_field(p + "batch_size", c.batch_size));
  f.push_back(int_field(p + "top_k", c.top_k));
  f.push_back(int_field(p + "n_negative", c.n_negative));
  f.push_back({p + "combiner", [&c] { return c.combiner.str(); },
               [&c](const std::string& s) { c.combiner = Combiner::parse(s); }});
}

std::vector<Field> fields(Config& c) {
  std::vector<Field> f;
  f.push_back(u64_field("seed", c.seed));
  f.push_back(int_field("k_loc", c.k_loc));
  f.push_back(int_field("k_evt", c.k_evt));
  f.push_back(int_field("n_window_days", c.n_window_days));
  f.push_back(int_field("n_min_size", c.n_min_size));
  f.push_back(int_field("min_clusters", c.min_clusters));

  auto& b = c.biencoder;
  f.push_back(int_field("biencoder.epochs", b.epochs));
  f.push_back(dbl_field("biencoder.learning_rate", b.learning_rate));
  f.push_back(int_field("biencoder.batch_size", b.batch_size));
  f.push_back(dbl_field("biencoder.n_random", b.n_random));
  f.push_back(dbl_field("biencoder.temperature", b.temperature));
  f.push_back(dbl_field("biencoder.momentum", b.momentum));
  f.push_back(dbl_field("biencoder.weight_decay", b.weight_decay));
  f.push_back(int_field("biencoder.recall_k", b.recall_k));
  f.push_back(size_field("biencoder.out_dim", b.out_dim));
  f.push_back({"biencoder.input_field", [&b] { return to_string(b.input_field); },
               [&b](const std::string& s) { b.input_field = parse_text_field(s); }});

  cross_fields(f, "xenc_loc.", c.xenc_loc);
  cross_fields(f, "xenc_evt.", c.xenc_evt);

  auto& m = c.metrics;
  f.push_back(dbl_field("metrics.t_day_days", m.date.t_day));
  f.push_back(dbl_field("metrics.t_month_months", m.date.t_month));
  f.push_back(dbl_field("metrics.t_year_years", m.date.t_year));
  f.push_back(dbl_field("metrics.t_decade_decades", m.date.t_decade));
  f.push_back(dbl_field("metrics.w_century", m.date.w_century));
  f.push_back(dbl_field("metrics.w_decade", m.date.w_decade));
  f.push_back(dbl_field("metrics.w_year", m.date.w_year));
  f.push_back(dbl_field("metrics.w_month", m.date.w_month));
  f.push_back(dbl_field("metrics.w_day", m.date.w_day));
  f.push_back(dbl_field("metrics.great_loc_scale_km", m.great_loc_scale_km));
  f.push_back(dbl_field("metrics.co_delta_scale_km", m.co_delta_scale_km));
  f.push_back(dbl_field("metrics.delta_scale_years", m.delta_scale_years));
  f.push_back(dbl_field("metrics.great_weight_date", m.great_weight_date));
  f.push_back(dbl_field("metrics.great_weight_loc", m.great_weight_loc));

  f.push_back({"variant.name", [&c] { return c.variant_name; }, [&c](const std::string& s) { c.variant_name = s; }});
  f.push_back({"variant.max_date", [&c] { return c.variant_max_date ? c.variant_max_date->iso() : std::string(); },
               [&c](const std::string& s) {
                 if (s.empty()) {
                   c.variant_max_date.reset();
                   return;
                 }
                 const auto d = Date::try_parse(s);
                 if (!d) throw ConfigError("not a YYYY-MM-DD date: '" + s + "'");
                 c.variant_max_date = *d;
               }});
  f.push_back({"embedder.templates", [&c] { return to_string(c.template_embedder); },
               [&c](const std::string& s) { c.template_embedder = parse_template_embedder(s); }});
  return f;
}

std::uint64_t hash_keys(const Config& c, std::initializer_list<std::string_view> prefixes) {
  Xxh64State h(0);
  for (const auto& line : text::split(c.to_text(), '\n')) {
    for (const auto p : prefixes)
      if (line.rfind(p, 0) == 0) {
        h.update(line);
        h.update("\n");
        break;
      }
  }
  return h.digest();
}

}  // namespace

std::string to_string(TemplateEmbedder e) {
  switch (e) {
    case TemplateEmbedder::fake: return "fake";
    case TemplateEmbedder::world: return "world";
    case TemplateEmbedder::cache_only: return "cache";
  }
  return "fake";
}

TemplateEmbedder parse_template_embedder(std::string_view s) {
  if (s == "fake") return TemplateEmbedder::fake;
  if (s == "world") return TemplateEmbedder::world;
  if (s == "cache") return TemplateEmbedder::cache_only;
  throw ConfigError("template embedder must be fake, world or cache, got '" + std::string(s) + "'");
}

const std::vector<std::string>& known_path_keys() {
  static const std::vector<std::string> keys = {
      "corpus",       "images",          "labels",          "gazetteer",    "image_embeddings",
      "article_image_embeddings", "caption_embeddings", "abstract_embeddings", "template_cache",
      "heads",        "xenc_loc",        "xenc_evt",        "variant_exclude", "world"};
  return keys;
}

Config::Config() { xenc_loc.top_k = 20; }

void Config::validate() const {
  if (k_loc < 1 || k_evt < 1) throw ConfigError("k_loc and k_evt must be >= 1");
  if (k_loc > k_evt) throw ConfigError("k_loc must not exceed k_evt (location reranks a prefix of the event list)");
  if (n_window_days < 0) throw ConfigError("n_window_days must be >= 0");
  if (n_min_size < 1) throw ConfigError("n_min_size must be >= 1");
  if (min_clusters < 0) throw ConfigError("min_clusters must be >= 0");
  biencoder.validate();
  xenc_loc.validate();
  xenc_evt.validate();
  metrics.validate();
}

void Config::set(const std::string& key, const std::string& value, const std::filesystem::path& base) {
  if (key.rfind("path.", 0) == 0) {
    const std::string name = key.substr(5);
    const auto& known = known_path_keys();
    if (std::find(known.begin(), known.end(), name) == known.end()) throw ConfigError("unknown config key '" + key + "'");
    std::filesystem::path p(value);
    if (!value.empty() && p.is_relative() && !base.empty()) p = base / p;
    if (value.empty()) paths.erase(name);
    else paths[name] = p.lexically_normal();
    return;
  }
  for (auto& f : fields(*this)) {
    if (f.key != key) continue;
    try {
      f.set(value);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

Config Config::parse(std::string_view text, const std::filesystem::path& base) {
  Config c;
  std::size_t lineno = 0;
  for (const auto& raw : text::split(text, '\n')) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const auto key = text::trim(std::string_view(line).substr(0, eq));
    const auto value = text::trim(std::string_view(line).substr(eq + 1));
    try {
      c.set(key, value, base);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

std::string Config::to_text() const {
  std::map<std::string, std::string> kv;
  for (auto& f : fields(const_cast<Config&>(*this))) kv[f.key] = f.get();
  for (const auto& [name, p] : paths) kv["path." + name] = p.string();
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

const std::filesystem::path& Config::path(const std::string& name) const {
  const auto it = paths.find(name);
  if (it == paths.end()) throw ConfigError("config has no path." + name);
  return it->second;
}

bool Config::has_path(const std::string& name) const { return paths.contains(name); }

std::uint64_t Config::biencoder_hash() const { return hash_keys(*this, {"seed ", "biencoder."}); }

std::uint64_t Config::loc_scorer_hash() const {
  return hash_keys(*this, {"seed ", "biencoder.", "xenc_loc.", "k_loc ", "embedder."});
}

std::uint64_t Config::event_scorer_hash() const {
  return hash_keys(*this, {"seed ", "biencoder.", "xenc_evt.", "k_evt ", "n_window_days ", "n_min_size ", "embedder."});
}

}  // namespace newsrecon
