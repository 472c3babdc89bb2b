#include "newsrecon/llm.hpp"

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "newsrecon/error.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/text.hpp"

#ifndef NEWSRECON_ASSET_DIR
#define NEWSRECON_ASSET_DIR "assets"
#endif

namespace newsrecon {
namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read prompt asset " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string substitute(std::string tpl, const std::string& key, const std::string& value) {
  for (auto pos = tpl.find(key); pos != std::string::npos; pos = tpl.find(key, pos + value.size()))
    tpl.replace(pos, key.size(), value);
  return tpl;
}

std::string render(const std::string& tpl, const std::string& examples, const std::string& headline) {
  return substitute(substitute(tpl, "{FEW_SHOT_EXAMPLES}", text::trim(examples)), "{HEADLINE}", headline);
}

template <class F>
auto with_one_retry(F&& call) -> decltype(call()) {
  try {
    return call();
  } catch (const TimeoutError&) {
    log::info("LLM call timed out; retrying once");
    return call();
  }
}

}  // namespace

void LlmEndpointConfig::validate() const {
  if (temperature < 0) throw ConfigError("LLM temperature must be >= 0");
  if (timeout.count() <= 0) throw ConfigError("LLM timeout must be positive");
  if (!fixture_dir && base_url.empty()) throw ConfigError("LLM base_url is empty");
}

EndpointChatModel::EndpointChatModel(LlmEndpointConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.fixture_dir) owned_ = std::make_unique<http::ReplayTransport>(*cfg_.fixture_dir);
  else owned_ = std::make_unique<http::NetworkTransport>(cfg_.timeout);
  transport_ = owned_.get();
}

EndpointChatModel::EndpointChatModel(LlmEndpointConfig cfg, http::Transport& transport)
    : cfg_(std::move(cfg)), transport_(&transport) {
  cfg_.validate();
}

http::Request EndpointChatModel::make_request(const std::string& prompt) const {
  http::Request r;
  r.method = "POST";
  r.url = cfg_.base_url + "/chat/completions";
  const json body = {{"model", cfg_.model_name},
                     {"temperature", cfg_.temperature},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  r.body = body.dump();
  r.headers.emplace_back("Content-Type", "application/json");
  if (!transport_ || !transport_->offline()) {
    if (const char* key = std::getenv(cfg_.api_key_env_var.c_str()); key && *key)
      r.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  r.secret_names = {"Authorization"};
  return r;
}

std::string EndpointChatModel::complete(const std::string& prompt) {
  http::RetryPolicy policy;
  policy.max_retries = 2;
  const auto resp = http::send_with_retry(*transport_, make_request(prompt), policy);
  try {
    const json j = json::parse(resp.body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed chat completion response: ") + e.what());
  }
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  return {read_text(dir / "filter_prompt.txt"), read_text(dir / "filter_fewshot.txt"),
          read_text(dir / "caption_prompt.txt"), read_text(dir / "caption_fewshot.txt")};
}

std::filesystem::path PromptLibrary::default_dir() { return std::filesystem::path(NEWSRECON_ASSET_DIR) / "prompts"; }

std::string PromptLibrary::render_filter(const std::string& headline) const {
  return render(filter_template, filter_examples, headline);
}

std::string PromptLibrary::render_caption(const std::string& headline) const {
  return render(caption_template, caption_examples, headline);
}

std::optional<int> parse_category(const std::string& response) {
  const std::string r = text::normalize_space(response);
  if (text::contains(r, "category 1")) return 1;
  if (text::contains(r, "category 2")) return 2;
  return std::nullopt;
}

std::optional<std::vector<std::string>> parse_caption_list(const std::string& response) {
  const auto open = response.find('[');
  const auto close = response.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  const std::string body = response.substr(open, close - open + 1);
  try {
    const json j = json::parse(body);
    if (j.is_array()) {
      std::vector<std::string> out;
      for (const auto& e : j) {
        if (!e.is_string()) return std::nullopt;
        if (auto s = text::trim(e.get<std::string>()); !s.empty()) out.push_back(std::move(s));
      }
      return out;
    }
  } catch (const json::exception&) {
  }
  // Python-style list with single-quoted items.
  static const std::regex item(R"('((?:[^'\\]|\\.|'(?=[A-Za-z]))*)'|"((?:[^"\\]|\\.)*)\")");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), item); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    auto s = text::trim(m[1].matched ? m[1].str() : m[2].str());
    if (!s.empty()) out.push_back(std::move(s));
  }
  if (out.empty()) return std::nullopt;
  return out;
}

bool filter_visualizable(Article& article, ChatModel& llm, const PromptLibrary& prompts) {
  if (text::trim(article.headline).empty()) throw PreconditionError("article '" + article.id + "' has no headline");
  const std::string prompt = prompts.render_filter(article.headline);
  std::optional<int> category;
  try {
    category = parse_category(with_one_retry([&] { return llm.complete(prompt); }));
  } catch (const TimeoutError&) {
    log::warn("filter timed out twice for '" + article.id + "'; dropping");
  }
  if (!category) {
    article.keep = false;
    article.add_flag(kFilterFailedFlag);
    return false;
  }
  article.keep = *category == 1;
  return *article.keep;
}

std::vector<std::string> generate_news_captions(Article& article, ChatModel& llm, const PromptLibrary& prompts) {
  if (article.keep != true) throw PreconditionError("article '" + article.id + "' is not marked keep=true");
  const std::string prompt = prompts.render_caption(article.headline);
  std::optional<std::vector<std::string>> parsed;
  for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
    try {
      parsed = parse_caption_list(llm.complete(prompt));
    } catch (const TimeoutError&) {
      log::info("caption generation timed out for '" + article.id + "'");
    }
  }
  if (!parsed || parsed->empty()) {
    article.news_captions.clear();
    article.add_flag(kCaptionFailedFlag);
    log::warn("no captions parsed for '" + article.id + "'");
    return {};
  }
  if (parsed->size() > kMaxNewsCaptions) parsed->resize(kMaxNewsCaptions);
  article.news_captions = *parsed;
  return article.news_captions;
}

EnrichStats filter_store(CorpusStore& store, ChatModel& llm, const PromptLibrary& prompts, bool only_unfiltered) {
  std::vector<Article*> todo;
  for (const auto& id : store.ids()) {
    Article* a = store.find_mutable(id);
    if (!only_unfiltered || !a->keep) todo.push_back(a);
  }
  const auto n = static_cast<std::int64_t>(todo.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) filter_visualizable(*todo[static_cast<std::size_t>(i)], llm, prompts);
  EnrichStats stats;
  for (const Article* a : todo) {
    if (a->keep == true) ++stats.kept;
    else ++stats.dropped;
    if (a->has_flag(kFilterFailedFlag)) ++stats.filter_failed;
  }
  return stats;
}

EnrichStats caption_store(CorpusStore& store, ChatModel& llm, const PromptLibrary& prompts, bool only_missing) {
  std::vector<Article*> todo;
  for (const auto& id : store.ids()) {
    Article* a = store.find_mutable(id);
    if (a->keep != true) {
      a->news_captions.clear();
      continue;
    }
    if (!only_missing || a->news_captions.empty()) todo.push_back(a);
  }
  const auto n = static_cast<std::int64_t>(todo.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) generate_news_captions(*todo[static_cast<std::size_t>(i)], llm, prompts);
  EnrichStats stats;
  for (const Article* a : todo) {
    if (a->has_flag(kCaptionFailedFlag)) ++stats.caption_failed;
    else ++stats.captioned;
  }
  return stats;
}

}  // namespace newsrecon
