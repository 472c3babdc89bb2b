#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "newsrecon/article.hpp"
#include "newsrecon/http.hpp"

namespace newsrecon {

struct LlmEndpointConfig {
  std::string base_url = "http://localhost:8000/v1";
  std::string model_name = "qwen2.5-7b-instruct";
  std::string api_key_env_var = "NEWSRECON_LLM_API_KEY";
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  /// When set, responses replay from this directory and no network I/O occurs.
  std::optional<std::filesystem::path> fixture_dir;

  void validate() const;
};

/// Single-turn text completion.
class ChatModel {
 public:
  virtual ~ChatModel() = default;
  /// Throws TimeoutError on timeout.
  virtual std::string complete(const std::string& prompt) = 0;
};

/// OpenAI-style chat-completions endpoint.
class EndpointChatModel : public ChatModel {
 public:
  explicit EndpointChatModel(LlmEndpointConfig cfg);
  /// Uses the given transport instead of building one from the config.
  EndpointChatModel(LlmEndpointConfig cfg, http::Transport& transport);
  std::string complete(const std::string& prompt) override;

  /// The request complete() would send; exposed for recording fixtures.
  http::Request make_request(const std::string& prompt) const;

 private:
  LlmEndpointConfig cfg_;
  std::unique_ptr<http::Transport> owned_;
  http::Transport* transport_;
};

/// Prompt templates and few-shot blocks loaded from text assets:
///   filter_prompt.txt, filter_fewshot.txt, caption_prompt.txt, caption_fewshot.txt
/// Templates use {FEW_SHOT_EXAMPLES} and {HEADLINE} placeholders.
struct PromptLibrary {
  std::string filter_template;
  std::string filter_examples;
  std::string caption_template;
  std::string caption_examples;

  static PromptLibrary load(const std::filesystem::path& dir);
  static std::filesystem::path default_dir();

  std::string render_filter(const std::string& headline) const;
  std::string render_caption(const std::string& headline) const;
};

inline constexpr const char* kFilterFailedFlag = "filter-failed";
inline constexpr const char* kCaptionFailedFlag = "caption-failed";

/// Classifies an article as showing a visual event; sets article.keep.
/// Timeouts retry once; a second failure or an unparseable answer drops the
/// article and flags it.
bool filter_visualizable(Article& article, ChatModel& llm, const PromptLibrary& prompts);

/// Generates up to five captions into article.news_captions. Requires
/// keep == true. Unparseable output is retried once, then flagged.
std::vector<std::string> generate_news_captions(Article& article, ChatModel& llm, const PromptLibrary& prompts);

/// 1 / 2 / nullopt for "category 1" / "category 2" / neither.
std::optional<int> parse_category(const std::string& response);
/// JSON (or quoted-list) array of strings; nullopt when no list is present.
std::optional<std::vector<std::string>> parse_caption_list(const std::string& response);

/// Runs filter then caption over every article of the store, in parallel,
/// writing results back in id order. Captions only for keep == true.
struct EnrichStats {
  std::size_t kept = 0, dropped = 0, filter_failed = 0, captioned = 0, caption_failed = 0;
};
EnrichStats filter_store(CorpusStore& store, ChatModel& llm, const PromptLibrary& prompts, bool only_unfiltered = true);
EnrichStats caption_store(CorpusStore& store, ChatModel& llm, const PromptLibrary& prompts, bool only_missing = true);

}  // namespace newsrecon
