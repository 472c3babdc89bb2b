#include <doctest.h>

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>

#include "newsrecon/article.hpp"
#include "newsrecon/error.hpp"
#include "newsrecon/keywords.hpp"
#include "newsrecon/llm.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/news_api.hpp"

using namespace newsrecon;
namespace fs = std::filesystem;

namespace {

const fs::path kHttpFixtures = fs::path(NEWSRECON_FIXTURE_DIR) / "http";

Article make_article(std::string id, std::string date, std::vector<std::string> kws = {}) {
  Article a;
  a.id = std::move(id);
  a.headline = "Headline for " + a.id;
  a.published_at = Date::parse(date);
  a.geo_keywords = std::move(kws);
  return a;
}

fs::path tmp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("newsrecon_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Plays back a fixed sequence of responses and records every request.
class ScriptedTransport : public http::Transport {
 public:
  explicit ScriptedTransport(std::deque<http::Response> script) : script_(std::move(script)) {}
  http::Response send(const http::Request& r) override {
    requests.push_back(r);
    if (script_.empty()) return {500, "", std::nullopt};
    auto resp = script_.front();
    if (script_.size() > 1) script_.pop_front();
    return resp;
  }
  std::vector<http::Request> requests;

 private:
  std::deque<http::Response> script_;
};

/// Returns canned completions in order; a "!timeout" entry throws.
class ScriptedChat : public ChatModel {
 public:
  explicit ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const std::string& prompt) override {
    prompts.push_back(prompt);
    const auto& r = replies_.at(std::min(calls_++, replies_.size() - 1));
    if (r == "!timeout") throw TimeoutError("simulated timeout");
    return r;
  }
  std::vector<std::string> prompts;

 private:
  std::vector<std::string> replies_;
  std::size_t calls_ = 0;
};

PromptLibrary prompts() { return PromptLibrary::load(fs::path(NEWSRECON_ASSET_DIR) / "prompts"); }

struct WarningCounter {
  std::vector<std::string> messages;
  log::ScopedSink sink{[this](log::Level l, std::string_view m) {
    if (l == log::Level::warning) messages.emplace_back(m);
  }};
};

}  // namespace

TEST_CASE("article records round-trip and keep unknown fields") {
  const std::string line =
      R"({"abstract":"A","custom":{"x":[1,2]},"geo_keywords":["Kyiv"],"headline":"H","id":"nytimes:1",)"
      R"("image_urls":[],"keep":true,"news_captions":["c"],"published_at":"2022-03-01","source":"nytimes"})";
  const auto a = article_from_json(nlohmann::json::parse(line));
  CHECK(a.extra.contains("custom"));
  CHECK(to_json(a).dump() == line);
}

TEST_CASE("article schema validation") {
  auto base = nlohmann::json::parse(
      R"({"id":"g:1","source":"guardian","headline":"H","published_at":"2020-01-01"})");
  CHECK_NOTHROW(article_from_json(base));
  auto bad_date = base;
  bad_date["published_at"] = "2020-02-30";
  CHECK_THROWS_AS(article_from_json(bad_date), FormatError);
  auto bad_source = base;
  bad_source["source"] = "bbc";
  CHECK_THROWS_AS(article_from_json(bad_source), FormatError);
  auto too_many = base;
  too_many["news_captions"] = {"1", "2", "3", "4", "5", "6"};
  CHECK_THROWS_AS(article_from_json(too_many), FormatError);
  auto missing = base;
  missing.erase("headline");
  CHECK_THROWS_AS(article_from_json(missing), FormatError);
}

TEST_CASE("corpus store persistence is byte-stable and rejects duplicates") {
  CorpusStore store;
  store.insert(make_article("nytimes:b", "2015-03-02", {"Paris (France)"}));
  store.insert(make_article("guardian:a", "2016-01-01"));
  CHECK_THROWS_AS(store.insert(make_article("nytimes:b", "2015-03-02")), FormatError);
  const auto dir = tmp_dir("corpus");
  store.save(dir / "c.jsonl");
  const auto loaded = CorpusStore::load(dir / "c.jsonl");
  CHECK(loaded.serialize() == store.serialize());
  CHECK(loaded.ids() == std::vector<std::string>{"guardian:a", "nytimes:b"});

  std::ofstream(dir / "dup.jsonl") << store.serialize() << store.serialize();
  CHECK_THROWS_WITH_AS(CorpusStore::load(dir / "dup.jsonl"), doctest::Contains("duplicate"), FormatError);
}

TEST_CASE("apply_variant") {
  CorpusStore store;
  store.insert(make_article("n:1", "2021-12-31"));
  store.insert(make_article("n:2", "2022-01-01"));
  store.insert(make_article("n:0", "2012-05-05"));

  SUBCASE("articles after max_date are dropped") {
    const auto out = apply_variant(store, {"tara", Date(2021, 12, 31), {}});
    REQUIRE(out.size() == 2);
    CHECK(out[0].id == "n:0");
    CHECK(out[1].id == "n:1");
  }
  SUBCASE("identity variant") {
    CHECK(apply_variant(store, {"all", Date(9999, 12, 31), {}}).size() == 3);
  }
  SUBCASE("exclude everything, unknown ids ignored") {
    CHECK(apply_variant(store, {"none", Date(9999, 12, 31), {"n:0", "n:1", "n:2", "ghost"}}).empty());
  }
  SUBCASE("idempotent") {
    const CorpusVariant v{"v", Date(2021, 12, 31), {"n:0"}};
    CorpusStore once;
    for (auto& a : apply_variant(store, v)) once.insert(a);
    const auto twice = apply_variant(once, v);
    REQUIRE(twice.size() == once.size());
    CHECK(twice[0].id == "n:1");
  }
}

TEST_CASE("NYT archive client") {
  SUBCASE("preconditions") {
    ScriptedTransport t({{200, "{}", std::nullopt}});
    NewsApiClient client(t);
    CHECK_THROWS_AS(client.fetch_nyt_month(2015, 13, "k"), PreconditionError);
    CHECK_THROWS_AS(client.fetch_nyt_month(2015, 0, "k"), PreconditionError);
    CHECK_THROWS_AS(client.fetch_nyt_month(2009, 5, "k"), PreconditionError);
    CHECK(t.requests.empty());
  }
  SUBCASE("revoked key without fixture is a credential error") {
    ScriptedTransport t({{401, R"({"fault":"Invalid ApiKey"})", std::nullopt}});
    NewsApiClient client(t);
    CHECK_THROWS_AS(client.fetch_nyt_month(2015, 3, "revoked"), CredentialError);
    http::NetworkTransport net;
    NewsApiClient no_key(net);
    CHECK_THROWS_AS(no_key.fetch_nyt_month(2015, 3, ""), CredentialError);
  }
  SUBCASE("replay of recorded March 2015 archive") {
    WarningCounter warnings;
    http::ReplayTransport t(kHttpFixtures);
    NewsApiClient client(t);
    const auto articles = client.fetch_nyt_month(2015, 3, "any-key");
    CHECK(articles.size() == 6);
    for (const auto& a : articles) {
      CHECK_FALSE(a.headline.empty());
      CHECK(a.id.rfind("nytimes:", 0) == 0);
      CHECK(a.published_at.year() == 2015);
      CHECK(a.published_at.month() == 3);
    }
    CHECK(warnings.messages.size() == 2);  // two malformed items in the recording
    CHECK(articles[0].geo_keywords == std::vector<std::string>{"Paris (France)"});
    CHECK(articles[0].image_urls.at(0).rfind("https://www.nytimes.com/images/", 0) == 0);
  }
  SUBCASE("the api key never reaches the fixture key") {
    http::Request a, b;
    a.url = b.url = "https://api.nytimes.com/svc/archive/v1/2015/3.json";
    a.query = {{"api-key", "one"}};
    b.query = {{"api-key", "two"}};
    a.secret_names = b.secret_names = {"api-key"};
    CHECK(http::request_key(a) == http::request_key(b));
    CHECK(http::canonical_request(a).find("one") == std::string::npos);
  }
}

TEST_CASE("retry with exponential backoff") {
  std::vector<double> sleeps;
  http::RetryPolicy policy;
  policy.max_retries = 3;
  policy.base_delay_s = 1.0;
  policy.sleep = [&](double s) { sleeps.push_back(s); };

  SUBCASE("429 then success") {
    ScriptedTransport t({{429, "", std::nullopt}, {429, "", std::nullopt}, {200, R"({"response":{"docs":[]}})", std::nullopt}});
    NewsApiClient client(t, policy);
    CHECK(client.fetch_nyt_month(2016, 1, "k").empty());
    CHECK(sleeps == std::vector<double>{1.0, 2.0});
  }
  SUBCASE("persistent 429 becomes a rate-limit error") {
    ScriptedTransport t({{429, "", std::nullopt}});
    NewsApiClient client(t, policy);
    CHECK_THROWS_AS(client.fetch_nyt_month(2016, 1, "k"), RateLimitError);
    CHECK(sleeps == std::vector<double>{1.0, 2.0, 4.0});
    CHECK(t.requests.size() == 4);
  }
  SUBCASE("delay is capped and honors Retry-After") {
    policy.max_delay_s = 3.0;
    ScriptedTransport t({{429, "", 2.5}, {429, "", std::nullopt}, {429, "", std::nullopt}, {200, R"({"response":{"docs":[]}})", std::nullopt}});
    NewsApiClient client(t, policy);
    client.fetch_nyt_month(2016, 1, "k");
    CHECK(sleeps == std::vector<double>{2.5, 2.0, 3.0});
  }
}

TEST_CASE("rate limiter spaces requests") {
  std::vector<double> waits;
  http::RateLimiter limiter(10.0, [&](double s) { waits.push_back(s); });
  limiter.acquire();
  limiter.acquire();
  limiter.acquire();
  REQUIRE(waits.size() == 3);
  CHECK(waits[0] == doctest::Approx(0.0));
  CHECK(waits[1] > 9.0);
  CHECK(waits[2] > 19.0);
}

TEST_CASE("caching transport serves re-runs from disk") {
  const auto dir = tmp_dir("cache");
  ScriptedTransport inner({{200, R"({"response":{"docs":[]}})", std::nullopt}});
  http::CachingTransport cache(dir, inner);
  NewsApiClient client(cache);
  client.fetch_nyt_month(2012, 7, "k");
  client.fetch_nyt_month(2012, 7, "k");
  CHECK(inner.requests.size() == 1);
  http::ReplayTransport offline(dir);
  NewsApiClient replay(offline);
  CHECK_NOTHROW(replay.fetch_nyt_month(2012, 7, ""));
  CHECK_THROWS_AS(replay.fetch_nyt_month(2012, 8, ""), LookupError);
}

TEST_CASE("Guardian client") {
  http::ReplayTransport t(kHttpFixtures);
  NewsApiClient client(t);
  SUBCASE("keyword + date query returns at most 20") {
    const auto articles = client.fetch_guardian_matches(Date(2020, 1, 15), {"bushfire", "Australia"}, "");
    CHECK(articles.size() == 20);
    CHECK(articles[0].id.rfind("guardian:", 0) == 0);
    CHECK(articles[0].geo_keywords == std::vector<std::string>{"Australia", "New South Wales"});
    CHECK(articles[1].geo_keywords == std::vector<std::string>{"Australia"});
  }
  SUBCASE("empty query is rejected") {
    CHECK_THROWS_AS(client.fetch_guardian_matches(std::nullopt, {}, "k"), PreconditionError);
    CHECK_THROWS_AS(client.fetch_guardian_matches(std::nullopt, {"  "}, "k"), PreconditionError);
  }
  SUBCASE("date-only query stays near the date") {
    const auto articles = client.fetch_guardian_matches(Date(2020, 1, 15), {}, "");
    REQUIRE_FALSE(articles.empty());
    for (const auto& a : articles) CHECK(std::llabs(days_between(Date(2020, 1, 15), a.published_at)) <= 7);
  }
}

TEST_CASE("filter_visualizable") {
  const auto p = prompts();
  Article a = make_article("nytimes:obama", "2010-02-01");
  a.headline = "On nearly every front, President Obama's goal of lower deficits has gotten harder since his first budget a year ago";

  SUBCASE("prompt carries the headline, eight examples and the answer instruction") {
    const auto rendered = p.render_filter(a.headline);
    CHECK(rendered.find(a.headline) != std::string::npos);
    std::size_t count = 0;
    for (auto pos = rendered.find("News article headline:"); pos != std::string::npos;
         pos = rendered.find("News article headline:", pos + 1))
      ++count;
    CHECK(count == 9);
    CHECK(rendered.find("Answer only with \"Category 1\" or \"Category 2\"") != std::string::npos);
  }
  SUBCASE("fiscal-policy headline answered Category 2 is removed") {
    ScriptedChat llm({"Category 2"});
    CHECK_FALSE(filter_visualizable(a, llm, p));
    CHECK(a.keep == false);
    CHECK_FALSE(a.has_flag(kFilterFailedFlag));
  }
  SUBCASE("exact Category 1") {
    ScriptedChat llm({"Category 1"});
    CHECK(filter_visualizable(a, llm, p));
    CHECK(a.keep == true);
  }
  SUBCASE("lowercase with punctuation") {
    ScriptedChat llm({"  category 2."});
    CHECK_FALSE(filter_visualizable(a, llm, p));
  }
  SUBCASE("neither category drops and flags") {
    ScriptedChat llm({"I cannot decide"});
    CHECK_FALSE(filter_visualizable(a, llm, p));
    CHECK(a.has_flag(kFilterFailedFlag));
  }
  SUBCASE("one timeout is retried") {
    ScriptedChat llm({"!timeout", "Category 1"});
    CHECK(filter_visualizable(a, llm, p));
    CHECK(llm.prompts.size() == 2);
  }
  SUBCASE("two timeouts drop and flag") {
    ScriptedChat llm({"!timeout"});
    CHECK_FALSE(filter_visualizable(a, llm, p));
    CHECK(a.keep == false);
    CHECK(a.has_flag(kFilterFailedFlag));
    CHECK(llm.prompts.size() == 2);
  }
  SUBCASE("empty headline is a precondition error") {
    a.headline = " ";
    ScriptedChat llm({"Category 1"});
    CHECK_THROWS_AS(filter_visualizable(a, llm, p), PreconditionError);
  }
}

TEST_CASE("generate_news_captions") {
  const auto p = prompts();
  Article a = make_article("nytimes:x", "2019-04-21");
  a.keep = true;
  SUBCASE("five captions") {
    ScriptedChat llm({R"(["Protesters holding signs in a square.", "b", "c", "d", "e"])"});
    CHECK(generate_news_captions(a, llm, p).size() == 5);
    CHECK(a.news_captions[0] == "Protesters holding signs in a square.");
  }
  SUBCASE("seven items truncated to five") {
    ScriptedChat llm({R"(Here you go: ["1","2","3","4","5","6","7"])"});
    CHECK(generate_news_captions(a, llm, p) == std::vector<std::string>{"1", "2", "3", "4", "5"});
  }
  SUBCASE("python-style quoting") {
    ScriptedChat llm({R"(['A crowd at the city's main square.', 'Police line a road.'])"});
    const auto caps = generate_news_captions(a, llm, p);
    REQUIRE(caps.size() == 2);
    CHECK(caps[0] == "A crowd at the city's main square.");
  }
  SUBCASE("no list: retried once, then empty with flag") {
    ScriptedChat llm({"no list here"});
    CHECK(generate_news_captions(a, llm, p).empty());
    CHECK(a.has_flag(kCaptionFailedFlag));
    CHECK(llm.prompts.size() == 2);
  }
  SUBCASE("retry recovers") {
    ScriptedChat llm({"no list here", R"(["ok"])"});
    CHECK(generate_news_captions(a, llm, p) == std::vector<std::string>{"ok"});
  }
  SUBCASE("requires keep=true") {
    a.keep = false;
    ScriptedChat llm({R"(["x"])"});
    CHECK_THROWS_AS(generate_news_captions(a, llm, p), PreconditionError);
  }
}

TEST_CASE("store enrichment keeps pipeline order: captions only for kept articles") {
  CorpusStore store;
  for (int i = 0; i < 6; ++i) store.insert(make_article("n:" + std::to_string(i), "2015-01-0" + std::to_string(i + 1)));
  // Kept iff the headline id is even.
  class ByHeadline : public ChatModel {
   public:
    std::string complete(const std::string& prompt) override {
      if (prompt.find("generate 5 news image captions") != std::string::npos) return R"(["cap one", "cap two"])";
      const auto pos = prompt.rfind("Headline for n:");
      const int id = prompt[pos + 15] - '0';
      return id % 2 == 0 ? "Category 1" : "Category 2";
    }
  } llm;
  const auto p = prompts();
  const auto fs_stats = filter_store(store, llm, p);
  CHECK(fs_stats.kept == 3);
  CHECK(fs_stats.dropped == 3);
  const auto cs = caption_store(store, llm, p);
  CHECK(cs.captioned == 3);
  for (const auto& [id, a] : store.articles()) CHECK(a.news_captions.empty() == (a.keep != true));
}

TEST_CASE("endpoint chat model replays fixtures without network") {
  const auto dir = tmp_dir("llm_fixtures");
  LlmEndpointConfig cfg;
  cfg.base_url = "http://llm.invalid/v1";
  cfg.fixture_dir = dir;
  EndpointChatModel model(cfg);
  const auto req = model.make_request("classify this");
  http::write_fixture(dir, req, {200, R"({"choices":[{"message":{"role":"assistant","content":"Category 1"}}]})", std::nullopt});
  CHECK(model.complete("classify this") == "Category 1");
  CHECK_THROWS_AS(model.complete("something unrecorded"), LookupError);

  LlmEndpointConfig bad = cfg;
  bad.temperature = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("capitalized-phrase keyword fallback") {
  CapitalizedPhraseProvider kw;
  CHECK(kw.extract("The crowd gathers in Tahrir Square, Cairo, after the vote.") ==
        std::vector<std::string>{"Tahrir Square", "Cairo"});
  CHECK(kw.extract("Firefighters battle a blaze near Athens") == std::vector<std::string>{"Firefighters", "Athens"});
  CHECK(kw.extract("no capitals at all").empty());
}
