#include "newsrecon/http.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "newsrecon/error.hpp"
#include "newsrecon/hash.hpp"
#include "newsrecon/log.hpp"

namespace newsrecon::http {
namespace {

bool is_secret(const Request& r, const std::string& name) {
  return std::find(r.secret_names.begin(), r.secret_names.end(), name) != r.secret_names.end();
}

std::string url_encode(const std::string& s) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

std::string encode_query(const std::vector<std::pair<std::string, std::string>>& q) {
  std::string out;
  for (const auto& [k, v] : q) {
    if (!out.empty()) out.push_back('&');
    out += url_encode(k) + "=" + url_encode(v);
  }
  return out;
}

std::filesystem::path fixture_path(const std::filesystem::path& dir, const Request& r) {
  return dir / (request_key(r) + ".json");
}

}  // namespace

std::string Request::full_url() const {
  const auto q = encode_query(query);
  return q.empty() ? url : url + "?" + q;
}

std::string canonical_request(const Request& r) {
  std::vector<std::pair<std::string, std::string>> q;
  for (const auto& kv : r.query)
    if (!is_secret(r, kv.first)) q.push_back(kv);
  std::sort(q.begin(), q.end());
  std::string out = r.method + " " + r.url;
  if (!q.empty()) out += "?" + encode_query(q);
  out += "\n" + r.body;
  return out;
}

std::string request_key(const Request& r) { return hex64(xxh64(canonical_request(r))); }

Response NetworkTransport::send(const Request& r) {
  const auto scheme_end = r.url.find("://");
  if (scheme_end == std::string::npos) throw PreconditionError("URL without scheme: " + r.url);
  const auto path_start = r.url.find('/', scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? r.url : r.url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : r.url.substr(path_start);
  if (const auto q = encode_query(r.query); !q.empty()) path += "?" + q;

  httplib::Client client(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  client.set_follow_location(true);
  httplib::Headers headers;
  for (const auto& [k, v] : r.headers) headers.emplace(k, v);

  httplib::Result res = r.method == "POST"
                            ? client.Post(path, headers, r.body, "application/json")
                            : client.Get(path, headers);
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
      throw TimeoutError("request to " + r.url + " timed out");
    throw HttpError("request to " + r.url + " failed: " + httplib::to_string(err), 0);
  }
  Response out{res->status, res->body, std::nullopt};
  if (res->has_header("Retry-After")) {
    try {
      out.retry_after_s = std::stod(res->get_header_value("Retry-After"));
    } catch (const std::exception&) {
    }
  }
  return out;
}

void write_fixture(const std::filesystem::path& dir, const Request& r, const Response& resp) {
  std::filesystem::create_directories(dir);
  nlohmann::json j = {{"request", canonical_request(r)}, {"status", resp.status}, {"body", resp.body}};
  std::ofstream out(fixture_path(dir, r), std::ios::binary | std::ios::trunc);
  out << j.dump(1) << '\n';
  if (!out) throw Error("cannot write fixture in " + dir.string());
}

std::optional<Response> read_fixture(const std::filesystem::path& dir, const Request& r) {
  const auto p = fixture_path(dir, r);
  std::ifstream in(p);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    return Response{j.at("status").get<int>(), j.at("body").get<std::string>(), std::nullopt};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt fixture " + p.string() + ": " + e.what());
  }
}

Response ReplayTransport::send(const Request& r) {
  if (auto resp = read_fixture(dir_, r)) return *resp;
  throw LookupError("no fixture " + request_key(r) + ".json in " + dir_.string() + " for request " +
                    canonical_request(r));
}

Response CachingTransport::send(const Request& r) {
  if (auto resp = read_fixture(dir_, r)) return *resp;
  Response resp = inner_.send(r);
  if (resp.status == 200) {
    std::lock_guard lock(write_mutex_);
    write_fixture(dir_, r, resp);
  }
  return resp;
}

SleepFn real_sleep() {
  return [](double s) {
    if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
}

void RateLimiter::acquire() {
  double wait = 0.0;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(interval_));
    auto slot = now;
    if (next_ && *next_ > now) slot = *next_;
    wait = std::chrono::duration<double>(slot - now).count();
    next_ = slot + interval;
  }
  sleep_(wait);
}

Response send_with_retry(Transport& t, const Request& r, const RetryPolicy& policy, RateLimiter* limiter) {
  for (int attempt = 0;; ++attempt) {
    if (limiter && !t.offline()) limiter->acquire();
    Response resp = t.send(r);
    if (resp.status == 401 || resp.status == 403)
      throw CredentialError("credential rejected (HTTP " + std::to_string(resp.status) + ") by " + r.url);
    const bool retryable = resp.status == 429 || resp.status >= 500;
    if (!retryable) {
      if (resp.status != 200) throw HttpError("HTTP " + std::to_string(resp.status) + " from " + r.url, resp.status);
      return resp;
    }
    if (attempt >= policy.max_retries) {
      if (resp.status == 429)
        throw RateLimitError("rate limited by " + r.url + " after " + std::to_string(attempt + 1) + " attempts");
      throw HttpError("HTTP " + std::to_string(resp.status) + " from " + r.url + " after retries", resp.status);
    }
    double delay = std::min(policy.max_delay_s, policy.base_delay_s * std::pow(2.0, attempt));
    if (resp.retry_after_s) delay = std::min(policy.max_delay_s, std::max(delay, *resp.retry_after_s));
    log::info("HTTP " + std::to_string(resp.status) + " from " + r.url + ", retrying in " + std::to_string(delay) + "s");
    if (policy.sleep) policy.sleep(delay);
  }
}

}  // namespace newsrecon::http
