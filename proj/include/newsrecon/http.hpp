#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace newsrecon::http {

struct Request {
  std::string method = "GET";
  std::string url;  // scheme://host/path, no query string
  std::vector<std::pair<std::string, std::string>> query;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  /// Query parameter / header names that carry credentials; excluded from the
  /// fixture key so recorded responses replay without the secret.
  std::vector<std::string> secret_names;

  std::string full_url() const;
};

struct Response {
  int status = 0;
  std::string body;
  std::optional<double> retry_after_s;
};

/// Canonical request text: method, url, sorted non-secret query params, body.
std::string canonical_request(const Request& r);
/// XXH64 hex of the canonical request; names the fixture file.
std::string request_key(const Request& r);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual Response send(const Request& r) = 0;
  /// True when no network I/O can happen.
  virtual bool offline() const { return false; }
};

/// Real network I/O through cpp-httplib.
class NetworkTransport : public Transport {
 public:
  explicit NetworkTransport(std::chrono::milliseconds timeout = std::chrono::seconds(60)) : timeout_(timeout) {}
  Response send(const Request& r) override;

 private:
  std::chrono::milliseconds timeout_;
};

// Fixture directory layout: <dir>/<request_key>.json holding
// {"request": <canonical request>, "status": int, "body": string}.
void write_fixture(const std::filesystem::path& dir, const Request& r, const Response& resp);
std::optional<Response> read_fixture(const std::filesystem::path& dir, const Request& r);

/// Serves responses only from a fixture directory; a miss is an error.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}
  Response send(const Request& r) override;
  bool offline() const override { return true; }

 private:
  std::filesystem::path dir_;
};

/// Disk cache in front of another transport. Successful responses are stored
/// in fixture layout, so a re-run is served offline.
class CachingTransport : public Transport {
 public:
  CachingTransport(std::filesystem::path dir, Transport& inner) : dir_(std::move(dir)), inner_(inner) {}
  Response send(const Request& r) override;

 private:
  std::filesystem::path dir_;
  Transport& inner_;
  std::mutex write_mutex_;
};

using SleepFn = std::function<void(double seconds)>;
SleepFn real_sleep();

/// Spaces requests at least `min_interval_s` apart across all callers.
class RateLimiter {
 public:
  explicit RateLimiter(double min_interval_s, SleepFn sleep = real_sleep())
      : interval_(min_interval_s), sleep_(std::move(sleep)) {}
  void acquire();

 private:
  double interval_;
  SleepFn sleep_;
  std::mutex mutex_;
  std::optional<std::chrono::steady_clock::time_point> next_;
};

struct RetryPolicy {
  int max_retries = 5;
  double base_delay_s = 1.0;
  double max_delay_s = 60.0;
  SleepFn sleep = real_sleep();
};

/// Sends with exponential backoff on 429 and 5xx. 401/403 raise
/// CredentialError; exhausted 429 retries raise RateLimitError.
Response send_with_retry(Transport& t, const Request& r, const RetryPolicy& policy, RateLimiter* limiter = nullptr);

}  // namespace newsrecon::http
