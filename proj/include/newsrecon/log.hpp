#pragma once

#include <functional>
#include <string_view>

namespace newsrecon::log {

enum class Level { debug, info, warning };

using Sink = std::function<void(Level, std::string_view)>;

/// Replaces the process-wide sink; returns the previous one. The default sink
/// writes warnings to stderr and drops everything else.
Sink set_sink(Sink sink);

void write(Level level, std::string_view message);

inline void warn(std::string_view message) { write(Level::warning, message); }
inline void info(std::string_view message) { write(Level::info, message); }

/// RAII capture used by tests and the CLI's --quiet mode.
class ScopedSink {
 public:
  explicit ScopedSink(Sink sink) : previous_(set_sink(std::move(sink))) {}
  ~ScopedSink() { set_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace newsrecon::log
