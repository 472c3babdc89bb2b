#include "newsrecon/log.hpp"

#include <iostream>
#include <mutex>

namespace newsrecon::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = [](Level level, std::string_view message) {
    if (level == Level::warning) std::cerr << "warning: " << message << '\n';
  };
  return sink;
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, message);
}

}  // namespace newsrecon::log
