#include "flowfield/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace flowfield::log {
namespace {

Level parse_env() {
  const char* raw = std::getenv("FLOWFIELD_LOG");
  if (!raw) return Level::kWarn;
  if (std::strcmp(raw, "debug") == 0) return Level::kDebug;
  if (std::strcmp(raw, "info") == 0) return Level::kInfo;
  if (std::strcmp(raw, "warn") == 0) return Level::kWarn;
  if (std::strcmp(raw, "error") == 0) return Level::kError;
  if (std::strcmp(raw, "off") == 0) return Level::kOff;
  return Level::kWarn;
}

std::atomic<Level>& threshold_slot() {
  static std::atomic<Level> slot{parse_env()};
  return slot;
}

const char* name(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    case Level::kOff: return "off";
  }
  return "?";
}

}  // namespace

Level threshold() { return threshold_slot().load(std::memory_order_relaxed); }

void set_threshold(Level level) {
  threshold_slot().store(level, std::memory_order_relaxed);
}

void write(Level level, const std::string& msg) {
  if (level < threshold() || level == Level::kOff) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "[flowfield:%s] %s\n", name(level), msg.c_str());
}

}  // namespace flowfield::log
