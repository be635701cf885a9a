#include "sthdg/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace sthdg {

namespace {

LogLevel from_env() {
  const char* v = std::getenv("STHDG_LOG");
  if (!v) return LogLevel::warn;
  const std::string s(v);
  if (s == "error" || s == "0") return LogLevel::error;
  if (s == "info" || s == "2") return LogLevel::info;
  if (s == "debug" || s == "3") return LogLevel::debug;
  return LogLevel::warn;
}

std::atomic<int>& level_storage() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

std::mutex log_mutex;

}  // namespace

LogLevel log_level() { return static_cast<LogLevel>(level_storage().load()); }

void set_log_level(LogLevel level) { level_storage().store(static_cast<int>(level)); }

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > level_storage().load()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "[sthdg:" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace sthdg
