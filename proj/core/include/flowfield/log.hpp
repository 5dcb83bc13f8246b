#pragma once

#include <string>

namespace flowfield::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

// Current threshold. Initialized once from the FLOWFIELD_LOG environment
// variable (debug|info|warn|error|off); defaults to warn.
Level threshold();

// Overrides the environment-derived threshold (used by the CLI's --verbose).
void set_threshold(Level level);

// Writes "[flowfield:<level>] <msg>" to stderr if level >= threshold().
void write(Level level, const std::string& msg);

inline void debug(const std::string& msg) { write(Level::kDebug, msg); }
inline void info(const std::string& msg) { write(Level::kInfo, msg); }
inline void warn(const std::string& msg) { write(Level::kWarn, msg); }
inline void error(const std::string& msg) { write(Level::kError, msg); }

}  // namespace flowfield::log
