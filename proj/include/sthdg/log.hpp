#pragma once

#include <string>

namespace sthdg {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Verbosity comes from STHDG_LOG (error|warn|info|debug or 0-3) unless set explicitly.
LogLevel log_level();
void set_log_level(LogLevel level);
void log_message(LogLevel level, const std::string& msg);

}  // namespace sthdg
