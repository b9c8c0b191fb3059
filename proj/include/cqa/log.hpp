#pragma once

#include <functional>
#include <string>

namespace cqa {

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink; pass nullptr to silence logging. The
// default sink writes warnings to stderr and drops info messages.
void set_log_sink(LogSink sink);
void log_message(LogLevel level, const std::string& message);

inline void log_warning(const std::string& message) { log_message(LogLevel::kWarning, message); }
inline void log_info(const std::string& message) { log_message(LogLevel::kInfo, message); }

}  // namespace cqa
