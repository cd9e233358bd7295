#pragma once

#include <functional>
#include <string>

namespace compactml {

enum class LogLevel { info, warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink (stderr by default). Returns the old sink.
LogSink set_log_sink(LogSink sink);

void log_info(const std::string& msg);
void log_warning(const std::string& msg);

}  // namespace compactml
