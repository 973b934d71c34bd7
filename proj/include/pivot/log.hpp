#pragma once

#include <functional>
#include <string>

namespace pivot::log {

using Sink = std::function<void(const std::string&)>;

// Replaces the warning sink and returns the previous one. The default sink
// writes "warning: <msg>" to stderr.
Sink set_warning_sink(Sink sink);

void warn(const std::string& message);

}  // namespace pivot::log
