#pragma once

#include <functional>
#include <string>

namespace mflow::log {

using Sink = std::function<void(const std::string&)>;

// Installs a warning sink and returns the previous one. The default sink
// writes to stderr.
Sink set_warning_sink(Sink sink);

void warn(const std::string& message);

}  // namespace mflow::log
