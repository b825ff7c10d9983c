#pragma once

#include <functional>
#include <string_view>

namespace mainstreamlab {

using WarningHandler = std::function<void(std::string_view)>;

// Non-fatal conditions (truncated horizons, skipped users, ...) go through
// here. The default handler prints to stderr.
void warn(std::string_view message);

// Installs a handler and returns the previous one. Passing an empty handler
// restores the default.
WarningHandler set_warning_handler(WarningHandler handler);

}  // namespace mainstreamlab
