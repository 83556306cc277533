#pragma once

#include <functional>
#include <string>

namespace mrsim {

using WarningSink = std::function<void(const std::string&)>;

// Default sink prints to stderr. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& msg);

}  // namespace mrsim
