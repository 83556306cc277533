#include "mrsim/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace mrsim {

namespace {
std::mutex sink_mutex;
WarningSink& sink() {
    static WarningSink s = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return s;
}
}  // namespace

WarningSink set_warning_sink(WarningSink s) {
    std::lock_guard lock(sink_mutex);
    return std::exchange(sink(), std::move(s));
}

void warn(const std::string& msg) {
    std::lock_guard lock(sink_mutex);
    if (sink()) sink()(msg);
}

}  // namespace mrsim
