#pragma once
// Library-wide logger. Level comes from SEDVICE_LOG (trace..off), default warn.

#include <spdlog/spdlog.h>

namespace sedvice {

spdlog::logger& logger();

} // namespace sedvice
