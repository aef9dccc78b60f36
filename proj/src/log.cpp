#include "sedvice/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>

namespace sedvice {

spdlog::logger& logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto l = spdlog::stderr_color_mt("sedvice");
        l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
        const char* env = std::getenv("SEDVICE_LOG");
        l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
        return l;
    }();
    return *instance;
}

} // namespace sedvice
