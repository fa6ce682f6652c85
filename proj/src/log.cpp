#include "rankforge/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace rankforge {

void init_logging() {
    static const bool initialized = [] {
        auto logger = spdlog::stderr_color_mt("rankforge");
        spdlog::set_default_logger(logger);
        spdlog::set_pattern("[%l] %v");
        spdlog::level::level_enum level = spdlog::level::warn;
        if (const char* env = std::getenv("RANKFORGE_LOG")) {
            const std::string_view v(env);
            if (v == "error") level = spdlog::level::err;
            else if (v == "info") level = spdlog::level::info;
            else if (v == "debug") level = spdlog::level::debug;
        }
        spdlog::set_level(level);
        return true;
    }();
    (void)initialized;
}

}  // namespace rankforge
