#include "trafficuq/common/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace tuq {

void init_logging() {
    static bool done = false;
    if (done) {
        return;
    }
    done = true;
    auto logger = spdlog::stderr_color_mt("trafficuq");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("TRAFFICUQ_LOG")) {
        spdlog::set_level(spdlog::level::from_str(env));
    }
}

}  // namespace tuq
