#pragma once

#include <spdlog/spdlog.h>

namespace tuq {

/// Applies the level named by TRAFFICUQ_LOG (trace, debug, info, warn, error, off).
/// Defaults to warn so that test and CLI output stay quiet.
void init_logging();

}  // namespace tuq
