#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace ofds {

// Shared stderr logger. Level comes from OFDS_LOG (trace, debug, info, warn,
// error, off); default is warn.
std::shared_ptr<spdlog::logger> logger();

}  // namespace ofds
