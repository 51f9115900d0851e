#include "ofds/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_sinks.h>

namespace ofds {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_logger_mt("ofds");
    l->set_pattern("ofds: %l: %v");
    l->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("OFDS_LOG")) {
      l->set_level(spdlog::level::from_str(env));
    }
    return l;
  }();
  return instance;
}

}  // namespace ofds
