#include "inkless/core/log.hpp"

#include <spdlog/spdlog.h>

#include "inkless/core/error.hpp"

namespace inkless::log {

void debug(const std::string& message) { spdlog::debug(message); }
void info(const std::string& message) { spdlog::info(message); }
void warn(const std::string& message) { spdlog::warn(message); }
void error(const std::string& message) { spdlog::error(message); }

void set_level(const std::string& level) {
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") throw ConfigError("unknown log level: " + level);
  spdlog::set_level(parsed);
}

}  // namespace inkless::log
