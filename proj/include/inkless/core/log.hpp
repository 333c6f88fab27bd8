#pragma once

#include <string>

// Thin logging facade. Translation units that include torch headers cannot include spdlog
// directly because torch ships an incompatible fmt, so they log through these functions.
namespace inkless::log {

void debug(const std::string& message);
void info(const std::string& message);
void warn(const std::string& message);
void error(const std::string& message);

// Accepts trace, debug, info, warn, error, off.
void set_level(const std::string& level);

}  // namespace inkless::log
