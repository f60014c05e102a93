#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace graspalign::detail {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from GRASPALIGN_LOG in {error, info, debug}; default error.
LogLevel log_level();

inline bool log_enabled(LogLevel level) {
  return static_cast<int>(level) <= static_cast<int>(log_level());
}

void log_line(LogLevel level, const std::string& msg);

}  // namespace graspalign::detail

#define GA_LOG_INFO(msg)                                                  \
  do {                                                                    \
    if (::graspalign::detail::log_enabled(                               \
            ::graspalign::detail::LogLevel::kInfo)) {                    \
      std::ostringstream ga_oss_;                                        \
      ga_oss_ << msg;                                                    \
      ::graspalign::detail::log_line(                                    \
          ::graspalign::detail::LogLevel::kInfo, ga_oss_.str());         \
    }                                                                     \
  } while (0)

#define GA_LOG_DEBUG(msg)                                                 \
  do {                                                                    \
    if (::graspalign::detail::log_enabled(                               \
            ::graspalign::detail::LogLevel::kDebug)) {                   \
      std::ostringstream ga_oss_;                                        \
      ga_oss_ << msg;                                                    \
      ::graspalign::detail::log_line(                                    \
          ::graspalign::detail::LogLevel::kDebug, ga_oss_.str());        \
    }                                                                     \
  } while (0)
