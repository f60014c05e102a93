#include <graspalign/detail/log.hpp>

#include <cstdlib>

namespace graspalign::detail {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("GRASPALIGN_LOG");
    if (env == nullptr) {
      return LogLevel::kError;
    }
    const std::string v(env);
    if (v == "debug") {
      return LogLevel::kDebug;
    }
    if (v == "info") {
      return LogLevel::kInfo;
    }
    return LogLevel::kError;
  }();
  return level;
}

void log_line(LogLevel level, const std::string& msg) {
  const char* tag = level == LogLevel::kDebug  ? "debug"
                    : level == LogLevel::kInfo ? "info"
                                               : "error";
  std::cerr << "[graspalign:" << tag << "] " << msg << "\n";
}

}  // namespace graspalign::detail
