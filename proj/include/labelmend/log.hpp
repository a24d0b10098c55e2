#pragma once

#include <iostream>
#include <mutex>
#include <string_view>

namespace labelmend {

// All diagnostics go to stderr; files stay machine-readable.
inline void log_warn(std::string_view msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[warn] " << msg << "\n";
}

inline void log_info(std::string_view msg) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[info] " << msg << "\n";
}

}  // namespace labelmend
