#pragma once

#include <mutex>

namespace qdon::detail {

// FFTW planner calls are not thread-safe; executing a plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace qdon::detail
