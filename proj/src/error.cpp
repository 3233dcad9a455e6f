#include "l0qsvm/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace l0qsvm {

namespace {
std::atomic<bool> g_warnings_enabled{true};
std::mutex g_warn_mutex;
}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidData: return "invalid-data";
    case ErrorKind::kInvalidLabel: return "invalid-label";
    case ErrorKind::kNumeric: return "numeric-error";
    case ErrorKind::kConvergence: return "convergence-failure";
    case ErrorKind::kVersion: return "version-error";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kConfig: return "config-error";
    case ErrorKind::kStratification: return "stratification-error";
    case ErrorKind::kSearchFailure: return "search-failure";
    case ErrorKind::kDimension: return "dimension-error";
  }
  return "unknown-error";
}

void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

void warn(std::string_view message) {
  if (!g_warnings_enabled.load(std::memory_order_relaxed)) return;
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) {
  g_warnings_enabled.store(enabled, std::memory_order_relaxed);
}

}  // namespace l0qsvm
