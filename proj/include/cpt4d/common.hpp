// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace cpt4d {

// Error taxonomy. The CLI maps each code to a distinct exit status.
enum class ErrorCode {
  kConfig = 2,
  kMissingFile = 3,
  kGeometry = 4,
  kShape = 5,
  kDomain = 6,
  kTracking = 7,
  kDivergence = 8,
  kContract = 9,
  kIo = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }
  const char* code_name() const {
    switch (code_) {
      case ErrorCode::kConfig: return "config";
      case ErrorCode::kMissingFile: return "missing-file";
      case ErrorCode::kGeometry: return "geometry";
      case ErrorCode::kShape: return "shape";
      case ErrorCode::kDomain: return "domain";
      case ErrorCode::kTracking: return "tracking";
      case ErrorCode::kDivergence: return "divergence";
      case ErrorCode::kContract: return "contract";
      case ErrorCode::kIo: return "io";
    }
    return "unknown";
  }

 private:
  ErrorCode code_;
};

inline std::string strprintf(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  char buf[512];
  vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return std::string(buf);
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

// Shortest round-trip-safe decimal form for doubles; used by every text
// format so that identical runs produce identical bytes.
inline std::string format_g17(double v) {
  char buf[64];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_g9(double v) {
  char buf[48];
  snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace cpt4d
