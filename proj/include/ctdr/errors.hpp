#pragma once

#include <stdexcept>
#include <string>

namespace ctdr {

// Stable numeric codes. The CLI prints errors as "CTDR-E<code>: <message>"
// and maps config -> exit 2, everything else -> exit 3.
enum class ErrorCode : int {
  config = 2,
  scenario = 3,
  invariant = 10,
  domain = 11,
  input = 12,
  positivity = 13,
  fitting = 14,
  solver = 15,
};

class CtdrError : public std::runtime_error {
 public:
  CtdrError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }
  int code_int() const noexcept { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw CtdrError(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace ctdr
