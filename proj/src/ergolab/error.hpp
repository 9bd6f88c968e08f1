#pragma once

#include <stdexcept>
#include <string>

namespace ergolab {

// Values mirror the ERGOLAB_E_* codes of the C API.
enum class ErrorCode : int {
  invalid_argument = 1,
  domain = 2,
  one_sided_limit = 3,
  parse = 4,
  not_covered = 5,
  singular_hit = 6,
  io = 7,
  order_mismatch = 8,
  internal = 99,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace ergolab
