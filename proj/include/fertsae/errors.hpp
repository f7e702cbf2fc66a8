#pragma once

#include <stdexcept>
#include <string>

namespace fertsae {

enum class ErrorCode {
  io = 1,
  schema = 2,
  invalid_argument = 3,
  dangling_key = 4,
  graph = 5,
  no_data = 6,
  numeric = 7,
  convergence = 8,
  infeasible = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace fertsae
