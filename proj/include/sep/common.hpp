#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sep {

using Index = std::int64_t;

// Error taxonomy shared by the library and the CLI exit-code contract:
// validation errors (bad arguments, malformed inputs) vs numerical failures
// (non-convergence, divergent series, horizon monitors).
enum class ErrorCode {
  kValidation,
  kNumerical,
  kNonConvergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, const std::string& msg,
                    ErrorCode code = ErrorCode::kValidation) {
  if (!cond) throw Error(code, msg);
}

}  // namespace sep
