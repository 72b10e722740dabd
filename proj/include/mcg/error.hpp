#pragma once

#include <stdexcept>
#include <string>

namespace mcg {

enum class ErrorCode {
  DimensionMismatch,
  NotPositiveSemidefinite,
  RankDeficient,
  Singular,
  InvalidArgument,
  OffManifold,
  OutsideChart,
  NonFinite,
};

/// Exception type thrown by every operation in the library. The code is what
/// the C API reports; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mcg
