#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfpe {

enum class ErrorCode {
  kInvalidArgument,
  kZeroOfSigma,
  kOutOfDomain,
  kNonConvergence,
  kSeriesDivergence,
  kIllConditioned,
  kStepUnderflow,
  kBlowup,
  kEmptyEnsemble,
  kGridTooCoarse,
  kInstability,
  kGridMismatch,
  kUnsupportedReference,
};

std::string_view to_string(ErrorCode code);

/// True for failures of a numerical procedure (as opposed to bad input).
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mfpe
