#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace handkit {

/// Failure categories raised by the library. Every public operation reports
/// failures by throwing handkit::Error carrying one of these codes.
enum class Errc {
  kInvalidArgument,
  kDegenerateRotation,
  kInvalidAsset,
  kParse,
  kBehindCamera,
  kDegenerateConfiguration,
  kDecomposition,
  kRankDeficiency,
  kEmptySupervision,
  kEvaluation,
  kInsufficientLandmarks,
  kInitialization,
  kInvalidConfig,
  kDegenerateLandmarks,
  kInvalidBox,
  kInvalidTarget,
  kZeroMass,
  kEmptyInput,
  kUndefinedMetric,
  kInsufficientFrames,
  kIo,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  [[nodiscard]] Errc code() const noexcept { return code_; }
  /// what() without the leading code name.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace handkit
