#include "handkit/error.hpp"

namespace handkit {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidArgument: return "invalid-argument";
    case Errc::kDegenerateRotation: return "degenerate-rotation";
    case Errc::kInvalidAsset: return "invalid-asset";
    case Errc::kParse: return "parse";
    case Errc::kBehindCamera: return "behind-camera";
    case Errc::kDegenerateConfiguration: return "degenerate-configuration";
    case Errc::kDecomposition: return "decomposition";
    case Errc::kRankDeficiency: return "rank-deficiency";
    case Errc::kEmptySupervision: return "empty-supervision";
    case Errc::kEvaluation: return "evaluation";
    case Errc::kInsufficientLandmarks: return "insufficient-landmarks";
    case Errc::kInitialization: return "initialization";
    case Errc::kInvalidConfig: return "invalid-config";
    case Errc::kDegenerateLandmarks: return "degenerate-landmarks";
    case Errc::kInvalidBox: return "invalid-box";
    case Errc::kInvalidTarget: return "invalid-target";
    case Errc::kZeroMass: return "zero-mass";
    case Errc::kEmptyInput: return "empty-input";
    case Errc::kUndefinedMetric: return "undefined-metric";
    case Errc::kInsufficientFrames: return "insufficient-frames";
    case Errc::kIo: return "io";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), message_(message) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace handkit
