#include "slomo/error.hpp"

namespace slomo {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInternal: return "internal";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kTruncation: return "truncation";
    case ErrorCode::kUnsupportedFormat: return "unsupported_format";
    case ErrorCode::kEmptySequence: return "empty_sequence";
    case ErrorCode::kMissingFrame: return "missing_frame";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kBounds: return "bounds";
    case ErrorCode::kDegenerateInput: return "degenerate_input";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kDecoder: return "decoder";
    case ErrorCode::kCapability: return "capability";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kContractViolation: return "contract_violation";
    case ErrorCode::kBackendUnavailable: return "backend_unavailable";
    case ErrorCode::kBackend: return "backend";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
  }
  return "unknown";
}

ParseError::ParseError(std::uint64_t offset, const std::string& what)
    : Error(ErrorCode::kParse, "at byte " + std::to_string(offset) + ": " + what),
      offset_(offset) {}

TruncationError::TruncationError(std::uint64_t offset, std::uint64_t expected,
                                 std::uint64_t actual, const std::string& what)
    : Error(ErrorCode::kTruncation,
            what + " truncated at byte " + std::to_string(offset) + ": expected " +
                std::to_string(expected) + " bytes, got " + std::to_string(actual)),
      offset_(offset),
      expected_(expected),
      actual_(actual) {}

MissingFrameError::MissingFrameError(std::uint32_t index)
    : Error(ErrorCode::kMissingFrame, "missing frame at index " + std::to_string(index)),
      index_(index) {}

}  // namespace slomo
