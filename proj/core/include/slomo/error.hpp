#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace slomo {

/// Broad failure categories. Each maps to a stable CLI exit code and an HTTP status.
enum class ErrorCode : std::uint8_t {
  kInternal,
  kValidation,
  kIo,
  kParse,
  kTruncation,
  kUnsupportedFormat,
  kEmptySequence,
  kMissingFrame,
  kDimensionMismatch,
  kBounds,
  kDegenerateInput,
  kConfiguration,
  kDecoder,
  kCapability,
  kProtocol,
  kContractViolation,
  kBackendUnavailable,
  kBackend,
  kNotFound,
  kConflict,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure at a byte offset in the input stream.
class ParseError : public Error {
 public:
  ParseError(std::uint64_t offset, const std::string& what);
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Input ended before a payload of known length was complete.
class TruncationError : public Error {
 public:
  TruncationError(std::uint64_t offset, std::uint64_t expected, std::uint64_t actual,
                  const std::string& what);
  std::uint64_t offset() const noexcept { return offset_; }
  std::uint64_t expected() const noexcept { return expected_; }
  std::uint64_t actual() const noexcept { return actual_; }

 private:
  std::uint64_t offset_;
  std::uint64_t expected_;
  std::uint64_t actual_;
};

class MissingFrameError : public Error {
 public:
  explicit MissingFrameError(std::uint32_t index);
  std::uint32_t index() const noexcept { return index_; }

 private:
  std::uint32_t index_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace slomo
