#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "slomo/backend.hpp"
#include "slomo/subprocess.hpp"

namespace slomo::interp {

// Pipe protocol between the toolkit and an external interpolator process.
// All integers little-endian; one request in flight per connection.
//
//   child -> parent (once):  "VFI1" u8 capability (0 = midpoint-only, 1 = arbitrary t)
//   parent -> child:         "REQ0" u32 width u32 height f32 t  RGB24 first  RGB24 second
//   child -> parent:         "RSP0" u32 width u32 height RGB24 frame
namespace protocol {

inline constexpr char kHandshakeMagic[4] = {'V', 'F', 'I', '1'};
inline constexpr char kRequestMagic[4] = {'R', 'E', 'Q', '0'};
inline constexpr char kResponseMagic[4] = {'R', 'S', 'P', '0'};
inline constexpr std::size_t kHandshakeSize = 5;
inline constexpr std::size_t kRequestHeaderSize = 16;
inline constexpr std::size_t kResponseHeaderSize = 12;

std::vector<std::uint8_t> encode_handshake(Capability cap);
std::vector<std::uint8_t> encode_request(const Frame& first, const Frame& second, float t);
std::vector<std::uint8_t> encode_response(const Frame& frame);

/// Parses a handshake; throws kProtocol naming the offending field.
Capability decode_handshake(std::span<const std::uint8_t> bytes);

struct RequestHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  float t = 0.5f;
};
RequestHeader decode_request_header(std::span<const std::uint8_t> bytes);

}  // namespace protocol

inline constexpr int kDefaultExternalTimeoutMs = 120000;

/// Reads the handshake from a freshly started child.
Capability read_handshake(Subprocess& child, int timeout_ms = kDefaultExternalTimeoutMs);

/// Sends one request and reads exactly one response frame.
/// Errors: kProtocol (bad magic), kContractViolation (response size differs
/// from the request), kTruncation (pipe closed mid-frame),
/// kBackendUnavailable (child gone before answering, or timeout).
Frame external_backend_call(Subprocess& child, const Frame& first, const Frame& second, TimePoint t,
                            int timeout_ms = kDefaultExternalTimeoutMs);

/// Runs the child side of the protocol on the given descriptors until the
/// parent closes its end. Returns 0 on clean EOF, nonzero on a protocol error.
using ChildHandler = std::function<Frame(const Frame& first, const Frame& second, float t)>;
int serve_external_protocol(int in_fd, int out_fd, Capability cap, const ChildHandler& handler);

/// Backend backed by a pool of child processes started from a command
/// template. Each child serves one request at a time; up to `pool_size`
/// children run concurrently. A child that fails a request is discarded.
class ExternalBackend final : public Backend {
 public:
  /// Starts one child and completes its handshake. Throws kConfiguration if
  /// the command cannot be started.
  ExternalBackend(std::string command, std::size_t pool_size = 1, std::string name = "external",
                  int timeout_ms = kDefaultExternalTimeoutMs);
  ~ExternalBackend() override;

  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }

 private:
  Frame do_interpolate(const Frame& first, const Frame& second, TimePoint t, InterpolationContext ctx) override;
  std::unique_ptr<Subprocess> start_child();
  std::unique_ptr<Subprocess> acquire();
  void release(std::unique_ptr<Subprocess> child);

  BackendDescriptor descriptor_;
  std::vector<std::string> argv_;
  std::size_t pool_size_;
  int timeout_ms_;

  std::mutex mutex_;
  std::condition_variable available_;
  std::vector<std::unique_ptr<Subprocess>> idle_;
  std::size_t live_ = 0;
};

}  // namespace slomo::interp
