#include "slomo/external_backend.hpp"

#include <poll.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <utility>

#include "slomo/error.hpp"

namespace slomo::interp {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float v = 0;
  std::memcpy(&v, &bits, 4);
  return v;
}

void put_magic(std::vector<std::uint8_t>& out, const char (&magic)[4]) {
  out.insert(out.end(), magic, magic + 4);
}

bool magic_is(const std::uint8_t* p, const char (&magic)[4]) { return std::memcmp(p, magic, 4) == 0; }

std::string printable(const std::uint8_t* p, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    const char c = static_cast<char>(p[i]);
    if (c >= 0x20 && c < 0x7f) {
      s += c;
    } else {
      static const char* hex = "0123456789abcdef";
      s += "\\x";
      s += hex[p[i] >> 4];
      s += hex[p[i] & 15];
    }
  }
  return s;
}

std::size_t payload_size(std::uint32_t w, std::uint32_t h) { return static_cast<std::size_t>(w) * h * 3; }

[[noreturn]] void child_gone(Subprocess& child, const std::string& when) {
  child.close_stdin();
  const int status = child.wait_or_kill(200);
  fail(ErrorCode::kBackendUnavailable,
       "external process exited " + when + " (status " + std::to_string(status) + ")");
}

void read_or_fail(Subprocess& child, std::span<std::uint8_t> buf, int timeout_ms, std::uint64_t offset,
                  const char* what) {
  bool timed_out = false;
  const std::size_t got = child.read_exact(buf, timeout_ms, &timed_out);
  if (timed_out) {
    fail(ErrorCode::kBackendUnavailable,
         std::string("external process did not answer within ") + std::to_string(timeout_ms) + " ms");
  }
  if (got < buf.size()) {
    throw TruncationError(offset + got, buf.size(), got,
                          std::string("external process closed its output in the middle of the ") + what);
  }
}

bool fd_read_all(int fd, std::uint8_t* out, std::size_t n, std::size_t* got) {
  std::size_t done = 0;
  while (done < n) {
    const ssize_t r = ::read(fd, out + done, n - done);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) break;
    done += static_cast<std::size_t>(r);
  }
  if (got) *got = done;
  return done == n;
}

bool fd_write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::write(fd, p, n);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

namespace protocol {

std::vector<std::uint8_t> encode_handshake(Capability cap) {
  std::vector<std::uint8_t> out;
  put_magic(out, kHandshakeMagic);
  out.push_back(cap == Capability::kArbitraryT ? 1 : 0);
  return out;
}

std::vector<std::uint8_t> encode_request(const Frame& first, const Frame& second, float t) {
  require_same_size(first, second, "encode_request");
  std::vector<std::uint8_t> out;
  out.reserve(kRequestHeaderSize + first.sample_count() * 2);
  put_magic(out, kRequestMagic);
  put_u32(out, static_cast<std::uint32_t>(first.width()));
  put_u32(out, static_cast<std::uint32_t>(first.height()));
  put_f32(out, t);
  out.insert(out.end(), first.pixels().begin(), first.pixels().end());
  out.insert(out.end(), second.pixels().begin(), second.pixels().end());
  return out;
}

std::vector<std::uint8_t> encode_response(const Frame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(kResponseHeaderSize + frame.sample_count());
  put_magic(out, kResponseMagic);
  put_u32(out, static_cast<std::uint32_t>(frame.width()));
  put_u32(out, static_cast<std::uint32_t>(frame.height()));
  out.insert(out.end(), frame.pixels().begin(), frame.pixels().end());
  return out;
}

Capability decode_handshake(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHandshakeSize) {
    throw TruncationError(bytes.size(), kHandshakeSize, bytes.size(), "handshake too short");
  }
  if (!magic_is(bytes.data(), kHandshakeMagic)) {
    fail(ErrorCode::kProtocol, "protocol error in field 'handshake.magic': expected \"VFI1\", got \"" +
                                   printable(bytes.data(), 4) + "\"");
  }
  switch (bytes[4]) {
    case 0: return Capability::kMidpointOnly;
    case 1: return Capability::kArbitraryT;
    default:
      fail(ErrorCode::kProtocol,
           "protocol error in field 'handshake.capability': expected 0 or 1, got " + std::to_string(bytes[4]));
  }
}

RequestHeader decode_request_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kRequestHeaderSize) {
    throw TruncationError(bytes.size(), kRequestHeaderSize, bytes.size(), "request header too short");
  }
  if (!magic_is(bytes.data(), kRequestMagic)) {
    fail(ErrorCode::kProtocol, "protocol error in field 'request.magic': got \"" + printable(bytes.data(), 4) + "\"");
  }
  RequestHeader h{get_u32(bytes.data() + 4), get_u32(bytes.data() + 8), get_f32(bytes.data() + 12)};
  if (h.width == 0 || h.height == 0) fail(ErrorCode::kProtocol, "protocol error in field 'request.width/height': zero");
  if (!(h.t >= 0.0f && h.t <= 1.0f)) fail(ErrorCode::kProtocol, "protocol error in field 'request.t': out of [0, 1]");
  return h;
}

}  // namespace protocol

Capability read_handshake(Subprocess& child, int timeout_ms) {
  std::uint8_t buf[protocol::kHandshakeSize];
  bool timed_out = false;
  const std::size_t got = child.read_exact(buf, timeout_ms, &timed_out);
  if (timed_out) fail(ErrorCode::kBackendUnavailable, "external process sent no handshake");
  if (got == 0) child_gone(child, "before the handshake");
  if (got < sizeof buf) {
    throw TruncationError(got, sizeof buf, got, "external process closed its output inside the handshake");
  }
  return protocol::decode_handshake(buf);
}

Frame external_backend_call(Subprocess& child, const Frame& first, const Frame& second, TimePoint t,
                            int timeout_ms) {
  const auto request = protocol::encode_request(first, second, static_cast<float>(t.value()));
  if (!child.write_all(request)) child_gone(child, "while receiving a request");

  std::uint8_t header[protocol::kResponseHeaderSize];
  bool timed_out = false;
  const std::size_t got = child.read_exact(header, timeout_ms, &timed_out);
  if (timed_out) {
    fail(ErrorCode::kBackendUnavailable,
         "external process did not answer within " + std::to_string(timeout_ms) + " ms");
  }
  if (got == 0) child_gone(child, "before responding");
  if (got < sizeof header) {
    throw TruncationError(got, sizeof header, got, "external process closed its output in the response header");
  }
  if (!magic_is(header, protocol::kResponseMagic)) {
    fail(ErrorCode::kProtocol, "protocol error in field 'response.magic': expected \"RSP0\", got \"" +
                                   printable(header, 4) + "\"");
  }
  const std::uint32_t w = get_u32(header + 4);
  const std::uint32_t h = get_u32(header + 8);
  if (w != static_cast<std::uint32_t>(first.width()) || h != static_cast<std::uint32_t>(first.height())) {
    fail(ErrorCode::kContractViolation, "response is " + std::to_string(w) + "x" + std::to_string(h) +
                                            ", request was " + std::to_string(first.width()) + "x" +
                                            std::to_string(first.height()));
  }
  std::vector<std::uint8_t> pixels(payload_size(w, h));
  read_or_fail(child, pixels, timeout_ms, sizeof header, "response payload");

  // Anything already waiting past the declared payload means the child wrote
  // a longer frame than it announced.
  pollfd pfd{child.stdout_fd(), POLLIN, 0};
  if (::poll(&pfd, 1, 0) > 0 && (pfd.revents & POLLIN)) {
    std::uint8_t extra = 0;
    if (::read(child.stdout_fd(), &extra, 1) == 1) {
      fail(ErrorCode::kContractViolation, "response payload is longer than " + std::to_string(pixels.size()) +
                                              " bytes announced for " + std::to_string(w) + "x" +
                                              std::to_string(h));
    }
  }
  return Frame(static_cast<int>(w), static_cast<int>(h), std::move(pixels));
}

int serve_external_protocol(int in_fd, int out_fd, Capability cap, const ChildHandler& handler) {
  const auto hs = protocol::encode_handshake(cap);
  if (!fd_write_all(out_fd, hs.data(), hs.size())) return 1;
  for (;;) {
    std::uint8_t header[protocol::kRequestHeaderSize];
    std::size_t got = 0;
    if (!fd_read_all(in_fd, header, sizeof header, &got)) return got == 0 ? 0 : 2;
    protocol::RequestHeader req;
    try {
      req = protocol::decode_request_header(header);
    } catch (const Error&) {
      return 2;
    }
    const std::size_t n = payload_size(req.width, req.height);
    std::vector<std::uint8_t> a(n), b(n);
    if (!fd_read_all(in_fd, a.data(), n, nullptr) || !fd_read_all(in_fd, b.data(), n, nullptr)) return 2;
    const int w = static_cast<int>(req.width);
    const int h = static_cast<int>(req.height);
    const Frame result = handler(Frame(w, h, std::move(a)), Frame(w, h, std::move(b)), req.t);
    const auto rsp = protocol::encode_response(result);
    if (!fd_write_all(out_fd, rsp.data(), rsp.size())) return 1;
  }
}

ExternalBackend::ExternalBackend(std::string command, std::size_t pool_size, std::string name, int timeout_ms)
    : descriptor_{std::move(name), BackendKind::kExternal, Capability::kArbitraryT},
      argv_(split_command(command)),
      pool_size_(pool_size == 0 ? 1 : pool_size),
      timeout_ms_(timeout_ms) {
  if (argv_.empty()) fail(ErrorCode::kConfiguration, "external backend command is empty");
  auto child = start_child();
  std::lock_guard lock(mutex_);
  idle_.push_back(std::move(child));
  live_ = 1;
}

ExternalBackend::~ExternalBackend() {
  std::lock_guard lock(mutex_);
  for (auto& c : idle_) {
    c->close_stdin();
    c->wait_or_kill(500);
  }
}

std::unique_ptr<Subprocess> ExternalBackend::start_child() {
  auto child = std::make_unique<Subprocess>(Subprocess::spawn(argv_, Subprocess::Stderr::kInherit));
  const Capability cap = read_handshake(*child, timeout_ms_);
  std::lock_guard lock(mutex_);
  if (live_ == 0 && idle_.empty()) {
    descriptor_.capability = cap;
  } else if (cap != descriptor_.capability) {
    fail(ErrorCode::kProtocol, "protocol error in field 'handshake.capability': child declared " +
                                   std::string(capability_name(cap)) + ", pool uses " +
                                   std::string(capability_name(descriptor_.capability)));
  }
  return child;
}

std::unique_ptr<Subprocess> ExternalBackend::acquire() {
  {
    std::unique_lock lock(mutex_);
    available_.wait(lock, [&] { return !idle_.empty() || live_ < pool_size_; });
    if (!idle_.empty()) {
      auto child = std::move(idle_.back());
      idle_.pop_back();
      return child;
    }
    ++live_;
  }
  try {
    return start_child();
  } catch (...) {
    std::lock_guard lock(mutex_);
    --live_;
    available_.notify_one();
    throw;
  }
}

void ExternalBackend::release(std::unique_ptr<Subprocess> child) {
  std::lock_guard lock(mutex_);
  if (child) {
    idle_.push_back(std::move(child));
  } else {
    --live_;
  }
  available_.notify_one();
}

Frame ExternalBackend::do_interpolate(const Frame& first, const Frame& second, TimePoint t, InterpolationContext ctx) {
  auto child = acquire();
  const auto start = std::chrono::steady_clock::now();
  try {
    Frame out = external_backend_call(*child, first, second, t, timeout_ms_);
    if (ctx.times) ctx.times->io += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    release(std::move(child));
    return out;
  } catch (...) {
    child->kill();
    release(nullptr);
    throw;
  }
}

}  // namespace slomo::interp
