// Reference child for the external-backend pipe protocol. Well-behaved
// modes answer every request; the others break the protocol on purpose so
// the parent's error handling can be exercised.
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "slomo/external_backend.hpp"

namespace {

using slomo::Frame;
using slomo::interp::Capability;
namespace protocol = slomo::interp::protocol;

bool write_all(const std::vector<std::uint8_t>& bytes, std::size_t limit = SIZE_MAX) {
  const std::size_t n = std::min(bytes.size(), limit);
  std::size_t done = 0;
  while (done < n) {
    const ssize_t r = ::write(STDOUT_FILENO, bytes.data() + done, n - done);
    if (r <= 0) return false;
    done += static_cast<std::size_t>(r);
  }
  return true;
}

bool read_all(std::uint8_t* out, std::size_t n) {
  std::size_t done = 0;
  while (done < n) {
    const ssize_t r = ::read(STDIN_FILENO, out + done, n - done);
    if (r <= 0) return false;
    done += static_cast<std::size_t>(r);
  }
  return true;
}

// Reads one request; returns false at EOF.
bool read_request(Frame& first, Frame& second, float& t) {
  std::uint8_t header[protocol::kRequestHeaderSize];
  if (!read_all(header, sizeof header)) return false;
  const auto h = protocol::decode_request_header(header);
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
  std::vector<std::uint8_t> a(n), b(n);
  if (!read_all(a.data(), n) || !read_all(b.data(), n)) return false;
  first = Frame(static_cast<int>(h.width), static_cast<int>(h.height), std::move(a));
  second = Frame(static_cast<int>(h.width), static_cast<int>(h.height), std::move(b));
  t = h.t;
  return true;
}

Frame blend(const Frame& a, const Frame& b, float t) {
  Frame out(a.width(), a.height());
  auto px = out.mutable_pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround((1.0 - t) * a.pixels()[i] + t * b.pixels()[i]));
  }
  return out;
}

int usage() {
  std::cerr << "usage: vfi_loopback [--mode MODE] [--fail-after N]\n"
               "modes: echo blend midpoint wrong-dims long-payload truncate bad-magic\n"
               "       bad-handshake crash silent-exit stall\n";
  return 64;
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode = "echo";
  long fail_after = -1;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--mode" && i + 1 < argc) {
      mode = argv[++i];
    } else if (arg == "--fail-after" && i + 1 < argc) {
      fail_after = std::strtol(argv[++i], nullptr, 10);
    } else {
      return usage();
    }
  }

  if (mode == "silent-exit") return 0;
  if (mode == "bad-handshake") {
    write_all({'V', 'F', 'I', 'X', 1});
    return 0;
  }
  const Capability cap = mode == "midpoint" ? Capability::kMidpointOnly : Capability::kArbitraryT;
  if (!write_all(protocol::encode_handshake(cap))) return 1;

  long served = 0;
  Frame first, second;
  float t = 0.5f;
  try {
    while (read_request(first, second, t)) {
      if (fail_after >= 0 && served >= fail_after) return 3;
      ++served;
      if (mode == "echo") {
        write_all(protocol::encode_response(first));
      } else if (mode == "blend" || mode == "midpoint") {
        write_all(protocol::encode_response(blend(first, second, t)));
      } else if (mode == "wrong-dims") {
        write_all(protocol::encode_response(Frame(first.width() + 1, first.height())));
      } else if (mode == "long-payload") {
        auto bytes = protocol::encode_response(first);
        bytes.insert(bytes.end(), {0, 0, 0});
        write_all(bytes);
      } else if (mode == "truncate") {
        const auto bytes = protocol::encode_response(first);
        write_all(bytes, protocol::kResponseHeaderSize + first.sample_count() / 2);
        return 0;
      } else if (mode == "bad-magic") {
        auto bytes = protocol::encode_response(first);
        std::memcpy(bytes.data(), "RSPX", 4);
        write_all(bytes);
      } else if (mode == "stall") {
        ::pause();
      } else if (mode == "crash") {
        std::abort();
      } else {
        return usage();
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "vfi_loopback: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
