#include <doctest.h>

#include "slomo/error.hpp"

using namespace slomo;

TEST_SUITE("error") {
  TEST_CASE("code names are stable") {
    CHECK(error_code_name(ErrorCode::kValidation) == "validation");
    CHECK(error_code_name(ErrorCode::kTruncation) == "truncation");
    CHECK(error_code_name(ErrorCode::kBackendUnavailable) == "backend_unavailable");
    CHECK(error_code_name(ErrorCode::kContractViolation) == "contract_violation");
  }

  TEST_CASE("positional errors carry their offsets") {
    const ParseError p(17, "bad token");
    CHECK(p.code() == ErrorCode::kParse);
    CHECK(p.offset() == 17);
    CHECK(std::string(p.what()).find("17") != std::string::npos);

    const TruncationError t(9, 12, 5, "frame payload");
    CHECK(t.code() == ErrorCode::kTruncation);
    CHECK(t.expected() == 12);
    CHECK(t.actual() == 5);
    const std::string msg = t.what();
    CHECK(msg.find("12") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);

    const MissingFrameError m(2);
    CHECK(m.code() == ErrorCode::kMissingFrame);
    CHECK(m.index() == 2);
  }

  TEST_CASE("fail throws the requested code") {
    try {
      fail(ErrorCode::kBounds, "x");
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBounds);
    }
  }
}
