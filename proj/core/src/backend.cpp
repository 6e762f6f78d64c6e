#include "slomo/backend.hpp"

#include <chrono>
#include <string>
#include <utility>

#include "slomo/error.hpp"
#include "slomo/external_backend.hpp"

namespace slomo::interp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void add_time(InterpolationContext ctx, double StageTimes::*field, Clock::time_point start) {
  if (ctx.times) ctx.times->*field += seconds_since(start);
}

}  // namespace

std::string_view backend_kind_name(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::kClassical: return "classical";
    case BackendKind::kBlend: return "blend";
    case BackendKind::kExternal: return "external";
    case BackendKind::kOracle: return "oracle";
  }
  return "unknown";
}

std::string_view capability_name(Capability cap) noexcept {
  return cap == Capability::kMidpointOnly ? "midpoint-only" : "arbitrary-t";
}

Frame interpolate(Backend& backend, const Frame& first, const Frame& second, TimePoint t,
                  InterpolationContext ctx) {
  const auto& desc = backend.descriptor();
  if (first.empty() || second.empty()) fail(ErrorCode::kValidation, desc.name + ": empty input frame");
  require_same_size(first, second, "interpolate");
  if (desc.capability == Capability::kMidpointOnly && t.value() != 0.5) {
    fail(ErrorCode::kCapability,
         desc.name + ": backend is midpoint-only, cannot synthesize t=" + std::to_string(t.value()));
  }
  Frame out;
  try {
    out = backend.do_interpolate(first, second, t, ctx);
  } catch (const TruncationError& e) {
    throw TruncationError(e.offset(), e.expected(), e.actual(), desc.name + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.code(), desc.name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kBackend, desc.name + ": " + e.what());
  }
  if (!out.same_size(first)) {
    fail(ErrorCode::kContractViolation, desc.name + ": backend returned a " + std::to_string(out.width()) + "x" +
                                            std::to_string(out.height()) + " frame for " +
                                            std::to_string(first.width()) + "x" + std::to_string(first.height()) +
                                            " input");
  }
  return out;
}

BlendBackend::BlendBackend(std::string name)
    : descriptor_{std::move(name), BackendKind::kBlend, Capability::kArbitraryT} {}

Frame BlendBackend::do_interpolate(const Frame& first, const Frame& second, TimePoint t, InterpolationContext ctx) {
  const auto start = Clock::now();
  Frame out = blend_frames(first, second, t);
  add_time(ctx, &StageTimes::blend, start);
  return out;
}

ClassicalBackend::ClassicalBackend(ClassicalOptions options, std::string name)
    : descriptor_{std::move(name), BackendKind::kClassical, Capability::kArbitraryT}, options_(options) {
  if (!(options_.visibility_sigma > 0.0)) fail(ErrorCode::kConfiguration, "visibility sigma must be > 0");
}

Frame ClassicalBackend::do_interpolate(const Frame& first, const Frame& second, TimePoint t,
                                       InterpolationContext ctx) {
  auto start = Clock::now();
  const flow::FlowField f01 = flow::estimate_flow(first, second, options_.flow);
  const flow::FlowField f10 = flow::estimate_flow(second, first, options_.flow);
  const IntermediateFlows mid = approximate_intermediate_flow(f01, f10, t);
  const VisibilityPair vis = visibility_from_consistency(f01, f10, options_.visibility_sigma);
  add_time(ctx, &StageTimes::flow, start);

  start = Clock::now();
  const RealImage w0 = backward_warp_real(first, mid.to_first);
  const RealImage w1 = backward_warp_real(second, mid.to_second);
  add_time(ctx, &StageTimes::warp, start);

  start = Clock::now();
  Frame out = blend_warped(w0, w1, t, vis.first, vis.second);
  add_time(ctx, &StageTimes::blend, start);
  return out;
}

OracleBackend::OracleBackend(std::string name)
    : descriptor_{std::move(name), BackendKind::kOracle, Capability::kArbitraryT} {}

Frame OracleBackend::do_interpolate(const Frame& first, const Frame&, TimePoint, InterpolationContext ctx) {
  if (!ctx.reference) fail(ErrorCode::kCapability, "no ground-truth frame available");
  require_same_size(first, *ctx.reference, "oracle");
  Frame out = *ctx.reference;
  out.attach_yuv_source(nullptr);
  return out;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  if (config.name == "classical") return std::make_unique<ClassicalBackend>(config.classical);
  if (config.name == "blend") return std::make_unique<BlendBackend>();
  if (config.name == "oracle") return std::make_unique<OracleBackend>();
  if (config.name == "external") {
    if (config.command.empty()) {
      fail(ErrorCode::kConfiguration, "external backend needs a command template (--backend-cmd)");
    }
    return std::make_unique<ExternalBackend>(config.command, config.pool_size);
  }
  fail(ErrorCode::kValidation, "unknown backend '" + config.name + "' (expected classical, blend, oracle, external)");
}

BackendRegistry BackendRegistry::with_builtins(const BackendConfig& external) {
  BackendRegistry reg;
  reg.add(std::make_unique<ClassicalBackend>(external.classical));
  reg.add(std::make_unique<BlendBackend>());
  reg.add(std::make_unique<OracleBackend>());
  if (!external.command.empty()) {
    reg.add(std::make_unique<ExternalBackend>(external.command, external.pool_size));
  }
  return reg;
}

void BackendRegistry::add(std::unique_ptr<Backend> backend) {
  if (contains(backend->descriptor().name)) {
    fail(ErrorCode::kConfiguration, "duplicate backend name '" + backend->descriptor().name + "'");
  }
  backends_.push_back(std::move(backend));
}

Backend& BackendRegistry::get(std::string_view name) const {
  for (const auto& b : backends_) {
    if (b->descriptor().name == name) return *b;
  }
  std::string known;
  for (const auto& b : backends_) known += (known.empty() ? "" : ", ") + b->descriptor().name;
  fail(ErrorCode::kValidation, "unknown backend '" + std::string(name) + "' (available: " + known + ")");
}

bool BackendRegistry::contains(std::string_view name) const {
  for (const auto& b : backends_) {
    if (b->descriptor().name == name) return true;
  }
  return false;
}

std::vector<BackendDescriptor> BackendRegistry::descriptors() const {
  std::vector<BackendDescriptor> out;
  out.reserve(backends_.size());
  for (const auto& b : backends_) out.push_back(b->descriptor());
  return out;
}

}  // namespace slomo::interp
