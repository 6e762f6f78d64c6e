#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "slomo/flow.hpp"
#include "slomo/frame.hpp"
#include "slomo/interp.hpp"

namespace slomo::interp {

enum class BackendKind : std::uint8_t { kClassical, kBlend, kExternal, kOracle };
enum class Capability : std::uint8_t { kMidpointOnly, kArbitraryT };

std::string_view backend_kind_name(BackendKind kind) noexcept;
std::string_view capability_name(Capability cap) noexcept;

struct BackendDescriptor {
  std::string name;
  BackendKind kind = BackendKind::kBlend;
  Capability capability = Capability::kArbitraryT;
  friend bool operator==(const BackendDescriptor&, const BackendDescriptor&) = default;
};

/// Wall-clock seconds spent per synthesis stage. Backends add to it.
struct StageTimes {
  double flow = 0.0;
  double warp = 0.0;
  double blend = 0.0;
  double io = 0.0;

  double total() const noexcept { return flow + warp + blend + io; }
  StageTimes& operator+=(const StageTimes& o) noexcept {
    flow += o.flow;
    warp += o.warp;
    blend += o.blend;
    io += o.io;
    return *this;
  }
};

/// Optional per-call extras. `reference` carries the ground-truth frame when
/// the caller has one (evaluation); only the oracle backend reads it.
struct InterpolationContext {
  const Frame* reference = nullptr;
  StageTimes* times = nullptr;
};

/// A frame interpolator. Implementations must be callable concurrently
/// unless documented otherwise.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendDescriptor& descriptor() const noexcept = 0;

 protected:
  friend Frame interpolate(Backend&, const Frame&, const Frame&, TimePoint, InterpolationContext);
  /// Called with validated inputs only.
  virtual Frame do_interpolate(const Frame& first, const Frame& second, TimePoint t,
                               InterpolationContext ctx) = 0;
};

/// Validates dimensions and capability, dispatches, and checks the result
/// size. Backend failures are rethrown with the backend name prefixed.
Frame interpolate(Backend& backend, const Frame& first, const Frame& second, TimePoint t,
                  InterpolationContext ctx = {});

class BlendBackend final : public Backend {
 public:
  explicit BlendBackend(std::string name = "blend");
  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }

 private:
  Frame do_interpolate(const Frame& first, const Frame& second, TimePoint t, InterpolationContext ctx) override;
  BackendDescriptor descriptor_;
};

struct ClassicalOptions {
  flow::FlowOptions flow;
  double visibility_sigma = kDefaultVisibilitySigma;
};

/// Block-matching flow, quadratic intermediate flow, consistency-based
/// visibility, weighted backward-warp blend.
class ClassicalBackend final : public Backend {
 public:
  explicit ClassicalBackend(ClassicalOptions options = {}, std::string name = "classical");
  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }
  const ClassicalOptions& options() const noexcept { return options_; }

 private:
  Frame do_interpolate(const Frame& first, const Frame& second, TimePoint t, InterpolationContext ctx) override;
  BackendDescriptor descriptor_;
  ClassicalOptions options_;
};

/// Returns the ground-truth frame supplied in the context. Upper bound for
/// every metric; fails with kCapability when no reference is available.
class OracleBackend final : public Backend {
 public:
  explicit OracleBackend(std::string name = "oracle");
  const BackendDescriptor& descriptor() const noexcept override { return descriptor_; }

 private:
  Frame do_interpolate(const Frame& first, const Frame& second, TimePoint t, InterpolationContext ctx) override;
  BackendDescriptor descriptor_;
};

struct BackendConfig {
  std::string name = "classical";
  /// Command template for the external kind.
  std::string command;
  std::size_t pool_size = 1;
  ClassicalOptions classical;
};

/// Builds "classical", "blend", "oracle" or "external" (needs `command`).
std::unique_ptr<Backend> make_backend(const BackendConfig& config);

/// Named set of live backends.
class BackendRegistry {
 public:
  /// classical, blend and oracle, plus the external backend when `external`
  /// has a command (spawned eagerly so its capability is known).
  static BackendRegistry with_builtins(const BackendConfig& external = {});

  void add(std::unique_ptr<Backend> backend);
  /// Throws kValidation for an unknown name.
  Backend& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<BackendDescriptor> descriptors() const;

 private:
  std::vector<std::unique_ptr<Backend>> backends_;
};

}  // namespace slomo::interp
