#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pilotwave/rng.hpp"
#include "pilotwave/states.hpp"

namespace pilotwave {

/// Densities at or below this value count as a node of the guiding wave.
inline constexpr double kDensityFloor = 1e-300;

/// Active Weyl component of a zig-zag beable: zig follows Psi_L, zag follows Psi_R.
enum class Branch { zig, zag };

constexpr Branch flipped(Branch b) { return b == Branch::zig ? Branch::zag : Branch::zig; }
const char* to_string(Branch b);

/// Guidance is undefined because the density vanished.
class NodeError : public std::runtime_error {
 public:
  NodeError(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

/// +psi^dagger sigma psi / psi^dagger psi for R, minus that for L. Always unit length.
/// Throws NodeError("velocity undefined at node") at zero density.
Vec3 weyl_velocity(const WeylSpinor& psi, Handedness chi);

/// (Psi_R^dagger sigma Psi_R - Psi_L^dagger sigma Psi_L) / (Psi_L^dagger Psi_L + Psi_R^dagger Psi_R).
Vec3 dirac_velocity(const WeylSpinor& psi_left, const WeylSpinor& psi_right);

/// Branch-flip rate of a zig-zag beable at one point, position-diagonal mass coupling:
///   zag -> zig: 2m [Im(Psi_L^dagger Psi_R)]^+ / Psi_R^dagger Psi_R
///   zig -> zag: 2m [Im(Psi_R^dagger Psi_L)]^+ / Psi_L^dagger Psi_L
/// Throws NodeError when the density of `from` vanishes.
double zigzag_jump_rate(const DiracSpinor& psi, double m, Branch from);
double zigzag_jump_rate(const ZigzagPoint& point, double m, Branch from);
/// Uses ZigzagState::evaluate, so a momentum eigenstate gives exactly 0.
double zigzag_jump_rate(const ZigzagState& state, double t, const Vec3& x, Branch from);

struct TrajectorySample {
  double t;
  Vec3 x;
  std::optional<Branch> branch;
  double speed;
};

struct TrajectoryMeta {
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::string scenario;
  std::vector<std::string> warnings;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  TrajectoryMeta meta;
};

struct JumpEvent {
  double t;
  Vec3 x;
  Branch from;
  Branch to;
};

using VelocityField = std::function<Vec3(double t, const Vec3& x)>;

/// Velocity of the Weyl beable guided by `wf`.
VelocityField weyl_guidance(const WeylWavefunction& wf);
/// Conventional deterministic Dirac velocity of a zig-zag state.
VelocityField dirac_guidance(const ZigzagState& state);

/// Classical RK4 from t0 to t1 with fixed step dt (last step shortened). Records every step.
/// Throws std::invalid_argument for t1 <= t0 or dt <= 0 and NodeError when a node is met.
Trajectory integrate_deterministic(const VelocityField& field, const Vec3& x0, double t0, double t1,
                                   double dt);

/// Endpoint of the same integration without storing samples.
Vec3 advance_deterministic(const VelocityField& field, const Vec3& x0, double t0, double t1,
                           double dt);

/// Velocity and outgoing jump rate of a two-branch beable.
struct FlowPoint {
  Vec3 velocity;
  double rate;
};

using BranchFlow = std::function<FlowPoint(double t, const Vec3& x, Branch b)>;

/// Zig-zag flow: velocity from Psi_L (zig) or Psi_R (zag) and the matching flip rate.
BranchFlow zigzag_flow(const ZigzagState& state);

struct ZigzagRun {
  Trajectory trajectory;
  std::vector<JumpEvent> jumps;
};

/// Piecewise-deterministic jump process.
///
/// Between jumps the position follows RK4 on the active branch velocity. The integrated hazard
/// int rate dt is accumulated with the trapezoid rule per step; a jump fires when it reaches an
/// Exp(1) threshold, the crossing time being located inside the step by inverting the
/// piecewise-linear rate. A jump flips the branch and leaves the position unchanged.
/// Steps where rate * dt exceeds 0.5 are reported in meta.warnings.
ZigzagRun simulate_jump_process(const BranchFlow& flow, const Vec3& x0, Branch branch0, double t0,
                                double t1, double dt, std::uint64_t seed);

ZigzagRun simulate_zigzag(const ZigzagState& state, const Vec3& x0, Branch branch0, double t0,
                          double t1, double dt, std::uint64_t seed);

struct JumpEndpoint {
  Vec3 x;
  Branch branch;
  std::size_t jumps = 0;
};

/// Endpoint of simulate_jump_process with an explicit random stream, without storing samples.
JumpEndpoint advance_jump_process(const BranchFlow& flow, const Vec3& x0, Branch branch0, double t0,
                                  double t1, double dt, CounterRng& rng);

}  // namespace pilotwave
