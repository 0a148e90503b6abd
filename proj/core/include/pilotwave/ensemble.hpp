#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pilotwave/dynamics.hpp"

namespace pilotwave {

struct Box {
  Vec3 lo;
  Vec3 hi;

  double side(int axis) const { return hi[axis] - lo[axis]; }
  double volume() const { return side(0) * side(1) * side(2); }
  bool contains(const Vec3& x) const;
  Vec3 center() const { return 0.5 * (lo + hi); }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Partition of a box into cubes of side `cell`.
class Grid {
 public:
  /// Throws std::invalid_argument unless every box side is an integer multiple of `cell`.
  Grid(const Box& box, double cell);

  const Box& box() const { return box_; }
  double cell() const { return cell_; }
  double cell_volume() const { return cell_ * cell_ * cell_; }
  const std::array<std::size_t, 3>& counts() const { return counts_; }
  std::size_t size() const { return counts_[0] * counts_[1] * counts_[2]; }

  /// Flat index of the cell holding x, or nullopt outside the box.
  std::optional<std::size_t> locate(const Vec3& x) const;
  Vec3 cell_lo(std::size_t index) const;

 private:
  Box box_;
  double cell_;
  std::array<std::size_t, 3> counts_{};
};

/// Beable positions at one time; `branches` is empty for single-branch beables.
struct EnsembleFrame {
  double t = 0.0;
  std::vector<Vec3> positions;
  std::vector<Branch> branches;
  std::size_t node_hits = 0;  ///< members dropped because their trajectory met a node

  std::size_t size() const { return positions.size(); }
};

using DensityField = std::function<double(const Vec3& x)>;
using TimeDensity = std::function<double(double t, const Vec3& x)>;

/// Rejection sampling of n points from `density` restricted to `box`.
///
/// The envelope is 1.25 times the maximum found on a 24^3 scan of the box. If a proposal ever
/// exceeds the envelope it is raised to 1.5 times that value and sampling restarts, so the output
/// depends only on (density, box, n, seed). Throws std::invalid_argument for n == 0,
/// std::runtime_error("density identically zero on box") and
/// std::runtime_error("bound too loose") if the acceptance rate drops below 1e-6.
EnsembleFrame sample_density(const DensityField& density, const Box& box, std::size_t n,
                             std::uint64_t seed);

/// Equilibrium zig/zag labels: zig with probability Psi_L^dagger Psi_L / rho_S at each position.
void assign_branches(EnsembleFrame& frame, const ZigzagState& state, std::uint64_t seed);

struct MoveResult {
  Vec3 x;
  std::optional<Branch> branch;
};

/// Advances member `index` from t0 to t1. May throw NodeError.
using Mover = std::function<MoveResult(std::size_t index, const Vec3& x,
                                       std::optional<Branch> branch, double t0, double t1)>;

Mover deterministic_mover(VelocityField field, double dt);

/// Zig-zag mover; member i draws from CounterRng(seed).split(i).split(bits of t0), so results do
/// not depend on evaluation order or thread count.
Mover zigzag_mover(const ZigzagState& state, double dt, std::uint64_t seed);

/// Advances every member to t1. Members that hit a node are dropped and counted in node_hits.
/// Throws std::runtime_error when more than 1% of the members hit nodes.
/// `threads` = 0 uses the hardware concurrency.
EnsembleFrame evolve_ensemble(const Mover& mover, const EnsembleFrame& frame, double t1,
                              unsigned threads = 0);

/// Maps every position into the periodic cell `box`.
void wrap_periodic(EnsembleFrame& frame, const Box& box);

/// Members inside `box` (branches kept aligned).
EnsembleFrame restrict_to(const EnsembleFrame& frame, const Box& box);

/// Member counts per cell. Throws std::invalid_argument if a position is outside the grid box.
std::vector<double> histogram(const EnsembleFrame& frame, const Grid& grid);
std::vector<double> histogram(const EnsembleFrame& frame, const Grid& grid, Branch only);

/// Cell probabilities of `density` on the grid, normalized over the box. Each cell uses a
/// 3x3x3 Gauss-Legendre rule, exact for polynomials of degree 5 in each coordinate.
std::vector<double> cell_masses(const DensityField& density, const Grid& grid);

/// Coarse-grained H-function of an ensemble against a reference density.
struct CoarseH {
  double raw = 0.0;   ///< sum over nonempty cells of p ln(p / q)
  double bias = 0.0;  ///< leading histogram bias (K - 1) / 2n, K = nonempty cells
  double corrected() const { return raw - bias; }
};

/// Throws std::runtime_error("support mismatch") if a cell holding members has zero reference mass.
CoarseH coarse_grained_H(const EnsembleFrame& frame, const DensityField& density, const Grid& grid);
CoarseH coarse_grained_H(const std::vector<double>& counts, const std::vector<double>& masses);

/// sum |count_i / n - p_i|
double l1_distance(const std::vector<double>& counts, const std::vector<double>& masses);

/// Mean L1 distance between histograms of n exact draws from `masses` and `masses` itself,
/// estimated from `replicates` parametric bootstrap histograms.
double sampling_noise_floor(const std::vector<double>& masses, std::size_t n,
                            std::size_t replicates, std::uint64_t seed);

struct HSample {
  double t;
  CoarseH h;
  std::size_t members;  ///< members that entered the histogram
};

struct HCurve {
  std::vector<HSample> samples;
  std::vector<EnsembleFrame> frames;  ///< evolved frame at each checkpoint
};

struct HCurveOptions {
  std::optional<Box> periodic_cell;  ///< wrap positions into this cell before binning
  bool restrict_to_grid = false;     ///< drop members outside the grid instead of failing
  unsigned threads = 0;
};

/// H at each checkpoint of the evolving ensemble. Checkpoints must be increasing and start at or
/// after frame0.t; the density is evaluated at the checkpoint time.
HCurve h_curve(const Mover& mover, const EnsembleFrame& frame0, const Grid& grid,
               const TimeDensity& density, const std::vector<double>& checkpoints,
               const HCurveOptions& options = {});

}  // namespace pilotwave
