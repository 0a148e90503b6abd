#include "pilotwave/ensemble.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace pilotwave {

namespace {

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Vec3 wrap(Vec3 x, const Box& box) {
  for (int a = 0; a < 3; ++a) {
    const double side = box.side(a);
    double r = std::fmod(x[a] - box.lo[a], side);
    if (r < 0.0) r += side;
    if (r >= side) r = 0.0;
    x[a] = box.lo[a] + r;
  }
  return x;
}

}  // namespace

bool Box::contains(const Vec3& x) const {
  for (int a = 0; a < 3; ++a)
    if (!(x[a] >= lo[a] && x[a] <= hi[a])) return false;
  return true;
}

Grid::Grid(const Box& box, double cell) : box_(box), cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("grid cell size must be positive");
  for (int a = 0; a < 3; ++a) {
    const double side = box.side(a);
    if (!(side > 0.0)) throw std::invalid_argument("grid box must have positive extent");
    const double ratio = side / cell;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw std::invalid_argument("grid box sides must be integer multiples of the cell size");
    counts_[static_cast<std::size_t>(a)] = static_cast<std::size_t>(rounded);
  }
}

std::optional<std::size_t> Grid::locate(const Vec3& x) const {
  if (!box_.contains(x)) return std::nullopt;
  std::array<std::size_t, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    const auto axis = static_cast<std::size_t>(a);
    const double f = std::floor((x[a] - box_.lo[a]) / cell_);
    idx[axis] = std::min(counts_[axis] - 1, static_cast<std::size_t>(std::max(0.0, f)));
  }
  return (idx[0] * counts_[1] + idx[1]) * counts_[2] + idx[2];
}

Vec3 Grid::cell_lo(std::size_t index) const {
  const std::size_t k = index % counts_[2];
  const std::size_t j = (index / counts_[2]) % counts_[1];
  const std::size_t i = index / (counts_[1] * counts_[2]);
  return {box_.lo.x + static_cast<double>(i) * cell_, box_.lo.y + static_cast<double>(j) * cell_,
          box_.lo.z + static_cast<double>(k) * cell_};
}

EnsembleFrame sample_density(const DensityField& density, const Box& box, std::size_t n,
                             std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample count must be at least 1");
  for (int a = 0; a < 3; ++a)
    if (!(box.side(a) > 0.0)) throw std::invalid_argument("sampling box must have positive extent");

  constexpr int kScan = 24;
  double peak = 0.0;
  for (int i = 0; i < kScan; ++i)
    for (int j = 0; j < kScan; ++j)
      for (int k = 0; k < kScan; ++k) {
        const Vec3 x{box.lo.x + (i + 0.5) * box.side(0) / kScan,
                     box.lo.y + (j + 0.5) * box.side(1) / kScan,
                     box.lo.z + (k + 0.5) * box.side(2) / kScan};
        peak = std::max(peak, density(x));
      }
  if (!(peak > 0.0)) throw std::runtime_error("density identically zero on box");

  double bound = 1.25 * peak;
  CounterRng rng(seed);
  EnsembleFrame frame;
  frame.positions.reserve(n);
  std::uint64_t attempts = 0;
  while (frame.positions.size() < n) {
    ++attempts;
    const Vec3 x{box.lo.x + rng.uniform() * box.side(0), box.lo.y + rng.uniform() * box.side(1),
                 box.lo.z + rng.uniform() * box.side(2)};
    const double u = rng.uniform();
    const double value = density(x);
    if (value < 0.0) throw std::runtime_error("density must be non-negative");
    if (value > bound) {
      bound = 1.5 * value;
      frame.positions.clear();
      attempts = 0;
      continue;
    }
    if (u * bound < value) frame.positions.push_back(x);
    if (attempts >= 10'000'000 &&
        static_cast<double>(frame.positions.size()) < 1e-6 * static_cast<double>(attempts))
      throw std::runtime_error("bound too loose");
  }
  return frame;
}

void assign_branches(EnsembleFrame& frame, const ZigzagState& state, std::uint64_t seed) {
  const CounterRng root(seed);
  frame.branches.resize(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const DiracSpinor psi = state(frame.t, frame.positions[i]);
    const double total = psi.density();
    if (!(total > kDensityFloor)) throw NodeError("branch assignment at a node", frame.t);
    CounterRng rng = root.split(i);
    frame.branches[i] = rng.uniform() * total < psi.left.norm2() ? Branch::zig : Branch::zag;
  }
}

Mover deterministic_mover(VelocityField field, double dt) {
  return [field = std::move(field), dt](std::size_t, const Vec3& x, std::optional<Branch> b,
                                        double t0, double t1) {
    return MoveResult{advance_deterministic(field, x, t0, t1, dt), b};
  };
}

Mover zigzag_mover(const ZigzagState& state, double dt, std::uint64_t seed) {
  return [flow = zigzag_flow(state), dt, root = CounterRng(seed)](
             std::size_t index, const Vec3& x, std::optional<Branch> b, double t0, double t1) {
    if (!b) throw std::invalid_argument("zig-zag mover needs a branch label per member");
    CounterRng rng = root.split(index).split(std::bit_cast<std::uint64_t>(t0));
    const JumpEndpoint end = advance_jump_process(flow, x, *b, t0, t1, dt, rng);
    return MoveResult{end.x, end.branch};
  };
}

EnsembleFrame evolve_ensemble(const Mover& mover, const EnsembleFrame& frame, double t1,
                              unsigned threads) {
  const std::size_t n = frame.size();
  const bool labelled = !frame.branches.empty();
  if (labelled && frame.branches.size() != n)
    throw std::invalid_argument("branch labels must match positions");

  std::vector<MoveResult> moved(n);
  std::vector<char> hit(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::optional<Branch> b =
        labelled ? std::optional<Branch>(frame.branches[i]) : std::nullopt;
    try {
      moved[i] = mover(i, frame.positions[i], b, frame.t, t1);
    } catch (const NodeError&) {
      hit[i] = 1;
    }
  });

  EnsembleFrame out;
  out.t = t1;
  const std::size_t hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  if (static_cast<double>(hits) > 0.01 * static_cast<double>(n))
    throw std::runtime_error("more than 1% of ensemble trajectories hit nodes");
  out.node_hits = frame.node_hits + hits;
  out.positions.reserve(n - hits);
  for (std::size_t i = 0; i < n; ++i) {
    if (hit[i]) continue;
    out.positions.push_back(moved[i].x);
    if (labelled) {
      if (!moved[i].branch) throw std::logic_error("mover dropped a branch label");
      out.branches.push_back(*moved[i].branch);
    }
  }
  return out;
}

void wrap_periodic(EnsembleFrame& frame, const Box& box) {
  for (Vec3& x : frame.positions) x = wrap(x, box);
}

EnsembleFrame restrict_to(const EnsembleFrame& frame, const Box& box) {
  EnsembleFrame out;
  out.t = frame.t;
  out.node_hits = frame.node_hits;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (!box.contains(frame.positions[i])) continue;
    out.positions.push_back(frame.positions[i]);
    if (!frame.branches.empty()) out.branches.push_back(frame.branches[i]);
  }
  return out;
}

namespace {

std::vector<double> histogram_impl(const EnsembleFrame& frame, const Grid& grid,
                                   std::optional<Branch> only) {
  std::vector<double> counts(grid.size(), 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (only && frame.branches.at(i) != *only) continue;
    const auto cell = grid.locate(frame.positions[i]);
    if (!cell) throw std::invalid_argument("ensemble member outside the grid box");
    counts[*cell] += 1.0;
  }
  return counts;
}

}  // namespace

std::vector<double> histogram(const EnsembleFrame& frame, const Grid& grid) {
  return histogram_impl(frame, grid, std::nullopt);
}

std::vector<double> histogram(const EnsembleFrame& frame, const Grid& grid, Branch only) {
  if (frame.branches.size() != frame.size())
    throw std::invalid_argument("branch histogram needs branch labels");
  return histogram_impl(frame, grid, only);
}

std::vector<double> cell_masses(const DensityField& density, const Grid& grid) {
  // Three-point Gauss-Legendre nodes and weights on [0, 1].
  static constexpr double kOffset = 0.11270166537925831;  // (1 - sqrt(3/5)) / 2
  static constexpr std::array<double, 3> kNode{kOffset, 0.5, 1.0 - kOffset};
  static constexpr std::array<double, 3> kWeight{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

  const double h = grid.cell();
  std::vector<double> masses(grid.size());
  double total = 0.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const Vec3 lo = grid.cell_lo(c);
    double sum = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int d = 0; d < 3; ++d)
          sum += kWeight[a] * kWeight[b] * kWeight[d] *
                 density(lo + Vec3{kNode[a] * h, kNode[b] * h, kNode[d] * h});
    masses[c] = sum;
    total += sum;
  }
  if (!(total > 0.0)) throw std::runtime_error("density identically zero on grid");
  for (double& m : masses) m /= total;
  return masses;
}

CoarseH coarse_grained_H(const std::vector<double>& counts, const std::vector<double>& masses) {
  if (counts.size() != masses.size())
    throw std::invalid_argument("histogram and reference sizes differ");
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(n > 0.0)) throw std::invalid_argument("empty ensemble");

  CoarseH h;
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] <= 0.0) continue;  // x ln x -> 0
    if (!(masses[i] > 0.0)) throw std::runtime_error("support mismatch");
    const double p = counts[i] / n;
    h.raw += p * std::log(p / masses[i]);
    ++occupied;
  }
  h.bias = static_cast<double>(occupied - 1) / (2.0 * n);
  return h;
}

CoarseH coarse_grained_H(const EnsembleFrame& frame, const DensityField& density, const Grid& grid) {
  return coarse_grained_H(histogram(frame, grid), cell_masses(density, grid));
}

double l1_distance(const std::vector<double>& counts, const std::vector<double>& masses) {
  if (counts.size() != masses.size())
    throw std::invalid_argument("histogram and reference sizes differ");
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(n > 0.0)) throw std::invalid_argument("empty ensemble");
  double l1 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) l1 += std::abs(counts[i] / n - masses[i]);
  return l1;
}

double sampling_noise_floor(const std::vector<double>& masses, std::size_t n,
                            std::size_t replicates, std::uint64_t seed) {
  if (n == 0 || replicates == 0) throw std::invalid_argument("need n >= 1 and replicates >= 1");
  std::vector<double> cdf(masses.size());
  std::partial_sum(masses.begin(), masses.end(), cdf.begin());
  const double total = cdf.back();

  const CounterRng root(seed);
  double sum = 0.0;
  std::vector<double> counts(masses.size());
  for (std::size_t r = 0; r < replicates; ++r) {
    std::fill(counts.begin(), counts.end(), 0.0);
    CounterRng rng = root.split(r);
    for (std::size_t s = 0; s < n; ++s) {
      const double u = rng.uniform() * total;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      counts[static_cast<std::size_t>(it - cdf.begin())] += 1.0;
    }
    sum += l1_distance(counts, masses);
  }
  return sum / static_cast<double>(replicates);
}

HCurve h_curve(const Mover& mover, const EnsembleFrame& frame0, const Grid& grid,
               const TimeDensity& density, const std::vector<double>& checkpoints,
               const HCurveOptions& options) {
  if (checkpoints.empty()) throw std::invalid_argument("need at least one checkpoint");
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (!(checkpoints[i] > checkpoints[i - 1]))
      throw std::invalid_argument("checkpoints must be increasing");
  if (checkpoints.front() < frame0.t)
    throw std::invalid_argument("checkpoints must not precede the initial frame");

  HCurve curve;
  EnsembleFrame frame = frame0;
  for (const double t : checkpoints) {
    if (t > frame.t) frame = evolve_ensemble(mover, frame, t, options.threads);

    EnsembleFrame binned = frame;
    if (options.periodic_cell) wrap_periodic(binned, *options.periodic_cell);
    if (options.restrict_to_grid) binned = restrict_to(binned, grid.box());

    const auto masses = cell_masses([&](const Vec3& x) { return density(t, x); }, grid);
    curve.samples.push_back({t, coarse_grained_H(histogram(binned, grid), masses), binned.size()});
    curve.frames.push_back(frame);
  }
  return curve;
}

}  // namespace pilotwave
