#include "pilotwave/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace pilotwave {

namespace {

std::string node_message(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "trajectory hit node at t=%.17g", t);
  return buf;
}

void check_interval(double t0, double t1, double dt) {
  if (!(t1 > t0)) throw std::invalid_argument("integration interval must have t1 > t0");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
}

// Number of steps of size dt covering [t0, t1]; the last one may be shorter.
long step_count(double t0, double t1, double dt) {
  const double ratio = (t1 - t0) / dt;
  return std::max(1L, static_cast<long>(std::ceil(ratio - 1e-9)));
}

template <class Eval>
auto guarded(Eval&& eval, double t) -> decltype(eval()) {
  try {
    return eval();
  } catch (const NodeError&) {
    throw NodeError(node_message(t), t);
  }
}

template <class Velocity>
Vec3 rk4_step(const Velocity& v, double t, const Vec3& x, const Vec3& k1, double h) {
  const Vec3 k2 = v(t + 0.5 * h, x + (0.5 * h) * k1);
  const Vec3 k3 = v(t + 0.5 * h, x + (0.5 * h) * k2);
  const Vec3 k4 = v(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class Observer>
Vec3 run_deterministic(const VelocityField& field, const Vec3& x0, double t0, double t1, double dt,
                       Observer&& observe) {
  check_interval(t0, t1, dt);
  const long steps = step_count(t0, t1, dt);

  double t = t0;
  Vec3 x = x0;
  Vec3 k1 = guarded([&] { return field(t, x); }, t);
  observe(t, x, k1);
  for (long n = 1; n <= steps; ++n) {
    const double t_next = n == steps ? t1 : t0 + static_cast<double>(n) * dt;
    const double h = t_next - t;
    x = guarded([&] { return rk4_step(field, t, x, k1, h); }, t);
    t = t_next;
    k1 = guarded([&] { return field(t, x); }, t);
    observe(t, x, k1);
  }
  return x;
}

template <class Observer>
JumpEndpoint run_jump_process(const BranchFlow& flow, const Vec3& x0, Branch branch0, double t0,
                              double t1, double dt, CounterRng& rng, Observer& observer) {
  check_interval(t0, t1, dt);

  JumpEndpoint state{x0, branch0, 0};
  double t = t0;
  FlowPoint here = guarded([&] { return flow(t, state.x, state.branch); }, t);
  observer.sample(t, state.x, state.branch, here);

  double threshold = rng.exponential();
  double hazard = 0.0;

  while (t < t1) {
    const bool last = t1 - t <= dt * (1.0 + 1e-9);
    const double h = last ? t1 - t : dt;
    const Branch b = state.branch;
    const auto velocity = [&](double s, const Vec3& y) { return flow(s, y, b).velocity; };

    const Vec3 x_end =
        guarded([&] { return rk4_step(velocity, t, state.x, here.velocity, h); }, t);
    const double t_end = last ? t1 : t + h;
    const FlowPoint end = guarded([&] { return flow(t_end, x_end, b); }, t_end);
    observer.resolution(t, std::max(here.rate, end.rate) * h);

    const double step_hazard = 0.5 * h * (here.rate + end.rate);
    if (hazard + step_hazard < threshold) {
      hazard += step_hazard;
      t = t_end;
      state.x = x_end;
      here = end;
      observer.sample(t, state.x, b, here);
      continue;
    }

    // Crossing inside the step: r0 tau + (r1 - r0) tau^2 / (2h) = need.
    const double need = threshold - hazard;
    const double r0 = here.rate;
    const double slope = (end.rate - r0) / h;
    const double disc = std::max(0.0, r0 * r0 + 2.0 * slope * need);
    const double denom = r0 + std::sqrt(disc);
    double tau = denom > 0.0 ? 2.0 * need / denom : h;
    tau = std::clamp(tau, 0.0, h);

    if (tau > 1e-12 * h) {
      if (tau >= h) {
        state.x = x_end;
        t = t_end;
      } else {
        state.x = guarded([&] { return rk4_step(velocity, t, state.x, here.velocity, tau); }, t);
        t += tau;
      }
      const FlowPoint at_jump = guarded([&] { return flow(t, state.x, b); }, t);
      observer.sample(t, state.x, b, at_jump);
    }

    observer.jump(JumpEvent{t, state.x, b, flipped(b)});
    state.branch = flipped(b);
    ++state.jumps;
    here = guarded([&] { return flow(t, state.x, state.branch); }, t);
    threshold = rng.exponential();
    hazard = 0.0;
  }
  return state;
}

struct NullJumpObserver {
  void sample(double, const Vec3&, Branch, const FlowPoint&) {}
  void resolution(double, double) {}
  void jump(const JumpEvent&) {}
};

struct RecordingJumpObserver {
  ZigzagRun& run;
  std::size_t coarse_steps = 0;
  double worst = 0.0;
  double worst_t = 0.0;

  void sample(double t, const Vec3& x, Branch b, const FlowPoint& f) {
    run.trajectory.samples.push_back({t, x, b, norm(f.velocity)});
  }
  void resolution(double t, double rate_dt) {
    if (rate_dt > 0.5) {
      ++coarse_steps;
      if (rate_dt > worst) {
        worst = rate_dt;
        worst_t = t;
      }
    }
  }
  void jump(const JumpEvent& e) { run.jumps.push_back(e); }
};

}  // namespace

const char* to_string(Branch b) { return b == Branch::zig ? "zig" : "zag"; }

Vec3 weyl_velocity(const WeylSpinor& psi, Handedness chi) {
  const double density = psi.norm2();
  if (!(density > kDensityFloor)) throw NodeError("velocity undefined at node", 0.0);
  const Vec3 s = sigma_expectation(psi) / density;
  return chi == Handedness::R ? s : -s;
}

Vec3 dirac_velocity(const WeylSpinor& psi_left, const WeylSpinor& psi_right) {
  const double density = psi_left.norm2() + psi_right.norm2();
  if (!(density > kDensityFloor)) throw NodeError("velocity undefined at node", 0.0);
  return (sigma_expectation(psi_right) - sigma_expectation(psi_left)) / density;
}

double zigzag_jump_rate(const ZigzagPoint& point, double m, Branch from) {
  const double density = from == Branch::zag ? point.psi.right.norm2() : point.psi.left.norm2();
  if (!(density > kDensityFloor)) throw NodeError("jump rate undefined at node", 0.0);
  // Im(Psi_R^dagger Psi_L) = -Im(Psi_L^dagger Psi_R)
  const double flux = from == Branch::zag ? point.im_overlap : -point.im_overlap;
  return flux > 0.0 ? 2.0 * m * flux / density : 0.0;
}

double zigzag_jump_rate(const DiracSpinor& psi, double m, Branch from) {
  return zigzag_jump_rate(ZigzagPoint{psi, inner(psi.left, psi.right).imag()}, m, from);
}

double zigzag_jump_rate(const ZigzagState& state, double t, const Vec3& x, Branch from) {
  return zigzag_jump_rate(state.evaluate(t, x), state.mass(), from);
}

VelocityField weyl_guidance(const WeylWavefunction& wf) {
  return [wf](double t, const Vec3& x) { return weyl_velocity(wf(t, x), wf.handedness()); };
}

VelocityField dirac_guidance(const ZigzagState& state) {
  return [state](double t, const Vec3& x) {
    const DiracSpinor psi = state(t, x);
    return dirac_velocity(psi.left, psi.right);
  };
}

BranchFlow zigzag_flow(const ZigzagState& state) {
  return [state](double t, const Vec3& x, Branch b) {
    const ZigzagPoint point = state.evaluate(t, x);
    const Vec3 v = b == Branch::zig ? weyl_velocity(point.psi.left, Handedness::L)
                                    : weyl_velocity(point.psi.right, Handedness::R);
    return FlowPoint{v, zigzag_jump_rate(point, state.mass(), b)};
  };
}

Trajectory integrate_deterministic(const VelocityField& field, const Vec3& x0, double t0, double t1,
                                   double dt) {
  Trajectory traj;
  traj.meta.dt = dt;
  traj.samples.reserve(static_cast<std::size_t>(step_count(t0, t1, dt > 0 ? dt : 1.0)) + 1);
  run_deterministic(field, x0, t0, t1, dt, [&](double t, const Vec3& x, const Vec3& v) {
    traj.samples.push_back({t, x, std::nullopt, norm(v)});
  });
  return traj;
}

Vec3 advance_deterministic(const VelocityField& field, const Vec3& x0, double t0, double t1,
                           double dt) {
  return run_deterministic(field, x0, t0, t1, dt, [](double, const Vec3&, const Vec3&) {});
}

ZigzagRun simulate_jump_process(const BranchFlow& flow, const Vec3& x0, Branch branch0, double t0,
                                double t1, double dt, std::uint64_t seed) {
  ZigzagRun run;
  run.trajectory.meta.dt = dt;
  run.trajectory.meta.seed = seed;
  CounterRng rng(seed);
  RecordingJumpObserver observer{run};
  run_jump_process(flow, x0, branch0, t0, t1, dt, rng, observer);
  if (observer.coarse_steps > 0) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "rate resolution: %zu steps with sigma*dt > 0.5 (max %.6g at t=%.6g)",
                  observer.coarse_steps, observer.worst, observer.worst_t);
    run.trajectory.meta.warnings.emplace_back(buf);
  }
  return run;
}

ZigzagRun simulate_zigzag(const ZigzagState& state, const Vec3& x0, Branch branch0, double t0,
                          double t1, double dt, std::uint64_t seed) {
  return simulate_jump_process(zigzag_flow(state), x0, branch0, t0, t1, dt, seed);
}

JumpEndpoint advance_jump_process(const BranchFlow& flow, const Vec3& x0, Branch branch0, double t0,
                                  double t1, double dt, CounterRng& rng) {
  NullJumpObserver observer;
  return run_jump_process(flow, x0, branch0, t0, t1, dt, rng, observer);
}

}  // namespace pilotwave
