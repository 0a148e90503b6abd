#include <numbers>

#include "doctest.h"
#include "pilotwave/dynamics.hpp"
#include "test_support.hpp"

using namespace pilotwave;

namespace {

std::vector<MomentumAmplitude> fig_modes() {
  const double w = 1.0 / std::sqrt(3.0);
  return {{{1, 0, 1}, {w, 0.0}},
          {{-1, -2, -1}, std::polar(w, 4.0)},
          {{1, -1, 1}, std::polar(w, 9.0)}};
}

WeylWavefunction fig1_state() {
  std::vector<Mode> modes;
  for (const auto& m : fig_modes()) modes.push_back({m.p, m.alpha});
  return WeylWavefunction(modes);
}

bool close(const Vec3& a, const Vec3& b, double tol) { return norm(a - b) <= tol; }

}  // namespace

TEST_CASE("Weyl velocity of plane waves follows or opposes the momentum") {
  const Vec3 p{0, 0, 2};
  const WeylWavefunction pos({Mode{p}});
  CHECK(close(weyl_velocity(pos(0.3, {1, 2, 3}), Handedness::R), {0, 0, 1}, 1e-15));

  const WeylWavefunction neg({Mode{p, {1, 0}, EnergySign::negative, Handedness::R}});
  CHECK(close(weyl_velocity(neg(0.3, {1, 2, 3}), Handedness::R), {0, 0, -1}, 1e-15));

  const WeylWavefunction left({Mode{p, {1, 0}, EnergySign::positive, Handedness::L}});
  CHECK(close(weyl_velocity(left(0.3, {1, 2, 3}), Handedness::L), {0, 0, 1}, 1e-15));

  const double r = 1.0 / std::sqrt(2.0);
  CHECK(close(weyl_velocity({r, r}, Handedness::R), {1, 0, 0}, 1e-15));
  CHECK_THROWS_WITH_AS(weyl_velocity({}, Handedness::R), "velocity undefined at node", NodeError);
}

TEST_CASE("Weyl velocities are luminal") {
  CounterRng rng(31);
  for (int s = 0; s < 20; ++s) {
    std::vector<Mode> modes;
    const Handedness field = s % 2 ? Handedness::L : Handedness::R;
    for (int k = 0; k < 1 + s % 5; ++k)
      modes.push_back({testing::random_momentum(rng, 0.1, 10.0), testing::random_complex(rng),
                       rng.uniform() < 0.5 ? EnergySign::positive : EnergySign::negative, field});
    const WeylWavefunction wf(modes);
    for (int n = 0; n < 500; ++n) {
      const Vec3 x{10 * rng.uniform(), 10 * rng.uniform(), 10 * rng.uniform()};
      REQUIRE(std::abs(norm(weyl_velocity(wf(50 * rng.uniform(), x), field)) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("Dirac velocity examples") {
  CHECK(close(dirac_velocity({}, {1.0, 0.0}), {0, 0, 1}, 0.0));
  CHECK(close(dirac_velocity({1.0, 0.0}, {1.0, 0.0}), {0, 0, 0}, 0.0));
  CHECK_THROWS_AS(dirac_velocity({}, {}), NodeError);

  // Group velocity p / E of a single-mode electron.
  const ZigzagState s = make_zigzag_state(4.0, {{{0, 0, 3}, {1.0, 0.0}}});
  const DiracSpinor psi = s(0.4, {0.1, -0.3, 0.2});
  CHECK(close(dirac_velocity(psi.left, psi.right), {0, 0, 0.6}, 1e-14));
}

TEST_CASE("Dirac velocity is never superluminal") {
  CounterRng rng(32);
  for (int n = 0; n < 10000; ++n) {
    const WeylSpinor l{testing::random_complex(rng), testing::random_complex(rng)};
    const WeylSpinor r{testing::random_complex(rng), testing::random_complex(rng)};
    REQUIRE(norm(dirac_velocity(l, r)) <= 1.0 + 1e-14);
  }
}

TEST_CASE("jump rate vanishes exactly for momentum eigenstates") {
  CounterRng rng(33);
  for (int s = 0; s < 20; ++s) {
    const ZigzagState state = make_zigzag_state(
        0.1 + 10 * rng.uniform(), {{testing::random_momentum(rng, 0.01, 10.0),
                                    testing::random_complex(rng)}});
    for (int n = 0; n < 100; ++n) {
      const double t = 50 * rng.uniform();
      const Vec3 x{10 * rng.uniform(), 10 * rng.uniform(), 10 * rng.uniform()};
      REQUIRE(zigzag_jump_rate(state, t, x, Branch::zig) == 0.0);
      REQUIRE(zigzag_jump_rate(state, t, x, Branch::zag) == 0.0);
    }
  }
}

TEST_CASE("jump rate sign convention") {
  // Psi_L = (1, 0), Psi_R = (i, 0): Im(Psi_L^dagger Psi_R) = 1 > 0, so only zag -> zig fires.
  const DiracSpinor up{{1.0, 0.0}, {Complex{0, 1}, 0.0}};
  CHECK(zigzag_jump_rate(up, 3.0, Branch::zag) == doctest::Approx(6.0));
  CHECK(zigzag_jump_rate(up, 3.0, Branch::zig) == 0.0);

  // Im(Psi_L^dagger Psi_R) < 0: zag -> zig is forbidden, zig -> zag has 2m Im(Psi_R^dagger Psi_L)/rho_L.
  const DiracSpinor down{{2.0, 0.0}, {Complex{0, -1}, 0.0}};
  CHECK(zigzag_jump_rate(down, 3.0, Branch::zag) == 0.0);
  CHECK(zigzag_jump_rate(down, 3.0, Branch::zig) == doctest::Approx(2 * 3.0 * 2.0 / 4.0));

  CHECK_THROWS_AS(zigzag_jump_rate(DiracSpinor{{1.0, 0.0}, {}}, 1.0, Branch::zag), NodeError);
}

TEST_CASE("at most one jump direction is open at any point") {
  const ZigzagState s = make_zigzag_state(10.0, fig_modes());
  CounterRng rng(34);
  int open = 0;
  for (int n = 0; n < 10000; ++n) {
    const double t = 50 * rng.uniform();
    const Vec3 x{7 * rng.uniform(), 7 * rng.uniform(), 7 * rng.uniform()};
    const double zig = zigzag_jump_rate(s, t, x, Branch::zig);
    const double zag = zigzag_jump_rate(s, t, x, Branch::zag);
    REQUIRE(zig * zag == 0.0);
    REQUIRE(zig >= 0.0);
    REQUIRE(zag >= 0.0);
    open += (zig + zag) > 0.0;
  }
  CHECK(open > 5000);
}

TEST_CASE("non-relativistic Gaussian packet: rate follows [z]+ / sigma^2") {
  // alpha(p) ~ exp(-|p - p0|^2 s^2) gives |phi|^2 ~ exp(-|x|^2 / (2 s^2)) at t = 0.
  const double m = 1000.0;
  const double p0 = 5.0;
  const double spread = 1.0;
  const double width = 1.0 / (spread * std::sqrt(2.0));  // std of alpha
  const int per_axis = 13;
  std::vector<MomentumAmplitude> modes;
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j)
      for (int k = 0; k < per_axis; ++k) {
        const auto node = [&](int a) { return -4.0 * width + 8.0 * width * a / (per_axis - 1); };
        const Vec3 q{node(i), node(j), node(k)};
        modes.push_back({{q.x, q.y, p0 + q.z}, {std::exp(-norm2(q) * spread * spread), 0.0}});
      }
  const ZigzagState packet = make_zigzag_state(m, modes);
  for (const double z : {0.2, 0.5, 1.0, 1.5, 2.0}) {
    const double rate = zigzag_jump_rate(packet, 0.0, {0, 0, z}, Branch::zag);
    CHECK(rate == doctest::Approx(z / (spread * spread)).epsilon(0.1));
    CHECK(zigzag_jump_rate(packet, 0.0, {0, 0, -z}, Branch::zag) == 0.0);
  }
}

TEST_CASE("RK4 on a constant field and on a single-mode Weyl state") {
  const Trajectory line = integrate_deterministic([](double, const Vec3&) { return Vec3{0, 0, 1}; },
                                                  {}, 0.0, 50.0, 1e-3);
  CHECK(close(line.samples.back().x, {0, 0, 50}, 1e-9));
  CHECK(line.samples.back().t == 50.0);
  CHECK(line.samples.size() == 50001);

  const Vec3 p{1, -2, 0.5};
  const WeylWavefunction wf({Mode{p}});
  const Vec3 x0{0.3, 0.1, -0.2};
  const Trajectory traj = integrate_deterministic(weyl_guidance(wf), x0, 0.0, 7.3, 0.01);
  for (const auto& s : traj.samples) {
    REQUIRE(close(s.x, x0 + (s.t * (1.0 / norm(p))) * p, 1e-12));
    REQUIRE(std::abs(s.speed - 1.0) < 1e-12);
    REQUIRE_FALSE(s.branch.has_value());
  }
  for (std::size_t i = 1; i < traj.samples.size(); ++i)
    REQUIRE(traj.samples[i].t > traj.samples[i - 1].t);
}

TEST_CASE("RK4 endpoint error scales as dt^4") {
  // Rigid rotation: x(t) = R(t) x0.
  const VelocityField rotation = [](double, const Vec3& x) { return Vec3{-x.y, x.x, 0.0}; };
  const double t1 = 5.0;
  const Vec3 exact{std::cos(t1), std::sin(t1), 0.0};
  const double coarse = norm(advance_deterministic(rotation, {1, 0, 0}, 0.0, t1, 0.1) - exact);
  const double fine = norm(advance_deterministic(rotation, {1, 0, 0}, 0.0, t1, 0.05) - exact);
  CHECK(std::log2(coarse / fine) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("integrator argument and node errors") {
  const VelocityField still = [](double, const Vec3&) { return Vec3{}; };
  CHECK_THROWS_AS(integrate_deterministic(still, {}, 1.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(integrate_deterministic(still, {}, 0.0, 1.0, 0.0), std::invalid_argument);

  const VelocityField nodal = [](double t, const Vec3&) {
    if (t > 0.5) throw NodeError("velocity undefined at node", t);
    return Vec3{1, 0, 0};
  };
  try {
    integrate_deterministic(nodal, {}, 0.0, 1.0, 0.1);
    FAIL("expected a node abort");
  } catch (const NodeError& e) {
    CHECK(std::string(e.what()).rfind("trajectory hit node at t=", 0) == 0);
    CHECK(e.time() == doctest::Approx(0.5));
  }
}

TEST_CASE("three-mode Weyl trajectory from the origin matches its golden endpoint") {
  // Generated once at dt = 1e-4 (dt = 2e-4 agrees to 1e-11).
  const Vec3 golden{19.140143281586102, -15.745795300242976, -28.844864961245481};
  const Trajectory traj = integrate_deterministic(weyl_guidance(fig1_state()), {}, 0.0, 50.0, 1e-3);
  CHECK(norm(traj.samples.back().x - golden) < 1e-6);
  for (const auto& s : traj.samples) REQUIRE(std::abs(s.speed - 1.0) < 1e-9);
}

TEST_CASE("zig-zag process on a momentum eigenstate never jumps") {
  const ZigzagState s = make_zigzag_state(10.0, {{{0.0, 1.0, 1.0}, {1.0, 0.0}}});
  for (const Branch b : {Branch::zig, Branch::zag}) {
    const ZigzagRun run = simulate_zigzag(s, {0.5, 0.0, 0.0}, b, 0.0, 20.0, 1e-2, 7);
    CHECK(run.jumps.empty());
    const Vec3 dir = (b == Branch::zag ? 1.0 : -1.0) * Vec3{0.0, 1.0, 1.0} / std::sqrt(2.0);
    for (const auto& sample : run.trajectory.samples) {
      REQUIRE(sample.branch == b);
      REQUIRE(close(sample.x, Vec3{0.5, 0, 0} + sample.t * dir, 1e-11));
      REQUIRE(std::abs(sample.speed - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("three-mode zig-zag run is luminal, jumps in place and is reproducible") {
  const ZigzagState s = make_zigzag_state(10.0, fig_modes());
  const ZigzagRun run = simulate_zigzag(s, {0, 1, 0}, Branch::zag, 0.0, 50.0, 1e-3, 42);
  CHECK(run.jumps.size() >= 3);
  for (const auto& sample : run.trajectory.samples) REQUIRE(std::abs(sample.speed - 1.0) < 1e-9);
  for (std::size_t i = 1; i < run.trajectory.samples.size(); ++i)
    REQUIRE(run.trajectory.samples[i].t > run.trajectory.samples[i - 1].t);

  // Each jump is recorded at a sample with the old branch; the next sample is on the new branch
  // and starts from the same position.
  std::size_t next = 0;
  for (const JumpEvent& jump : run.jumps) {
    REQUIRE(jump.from != jump.to);
    while (next < run.trajectory.samples.size() && run.trajectory.samples[next].t < jump.t) ++next;
    REQUIRE(next < run.trajectory.samples.size());
    const auto& at = run.trajectory.samples[next];
    CHECK(at.t == jump.t);
    CHECK(at.x == jump.x);
    CHECK(at.branch == jump.from);
  }

  const ZigzagRun again = simulate_zigzag(s, {0, 1, 0}, Branch::zag, 0.0, 50.0, 1e-3, 42);
  REQUIRE(again.jumps.size() == run.jumps.size());
  CHECK(again.trajectory.samples.back().x == run.trajectory.samples.back().x);
  const ZigzagRun other = simulate_zigzag(s, {0, 1, 0}, Branch::zag, 0.0, 50.0, 1e-3, 43);
  CHECK_FALSE(other.trajectory.samples.back().x == run.trajectory.samples.back().x);
}

TEST_CASE("jump clock with constant rate gives exponential waiting times") {
  const double lambda = 2.0;
  const BranchFlow flow = [&](double, const Vec3&, Branch b) {
    return FlowPoint{{b == Branch::zig ? -1.0 : 1.0, 0.0, 0.0}, lambda};
  };
  const ZigzagRun run = simulate_jump_process(flow, {}, Branch::zag, 0.0, 5000.0, 0.01, 5);
  REQUIRE(run.jumps.size() > 9000);
  std::vector<double> waits;
  double last = 0.0;
  for (const auto& j : run.jumps) {
    waits.push_back(j.t - last);
    last = j.t;
  }
  const double p = testing::ks_pvalue(waits, [&](double w) { return 1.0 - std::exp(-lambda * w); });
  CHECK(p > 0.01);
  CHECK(run.trajectory.meta.warnings.empty());
}

TEST_CASE("jump clock with a time-dependent rate gives the matching first-jump law") {
  // rate a t  =>  P(T > t) = exp(-a t^2 / 2)
  const double a = 3.0;
  const BranchFlow flow = [&](double t, const Vec3&, Branch) { return FlowPoint{{}, a * t}; };
  std::vector<double> first;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    CounterRng rng(seed);
    const ZigzagRun run = simulate_jump_process(flow, {}, Branch::zig, 0.0, 10.0, 0.05, seed);
    REQUIRE_FALSE(run.jumps.empty());
    first.push_back(run.jumps.front().t);
  }
  const double p =
      testing::ks_pvalue(first, [&](double t) { return 1.0 - std::exp(-0.5 * a * t * t); });
  CHECK(p > 0.01);
}

TEST_CASE("coarse steps relative to the jump rate are flagged") {
  const BranchFlow flow = [](double, const Vec3&, Branch) { return FlowPoint{{1, 0, 0}, 100.0}; };
  const ZigzagRun run = simulate_jump_process(flow, {}, Branch::zig, 0.0, 1.0, 0.01, 1);
  REQUIRE(run.trajectory.meta.warnings.size() == 1);
  CHECK(run.trajectory.meta.warnings[0].find("rate resolution") != std::string::npos);
}
