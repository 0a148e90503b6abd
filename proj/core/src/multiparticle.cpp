#include "pilotwave/multiparticle.hpp"

#include <cmath>
#include <stdexcept>

#include "pilotwave/dynamics.hpp"

namespace pilotwave {

TwoWeylWavefunction::TwoWeylWavefunction(std::vector<ProductTerm> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw std::invalid_argument("two-particle state needs at least one term");
  for (const ProductTerm& term : terms_)
    if (term.first.handedness() != Handedness::R || term.second.handedness() != Handedness::R)
      throw std::invalid_argument("only right-handed two-particle states are supported");
}

SpinArray TwoWeylWavefunction::operator()(double t, const Vec3& x1, const Vec3& x2) const {
  SpinArray psi{};
  for (const ProductTerm& term : terms_) {
    const WeylSpinor a = term.first(t, x1);
    const WeylSpinor b = term.second(t, x2);
    psi[0][0] += term.weight * a.c1 * b.c1;
    psi[0][1] += term.weight * a.c1 * b.c2;
    psi[1][0] += term.weight * a.c2 * b.c1;
    psi[1][1] += term.weight * a.c2 * b.c2;
  }
  return psi;
}

TwoWeylWavefunction product_state(const WeylWavefunction& a, const WeylWavefunction& b) {
  return TwoWeylWavefunction({ProductTerm{Complex{1.0, 0.0}, a, b}});
}

TwoWeylWavefunction antisymmetrize(const Mode& a, const Mode& b) {
  if (a.p == b.p && a.energy == b.energy && a.field == b.field)
    throw std::invalid_argument("identical modes give a vanishing antisymmetrized wavefunction");
  const WeylWavefunction wa({a});
  const WeylWavefunction wb({b});
  const double s = 1.0 / std::sqrt(2.0);
  return TwoWeylWavefunction({ProductTerm{Complex{s, 0.0}, wa, wb},
                              ProductTerm{Complex{-s, 0.0}, wb, wa}});
}

PairVelocities two_weyl_velocities(const SpinArray& psi) {
  const double rho = density(psi);
  if (!(rho > kDensityFloor)) throw NodeError("velocity undefined at node", 0.0);

  PairVelocities v;
  for (int axis = 0; axis < 3; ++axis) {
    const Mat2& s = pauli(axis);
    Complex first{};
    Complex second{};
    for (std::size_t a1 = 0; a1 < 2; ++a1)
      for (std::size_t a2 = 0; a2 < 2; ++a2)
        for (std::size_t a = 0; a < 2; ++a) {
          first += std::conj(psi[a1][a2]) * s[a1][a] * psi[a][a2];
          second += std::conj(psi[a1][a2]) * s[a2][a] * psi[a1][a];
        }
    v.v1[axis] = first.real() / rho;
    v.v2[axis] = second.real() / rho;
  }
  return v;
}

PairVelocities two_weyl_velocities(const TwoWeylWavefunction& wf, double t, const Vec3& x1,
                                   const Vec3& x2) {
  return two_weyl_velocities(wf(t, x1, x2));
}

double speed_defect(const SpinArray& psi) {
  const double rho = density(psi);
  if (!(rho > kDensityFloor)) throw NodeError("velocity undefined at node", 0.0);
  const double r11 = std::abs(psi[0][0]);
  const double r12 = std::abs(psi[0][1]);
  const double r21 = std::abs(psi[1][0]);
  const double r22 = std::abs(psi[1][1]);
  const double phase =
      std::arg(psi[0][0]) + std::arg(psi[1][1]) - std::arg(psi[0][1]) - std::arg(psi[1][0]);
  const double bracket = r11 * r11 * r22 * r22 + r21 * r21 * r12 * r12 -
                         2.0 * std::cos(phase) * r11 * r22 * r12 * r21;
  return 4.0 * bracket / (rho * rho);
}

double speed_defect(const TwoWeylWavefunction& wf, double t, const Vec3& x1, const Vec3& x2) {
  return speed_defect(wf(t, x1, x2));
}

}  // namespace pilotwave
