#pragma once

#include <array>
#include <vector>

#include "pilotwave/states.hpp"

namespace pilotwave {

/// Two-particle spin amplitudes Psi_{a1 a2} at one configuration point, indexed [a1][a2].
using SpinArray = std::array<std::array<Complex, 2>, 2>;

inline double density(const SpinArray& psi) {
  return std::norm(psi[0][0]) + std::norm(psi[0][1]) + std::norm(psi[1][0]) + std::norm(psi[1][1]);
}

/// One product term weight * a(x1) (x) b(x2).
struct ProductTerm {
  Complex weight;
  WeylWavefunction first;
  WeylWavefunction second;
};

/// Two right-handed Weyl fermions, Psi_{a1 a2}(t, x1, x2) = sum_k w_k a_k(x1)_{a1} b_k(x2)_{a2}.
class TwoWeylWavefunction {
 public:
  /// Throws std::invalid_argument unless every factor solves the right-handed Weyl equation.
  explicit TwoWeylWavefunction(std::vector<ProductTerm> terms);

  SpinArray operator()(double t, const Vec3& x1, const Vec3& x2) const;

  const std::vector<ProductTerm>& terms() const { return terms_; }

 private:
  std::vector<ProductTerm> terms_;
};

TwoWeylWavefunction product_state(const WeylWavefunction& a, const WeylWavefunction& b);

/// (a(x1) b(x2) - b(x1) a(x2)) / sqrt(2) for two right-handed single-mode wavefunctions.
/// Throws std::invalid_argument when the modes coincide (the result would vanish identically).
TwoWeylWavefunction antisymmetrize(const Mode& a, const Mode& b);

struct PairVelocities {
  Vec3 v1;
  Vec3 v2;
};

/// v1 contracts sigma with the first spin index, v2 with the second; both divided by rho.
/// Throws NodeError at zero density.
PairVelocities two_weyl_velocities(const SpinArray& psi);
PairVelocities two_weyl_velocities(const TwoWeylWavefunction& wf, double t, const Vec3& x1,
                                   const Vec3& x2);

/// 1 - |v1|^2 from the polar form Psi_ij = R_ij e^{i theta_ij}:
///   (4 / rho^2) (R11^2 R22^2 + R21^2 R12^2 - 2 cos(th11 + th22 - th12 - th21) R11 R22 R12 R21)
double speed_defect(const SpinArray& psi);
double speed_defect(const TwoWeylWavefunction& wf, double t, const Vec3& x1, const Vec3& x2);

}  // namespace pilotwave
