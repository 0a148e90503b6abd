#pragma once

#include <array>
#include <complex>

#include "pilotwave/vec3.hpp"

namespace pilotwave {

using Complex = std::complex<double>;
using ThreeMomentum = Vec3;

/// Which Weyl equation a field obeys; for momentum eigenstates also the helicity label.
enum class Handedness { R, L };

/// Two-component Weyl amplitude.
struct WeylSpinor {
  Complex c1{};
  Complex c2{};

  double norm2() const { return std::norm(c1) + std::norm(c2); }

  WeylSpinor& operator+=(const WeylSpinor& o) {
    c1 += o.c1;
    c2 += o.c2;
    return *this;
  }
  WeylSpinor& operator-=(const WeylSpinor& o) {
    c1 -= o.c1;
    c2 -= o.c2;
    return *this;
  }
  WeylSpinor& operator*=(Complex s) {
    c1 *= s;
    c2 *= s;
    return *this;
  }
};

inline WeylSpinor operator+(WeylSpinor a, const WeylSpinor& b) { return a += b; }
inline WeylSpinor operator-(WeylSpinor a, const WeylSpinor& b) { return a -= b; }
inline WeylSpinor operator*(WeylSpinor a, Complex s) { return a *= s; }
inline WeylSpinor operator*(Complex s, WeylSpinor a) { return a *= s; }

/// Dirac 4-spinor in the Weyl representation, ordered (psi_L, psi_R).
struct DiracSpinor {
  WeylSpinor left;
  WeylSpinor right;

  double density() const { return left.norm2() + right.norm2(); }
};

struct FourCurrent {
  double j0 = 0.0;
  double jx = 0.0;
  double jy = 0.0;
  double jz = 0.0;
};

using Mat2 = std::array<std::array<Complex, 2>, 2>;

/// Pauli matrix sigma_{axis+1}, axis in {0,1,2}.
const Mat2& pauli(int axis);

/// px sigma_1 + py sigma_2 + pz sigma_3.
Mat2 sigma_dot(const ThreeMomentum& p);

WeylSpinor apply(const Mat2& m, const WeylSpinor& v);

/// a^dagger b
inline Complex inner(const WeylSpinor& a, const WeylSpinor& b) {
  return std::conj(a.c1) * b.c1 + std::conj(a.c2) * b.c2;
}

/// psi^dagger sigma psi (not normalized).
Vec3 sigma_expectation(const WeylSpinor& psi);

/// Unit-norm eigenvector of sigma.p/|p| with eigenvalue +1 (R) or -1 (L).
///
/// Phase convention: u_R = N (|p| + p_z, p_x + i p_y), u_L = N (-p_x + i p_y, |p| + p_z)
/// with N = 1/sqrt(2|p|(|p| + p_z)). For p_z < 0 the factor |p| + p_z is evaluated as
/// p_perp^2 / (|p| - p_z), so the convention stays well conditioned arbitrarily close to the
/// -z axis. On the -z axis itself the convention is 0/0 and the opposite basis column is
/// projected instead: u_R = (0, 1), u_L = (1, 0) up to that choice.
///
/// Throws std::domain_error for p = 0.
WeylSpinor helicity_spinor(const ThreeMomentum& p, Handedness chi);

/// j^mu = psi^dagger sigma^mu psi for R, psi^dagger sigma~^mu psi for L.
FourCurrent weyl_current(const WeylSpinor& psi, Handedness chi);

/// g_{mu nu} j^mu j^nu with signature (+,-,-,-).
inline double minkowski_norm(const FourCurrent& j) {
  return j.j0 * j.j0 - j.jx * j.jx - j.jy * j.jy - j.jz * j.jz;
}

}  // namespace pilotwave
