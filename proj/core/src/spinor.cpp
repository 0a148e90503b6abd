#include "pilotwave/spinor.hpp"

#include <cmath>
#include <stdexcept>

namespace pilotwave {

namespace {

constexpr Complex kI{0.0, 1.0};

const std::array<Mat2, 3> kPauli = {{
    Mat2{{{Complex{0, 0}, Complex{1, 0}}, {Complex{1, 0}, Complex{0, 0}}}},
    Mat2{{{Complex{0, 0}, -kI}, {kI, Complex{0, 0}}}},
    Mat2{{{Complex{1, 0}, Complex{0, 0}}, {Complex{0, 0}, Complex{-1, 0}}}},
}};

}  // namespace

const Mat2& pauli(int axis) { return kPauli.at(static_cast<std::size_t>(axis)); }

Mat2 sigma_dot(const ThreeMomentum& p) {
  return Mat2{{{Complex{p.z, 0.0}, Complex{p.x, -p.y}}, {Complex{p.x, p.y}, Complex{-p.z, 0.0}}}};
}

WeylSpinor apply(const Mat2& m, const WeylSpinor& v) {
  return {m[0][0] * v.c1 + m[0][1] * v.c2, m[1][0] * v.c1 + m[1][1] * v.c2};
}

Vec3 sigma_expectation(const WeylSpinor& psi) {
  // psi1* psi2 carries both transverse components: x = 2 Re, y = 2 Im.
  const Complex cross = std::conj(psi.c1) * psi.c2;
  return {2.0 * cross.real(), 2.0 * cross.imag(), std::norm(psi.c1) - std::norm(psi.c2)};
}

WeylSpinor helicity_spinor(const ThreeMomentum& p, Handedness chi) {
  const double mag = norm(p);
  if (!(mag > 0.0)) throw std::domain_error("helicity undefined at p = 0");

  const double perp2 = p.x * p.x + p.y * p.y;
  const double plus = p.z >= 0.0 ? mag + p.z : perp2 / (mag - p.z);  // |p| + p_z

  if (plus > 0.0) {
    const double n = 1.0 / std::sqrt(2.0 * mag * plus);
    if (chi == Handedness::R) return {Complex{n * plus, 0.0}, Complex{n * p.x, n * p.y}};
    return {Complex{-n * p.x, n * p.y}, Complex{n * plus, 0.0}};
  }

  // Exactly on the -z axis.
  if (chi == Handedness::R) return {Complex{0.0, 0.0}, Complex{1.0, 0.0}};
  return {Complex{1.0, 0.0}, Complex{0.0, 0.0}};
}

FourCurrent weyl_current(const WeylSpinor& psi, Handedness chi) {
  const Vec3 s = sigma_expectation(psi);
  const double sign = chi == Handedness::R ? 1.0 : -1.0;
  return {psi.norm2(), sign * s.x, sign * s.y, sign * s.z};
}

}  // namespace pilotwave
