#include "pilotwave/states.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pilotwave {

namespace {

constexpr Complex kI{0.0, 1.0};

Complex plane_wave(const Vec3& p, double omega, double t, const Vec3& x) {
  const double phase = dot(p, x) - omega * t;
  return {std::cos(phase), std::sin(phase)};
}

}  // namespace

WeylWavefunction::WeylWavefunction(std::vector<Mode> modes) : modes_(std::move(modes)) {
  if (modes_.empty()) throw std::invalid_argument("Weyl wavefunction needs at least one mode");
  field_ = modes_.front().field;
  terms_.reserve(modes_.size());
  for (const Mode& m : modes_) {
    if (m.field != field_) throw std::invalid_argument("mixed handedness in mode list");
    const double mag = norm(m.p);
    if (!(mag > 0.0)) throw std::invalid_argument("mode momentum must be nonzero");
    if (!std::isfinite(m.amplitude.real()) || !std::isfinite(m.amplitude.imag()))
      throw std::invalid_argument("mode amplitude must be finite");

    const bool positive = m.energy == EnergySign::positive;
    // psi_R: +E -> u_R, -E -> u_L; psi_L is the mirror image.
    const Handedness helicity =
        (m.field == Handedness::R) == positive ? Handedness::R : Handedness::L;
    terms_.push_back({m.p, positive ? mag : -mag,
                      helicity_spinor(m.p, helicity) * (m.amplitude * kPlaneWaveNorm)});
  }
}

WeylSpinor WeylWavefunction::operator()(double t, const Vec3& x) const {
  WeylSpinor sum;
  for (const Term& term : terms_) sum += term.spinor * plane_wave(term.p, term.omega, t, x);
  return sum;
}

WeylSpinor evaluate_weyl(const WeylWavefunction& wf, double t, const Vec3& x) { return wf(t, x); }

WeylWavefunction superpose(const WeylWavefunction& wf_a, Complex a, const WeylWavefunction& wf_b,
                           Complex b) {
  std::vector<Mode> modes;
  modes.reserve(wf_a.modes().size() + wf_b.modes().size());
  for (Mode m : wf_a.modes()) {
    m.amplitude *= a;
    modes.push_back(m);
  }
  for (Mode m : wf_b.modes()) {
    m.amplitude *= b;
    modes.push_back(m);
  }
  return WeylWavefunction(std::move(modes));
}

ZigzagCoefficients zigzag_coefficients(double p_mag, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("massless zig-zag degenerate");
  if (!(p_mag >= 0.0)) throw std::invalid_argument("momentum magnitude must be non-negative");
  const double energy = std::hypot(p_mag, m);
  const double gap = m * m / (energy + p_mag);  // E_p - p without cancellation
  return {energy, m / std::sqrt(2.0 * energy * gap), std::sqrt(gap / (2.0 * energy))};
}

ZigzagState::ZigzagState(double mass, std::vector<MomentumAmplitude> modes,
                         CoefficientLayout layout)
    : mass_(mass), modes_(std::move(modes)), layout_(layout) {
  if (!(mass_ > 0.0)) throw std::invalid_argument("massless zig-zag degenerate");
  if (modes_.empty()) throw std::invalid_argument("zig-zag state needs at least one mode");
  coefficients_.reserve(modes_.size());
  terms_.reserve(modes_.size());
  for (const MomentumAmplitude& mode : modes_) {
    const double mag = norm(mode.p);
    // Helicity of a p = 0 mode is undefined; no limit is guessed.
    if (!(mag > 0.0)) throw std::invalid_argument("zig-zag mode momentum must be nonzero");
    const ZigzagCoefficients c = zigzag_coefficients(mag, mass_);
    coefficients_.push_back(c);

    const WeylSpinor base = helicity_spinor(mode.p, Handedness::R) * (mode.alpha * kPlaneWaveNorm);
    const bool consistent = layout_ == CoefficientLayout::dirac_consistent;
    terms_.push_back({mode.p, c.energy, base, consistent ? c.n_zeta : c.n_c,
                      consistent ? c.n_c : c.n_zeta});
  }
}

DiracSpinor ZigzagState::operator()(double t, const Vec3& x) const {
  DiracSpinor psi;
  for (const Term& term : terms_) {
    const WeylSpinor s = term.base * plane_wave(term.p, term.energy, t, x);
    psi.left += s * Complex{term.left, 0.0};
    psi.right += s * Complex{term.right, 0.0};
  }
  return psi;
}

ZigzagPoint ZigzagState::evaluate(double t, const Vec3& x) const {
  constexpr std::size_t kInline = 16;
  std::array<WeylSpinor, kInline> inline_buf;
  std::vector<WeylSpinor> heap_buf;
  WeylSpinor* spinors = inline_buf.data();
  if (terms_.size() > kInline) {
    heap_buf.resize(terms_.size());
    spinors = heap_buf.data();
  }

  ZigzagPoint out{{}, 0.0};
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const Term& term = terms_[k];
    const WeylSpinor s = term.base * plane_wave(term.p, term.energy, t, x);
    spinors[k] = s;
    out.psi.left += s * Complex{term.left, 0.0};
    out.psi.right += s * Complex{term.right, 0.0};
  }
  for (std::size_t j = 0; j < terms_.size(); ++j)
    for (std::size_t k = j + 1; k < terms_.size(); ++k) {
      const double weight = terms_[j].left * terms_[k].right - terms_[k].left * terms_[j].right;
      if (weight != 0.0) out.im_overlap += weight * inner(spinors[j], spinors[k]).imag();
    }
  return out;
}

ZigzagState make_zigzag_state(double m, std::vector<MomentumAmplitude> modes) {
  return ZigzagState(m, std::move(modes));
}

double dirac_residual(const DiracField& psi, double m, double t, const Vec3& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");

  const auto diff = [&](double dt, const Vec3& dx) {
    const DiracSpinor fwd = psi(t + dt, x + dx);
    const DiracSpinor bwd = psi(t - dt, x - dx);
    const Complex scale{0.5 / h, 0.0};
    return DiracSpinor{(fwd.left - bwd.left) * scale, (fwd.right - bwd.right) * scale};
  };

  const DiracSpinor center = psi(t, x);
  const DiracSpinor d_t = diff(h, {});
  const std::array<DiracSpinor, 3> d_x = {diff(0.0, {h, 0, 0}), diff(0.0, {0, h, 0}),
                                          diff(0.0, {0, 0, h})};

  // sigma . grad applied to each Weyl component.
  WeylSpinor grad_left;
  WeylSpinor grad_right;
  for (int axis = 0; axis < 3; ++axis) {
    grad_left += apply(pauli(axis), d_x[axis].left);
    grad_right += apply(pauli(axis), d_x[axis].right);
  }

  // Upper: i (d_t + sigma.grad) Psi_R - m Psi_L.  Lower: i (d_t - sigma.grad) Psi_L - m Psi_R.
  const WeylSpinor upper = (d_t.right + grad_right) * kI - center.left * Complex{m, 0.0};
  const WeylSpinor lower = (d_t.left - grad_left) * kI - center.right * Complex{m, 0.0};
  return std::sqrt(upper.norm2() + lower.norm2());
}

}  // namespace pilotwave
