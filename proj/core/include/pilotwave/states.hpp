#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pilotwave/spinor.hpp"

namespace pilotwave {

/// (2 pi)^{-3/2}, the plane-wave normalization used for every state.
inline constexpr double kPlaneWaveNorm = 0.063493635934240969;

enum class EnergySign { positive, negative };

/// One plane-wave component of a Weyl field.
///
/// `field` selects the Weyl equation (psi_R or psi_L). Positive-energy modes of psi_R carry
/// u_R(p) e^{-i|p|t}, negative-energy ones u_L(p) e^{+i|p|t}; psi_L is the mirror image.
struct Mode {
  ThreeMomentum p;
  Complex amplitude{1.0, 0.0};
  EnergySign energy = EnergySign::positive;
  Handedness field = Handedness::R;
};

/// Finite plane-wave superposition solving one Weyl equation.
class WeylWavefunction {
 public:
  /// Throws std::invalid_argument for an empty list, mixed fields, or |p| = 0.
  explicit WeylWavefunction(std::vector<Mode> modes);

  WeylSpinor operator()(double t, const Vec3& x) const;

  Handedness handedness() const { return field_; }
  std::span<const Mode> modes() const { return modes_; }

 private:
  struct Term {
    Vec3 p;
    double omega;       // e^{-i omega t}
    WeylSpinor spinor;  // amplitude * u * (2 pi)^{-3/2}
  };

  std::vector<Mode> modes_;
  std::vector<Term> terms_;
  Handedness field_;
};

WeylSpinor evaluate_weyl(const WeylWavefunction& wf, double t, const Vec3& x);

/// a * wf_a + b * wf_b as a single mode list. Both must solve the same Weyl equation.
WeylWavefunction superpose(const WeylWavefunction& wf_a, Complex a, const WeylWavefunction& wf_b,
                           Complex b);

/// Eigen-decomposition of the one-mode mass mixing matrix [[p, m], [m, -p]].
struct ZigzagCoefficients {
  double energy;  ///< E_p = sqrt(p^2 + m^2)
  double n_c;     ///< positive-energy Weyl weight
  double n_zeta;  ///< negative-energy Weyl weight
};

/// Throws std::invalid_argument("massless zig-zag degenerate") for m <= 0.
ZigzagCoefficients zigzag_coefficients(double p_mag, double m);

struct MomentumAmplitude {
  ThreeMomentum p;
  Complex alpha{1.0, 0.0};
};

/// Which Weyl component receives which coefficient.
///
/// `dirac_consistent` puts N_zeta on Psi_L and N_c on Psi_R, the only choice solving the Dirac
/// equation. `swapped` is the literal alternative labeling, kept to demonstrate that it does not.
enum class CoefficientLayout { dirac_consistent, swapped };

/// Zig-zag amplitudes at one point together with the interference term Im(Psi_L^dagger Psi_R).
struct ZigzagPoint {
  DiracSpinor psi;
  /// Evaluated pairwise, sum_{j<k} (l_j r_k - l_k r_j) Im(s_j^dagger s_k) over the per-mode
  /// spinors s, so it vanishes exactly whenever all modes share one coefficient ratio
  /// (in particular for a momentum eigenstate). Costs O(modes^2).
  double im_overlap;
};

/// Right-handed positive-energy electron written as positive- and negative-energy right-helicity
/// Weyl particles:
///   Psi_L = (2pi)^{-3/2} sum_p N_zeta(p) u_R(p) alpha(p) e^{-i E_p t + i p.x}
///   Psi_R = (2pi)^{-3/2} sum_p N_c(p)    u_R(p) alpha(p) e^{-i E_p t + i p.x}
/// Psi_L guides the zig beable and Psi_R the zag beable.
class ZigzagState {
 public:
  ZigzagState(double mass, std::vector<MomentumAmplitude> modes,
              CoefficientLayout layout = CoefficientLayout::dirac_consistent);

  /// (Psi_L, Psi_R) at (t, x).
  DiracSpinor operator()(double t, const Vec3& x) const;

  ZigzagPoint evaluate(double t, const Vec3& x) const;

  double mass() const { return mass_; }
  std::span<const MomentumAmplitude> modes() const { return modes_; }
  const ZigzagCoefficients& coefficients(std::size_t i) const { return coefficients_.at(i); }
  CoefficientLayout layout() const { return layout_; }

 private:
  struct Term {
    Vec3 p;
    double energy;
    WeylSpinor base;  // alpha * u_R * (2 pi)^{-3/2}
    double left;      // weight on Psi_L
    double right;     // weight on Psi_R
  };

  double mass_;
  std::vector<MomentumAmplitude> modes_;
  std::vector<ZigzagCoefficients> coefficients_;
  std::vector<Term> terms_;
  CoefficientLayout layout_;
};

ZigzagState make_zigzag_state(double m, std::vector<MomentumAmplitude> modes);

using DiracField = std::function<DiracSpinor(double t, const Vec3& x)>;

/// |(i gamma^mu d_mu - m) Psi| at (t, x) using second-order central differences of step h.
/// Throws std::invalid_argument for h <= 0.
double dirac_residual(const DiracField& psi, double m, double t, const Vec3& x, double h);

}  // namespace pilotwave
