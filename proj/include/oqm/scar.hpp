// scar.hpp
//
// Tube and scar functions of a periodic orbit, and overlap scans of a scar
// function against closed eigenfunctions or open-map resonances.
//
// Phase conventions. For an orbit x_0 -> x_1 -> ... of the kernel dynamics the
// quantum transition amplitude is
//   <coh(x_{k+1})| M |coh(x_k)> = r exp(i (2 pi N s_k + phi)),
// with s_k the exact step action (classical::step_action) and phi an
// N-independent metaplectic phase, identical for every step of a linear map.
// The tube function spreads the orbit action evenly over the period so that
// M |tube> ~ r exp(i theta) |tube>, theta = 2 pi N S_mu/p + phi, and the scar
// function averages M^l |tube> with weights cos(pi l / 2T) exp(-i theta l),
// which adds the l-terms coherently on the orbit.

#pragma once

#include <vector>

#include "oqm/classical.hpp"
#include "oqm/quantize.hpp"
#include "oqm/spectral.hpp"

namespace oqm::scar {

enum class PhaseConvention {
  kReturnAmplitude,  // theta includes the metaplectic phase phi (default)
  kActionOnly,       // theta = 2 pi N S_mu / p only
};

/// round(ln(2 pi N) / lambda) (half up), at least 1.
int ehrenfest_truncation(HilbertDim n, double lyapunov);

struct ScarParams {
  classical::PeriodicOrbit orbit;
  classical::CatMap dynamics = kernel_dynamics();
  HilbertDim n{1};
  int truncation = 1;  // T; 0 gives the bare tube function
  PhaseConvention phase = PhaseConvention::kReturnAmplitude;

  /// Default truncation from the Ehrenfest time.
  static ScarParams with_default_truncation(classical::PeriodicOrbit orbit, HilbertDim n,
                                            const classical::CatMap& dynamics = kernel_dynamics());
};

/// sum_k exp(2 pi i N (S_k - k S_mu/p)) |coh(x_k)>, unit norm.
StateVector tube_function(const classical::PeriodicOrbit& orbit, const classical::CatMap& dynamics, HilbertDim n);

/// phi in (-pi, pi], read off the first transition amplitude of the orbit.
double metaplectic_phase(const Propagator& closed, const classical::PeriodicOrbit& orbit,
                         const classical::CatMap& dynamics);

/// theta, the per-step phase compensated by the scar sum.
double step_phase(const ScarParams& params, const Propagator& closed);

/// Throws std::invalid_argument unless `closed` is a closed propagator of
/// dimension params.n.
StateVector scar_function(const ScarParams& params, const Propagator& closed);

enum class Side { kRight, kLeft, kClosed };
const char* to_string(Side side);

struct OverlapResult {
  double x_max = 0.0;
  int nu_max = 0;  // 1-based position of the maximizer in ascending |z|
  Side side = Side::kRight;
  std::vector<double> all_overlaps;  // |<scar|phi>|, listed in ascending-|z| order
  int index = -1;                    // maximizer as a raw eigenvalue index
  Complex eigenvalue{};
  double decay_rate = 0.0;
};

/// |<scar|phi_i>| over the right or left vectors of `res`.
OverlapResult overlap_scan(const StateVector& scar, const spectral::ResonanceSet& res, Side side);

/// Same against an orthonormal (closed-map) eigenbasis; throws
/// std::invalid_argument if `eigens` is not orthonormal.
OverlapResult overlap_scan_closed(const StateVector& scar, const spectral::ResonanceSet& eigens);

}  // namespace oqm::scar
