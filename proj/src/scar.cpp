#include "oqm/scar.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oqm::scar {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double x) {
  x = std::remainder(x, kTwoPi);
  return x <= -std::numbers::pi ? x + kTwoPi : x;
}

// 2 pi * frac(N * s) for an exact action s, without losing digits for large N.
double action_phase(int n, const classical::Action& s) {
  __int128 r = (static_cast<__int128>(n) * s.num) % s.den;
  if (r < 0) r += s.den;
  return kTwoPi * static_cast<double>(r) / static_cast<double>(s.den);
}

}  // namespace

int ehrenfest_truncation(HilbertDim n, double lyapunov) {
  if (!(lyapunov > 0.0)) throw std::invalid_argument("Lyapunov exponent must be positive");
  const double t = std::log(2.0 * std::numbers::pi * n.value()) / lyapunov;
  return std::max(1, static_cast<int>(std::floor(t + 0.5)));
}

ScarParams ScarParams::with_default_truncation(classical::PeriodicOrbit orbit, HilbertDim n,
                                               const classical::CatMap& dynamics) {
  ScarParams params;
  params.truncation = ehrenfest_truncation(n, classical::lyapunov_exponent(dynamics));
  params.orbit = std::move(orbit);
  params.dynamics = dynamics;
  params.n = n;
  return params;
}

StateVector tube_function(const classical::PeriodicOrbit& orbit, const classical::CatMap& dynamics, HilbertDim n) {
  const std::vector<double> partial = classical::accumulated_actions(dynamics, orbit);
  const double spread = classical::orbit_action(dynamics, orbit) / orbit.period;
  const int N = n.value();
  ComplexVector sum = ComplexVector::Zero(N);
  for (int k = 0; k < orbit.period; ++k) {
    const double phase = kTwoPi * N * (partial[k] - k * spread);
    sum += std::polar(1.0, phase) * coherent_state(n, orbit.points[k]).amplitudes;
  }
  return StateVector{n, sum}.normalized();
}

double metaplectic_phase(const Propagator& closed, const classical::PeriodicOrbit& orbit,
                         const classical::CatMap& dynamics) {
  const HilbertDim n = closed.dim();
  const auto& from = orbit.points[0];
  const auto& to = orbit.points[1 % orbit.period];
  const ComplexVector image = closed.entries() * coherent_state(n, from).amplitudes;
  const Complex amp = coherent_state(n, to).amplitudes.dot(image);
  if (std::abs(amp) < 1e-8) {
    throw std::domain_error("transition amplitude along the orbit vanishes; is the orbit an orbit of the kernel map?");
  }
  const classical::Action s = classical::step_action(dynamics, orbit.exact[0]);
  return wrap_angle(std::arg(amp) - action_phase(n.value(), s));
}

double step_phase(const ScarParams& params, const Propagator& closed) {
  const double action = kTwoPi * params.n.value() * params.orbit.action / params.orbit.period;
  if (params.phase == PhaseConvention::kActionOnly) return wrap_angle(action);
  return wrap_angle(action + metaplectic_phase(closed, params.orbit, params.dynamics));
}

StateVector scar_function(const ScarParams& params, const Propagator& closed) {
  if (closed.kind() != PropagatorKind::kClosed) throw std::invalid_argument("scar functions use the closed map");
  if (!(closed.dim() == params.n)) throw std::invalid_argument("scar parameters and propagator differ in N");
  if (params.truncation < 0) throw std::invalid_argument("truncation T must be >= 0");

  const StateVector tube = tube_function(params.orbit, params.dynamics, params.n);
  const int T = params.truncation;
  if (T == 0) return tube;

  const double theta = step_phase(params, closed);
  const ComplexMatrix& m = closed.entries();
  const ComplexMatrix m_adj = m.adjoint();
  ComplexVector sum = tube.amplitudes;  // l = 0, weight 1
  ComplexVector forward = tube.amplitudes;
  ComplexVector backward = tube.amplitudes;
  for (int l = 1; l <= T; ++l) {
    forward = m * forward;
    backward = m_adj * backward;
    const double w = std::cos(std::numbers::pi * l / (2.0 * T));
    sum += w * std::polar(1.0, -theta * l) * forward;
    sum += w * std::polar(1.0, theta * l) * backward;
  }
  return StateVector{params.n, sum}.normalized();
}

const char* to_string(Side side) {
  switch (side) {
    case Side::kRight:
      return "right";
    case Side::kLeft:
      return "left";
    case Side::kClosed:
      return "closed";
  }
  return "?";
}

OverlapResult overlap_scan(const StateVector& scar, const spectral::ResonanceSet& res, Side side) {
  if (!res.has_vectors()) throw std::invalid_argument("overlap scan needs eigenvectors");
  if (!(scar.dim == res.dim)) throw std::invalid_argument("overlap scan: dimension mismatch");
  const ComplexMatrix& vectors = side == Side::kLeft ? res.left : res.right;
  // Row i of V^dagger psi is <phi_i|psi>; its modulus equals |<psi|phi_i>|.
  const Eigen::VectorXd raw = (vectors.adjoint() * scar.amplitudes).cwiseAbs();

  OverlapResult out;
  out.side = side;
  out.all_overlaps.reserve(res.size());
  for (int r = 0; r < res.size(); ++r) {
    const int i = res.order[r];
    out.all_overlaps.push_back(raw(i));
    if (out.index < 0 || raw(i) > out.x_max) {
      out.x_max = raw(i);
      out.nu_max = r + 1;
      out.index = i;
    }
  }
  out.eigenvalue = res.eigenvalues[out.index];
  out.decay_rate = res.decay_rates[out.index];
  return out;
}

OverlapResult overlap_scan_closed(const StateVector& scar, const spectral::ResonanceSet& eigens) {
  if (!eigens.orthonormal) throw std::invalid_argument("closed overlap scan needs an orthonormal eigenbasis");
  OverlapResult out = overlap_scan(scar, eigens, Side::kRight);
  out.side = Side::kClosed;
  return out;
}

}  // namespace oqm::scar
