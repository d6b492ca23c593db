// classical.hpp
//
// Classical dynamics of hyperbolic cat maps on the unit 2-torus: iteration,
// exact periodic-point enumeration, orbit actions, Lyapunov exponent and the
// stable/unstable directions.
//
// Periodic points are handled with exact rational arithmetic: every point of
// period n has coordinates (u/D, v/D) with D = |det(A^n - I)|, so orbits are
// carried around as integer numerators over a shared denominator.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace oqm::classical {

/// Phase-space point reduced into [0,1)^2.
struct TorusPoint {
  double q = 0.0;
  double p = 0.0;

  friend bool operator==(const TorusPoint&, const TorusPoint&) = default;
};

/// Reduce both coordinates mod 1 into [0,1); values within 1e-15 of 1 snap to 0.
TorusPoint wrap(double q, double p);

/// Euclidean distance on the torus (shortest image).
double torus_distance(const TorusPoint& x, const TorusPoint& y);

/// Exact torus point (q_num/den, p_num/den) with numerators in [0, den).
struct RationalPoint {
  std::int64_t q_num = 0;
  std::int64_t p_num = 0;
  std::int64_t den = 1;

  TorusPoint to_point() const;
  friend bool operator==(const RationalPoint&, const RationalPoint&) = default;
};

/// Integer unimodular 2x2 matrix [[a,b],[c,d]] acting on column vectors (q,p).
class CatMap {
 public:
  /// Throws std::invalid_argument unless a*d - b*c == 1.
  CatMap(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d);

  /// [[2,3],[1,2]].
  static CatMap arnold();

  std::int64_t a() const { return a_; }
  std::int64_t b() const { return b_; }
  std::int64_t c() const { return c_; }
  std::int64_t d() const { return d_; }
  std::int64_t trace() const { return a_ + d_; }
  bool is_hyperbolic() const;

  CatMap inverse() const { return CatMap(d_, -b_, -c_, a_); }
  CatMap transposed() const { return CatMap(a_, c_, b_, d_); }
  /// Matrix power; n may be negative.
  CatMap power(int n) const;

  /// One application to the lifted (unreduced) plane point.
  std::array<double, 2> apply_lifted(double q, double p) const;
  TorusPoint apply(const TorusPoint& x) const;
  RationalPoint apply(const RationalPoint& x) const;

  std::string to_string() const;
  friend bool operator==(const CatMap&, const CatMap&) = default;

 private:
  std::int64_t a_, b_, c_, d_;
};

/// M^steps x mod 1. Negative steps use the exact integer inverse.
TorusPoint iterate(const CatMap& map, const TorusPoint& x, long steps);
RationalPoint iterate(const CatMap& map, const RationalPoint& x, long steps);

struct PeriodicOrbit {
  std::vector<RationalPoint> exact;  // exact[k+1] = map(exact[k]), cyclic
  std::vector<TorusPoint> points;    // same points in floating point
  int period = 0;
  double action = 0.0;    // S_mu reduced into [0,1), see orbit_action
  double lyapunov = 0.0;  // per step
};

/// |det(M^n - I)|, the number of points fixed by M^n. Requires n >= 1 and a
/// hyperbolic map.
std::int64_t fixed_point_count(const CatMap& map, int n);

/// All points fixed by M^n (every period dividing n), grouped into orbits.
/// Each orbit starts at its lexicographically smallest point and orbits are
/// sorted by that point. Throws std::invalid_argument for n < 1 or a
/// non-hyperbolic map, std::length_error when the count exceeds 5e6.
std::vector<PeriodicOrbit> periodic_points(const CatMap& map, int n);

/// ln of the larger eigenvalue modulus. Throws std::domain_error unless
/// |trace| > 2.
double lyapunov_exponent(const CatMap& map);

struct ManifoldDirections {
  std::array<double, 2> unstable;  // unit vectors, first nonzero component > 0
  std::array<double, 2> stable;
  double unstable_expansion = 0.0;  // |eigenvalue| > 1
};

/// Eigenvector directions of the integer matrix. Throws std::domain_error
/// for non-hyperbolic maps.
ManifoldDirections manifold_directions(const CatMap& map);

/// Exact one-step action from x, as a fraction num/den (not reduced mod 1).
///
/// Uses the type-1 generating function F(q,q') = (a q^2 - 2 q q' + d q'^2)/(2b)
/// evaluated at the lifted image q' = a q + b p, minus the momentum winding
/// correction n q' with n = floor(c q + d p). exp(2 pi i N s) then matches the
/// phase of the quantum transition amplitude <coh(Mx)|U|coh(x)> up to an
/// N-independent metaplectic constant. Requires b != 0.
struct Action {
  __int128 num = 0;
  __int128 den = 1;
  double value() const;
};
Action step_action(const CatMap& map, const RationalPoint& x);

/// S_mu: sum of step actions around the orbit, reduced into [0,1).
/// Throws std::invalid_argument when the orbit is not an orbit of `map`.
double orbit_action(const CatMap& map, const PeriodicOrbit& orbit);

/// Accumulated actions S_k from points[0] to points[k], k = 0..period-1
/// (S_0 = 0), not reduced.
std::vector<double> accumulated_actions(const CatMap& map, const PeriodicOrbit& orbit);

/// The orbit through `x` if x is (within tol) a periodic point of period
/// <= max_period; the returned orbit starts at the snapped point.
/// Throws std::invalid_argument otherwise.
PeriodicOrbit find_orbit(const CatMap& map, const TorusPoint& x, int max_period = 6,
                         double tol = 1e-9);

}  // namespace oqm::classical
