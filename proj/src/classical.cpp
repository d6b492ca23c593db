#include "oqm/classical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace oqm::classical {
namespace {

using i128 = __int128;

std::int64_t mod_pos(i128 x, std::int64_t m) {
  i128 r = x % m;
  if (r < 0) r += m;
  return static_cast<std::int64_t>(r);
}

i128 floor_div(i128 x, i128 m) {
  i128 q = x / m;
  if ((x % m != 0) && ((x < 0) != (m < 0))) --q;
  return q;
}

i128 gcd128(i128 x, i128 y) {
  if (x < 0) x = -x;
  if (y < 0) y = -y;
  while (y != 0) {
    i128 t = x % y;
    x = y;
    y = t;
  }
  return x;
}

bool lex_less(const RationalPoint& x, const RationalPoint& y) {
  if (x.q_num != y.q_num) return x.q_num < y.q_num;
  return x.p_num < y.p_num;
}

void require_hyperbolic(const CatMap& map) {
  if (!map.is_hyperbolic()) {
    throw std::domain_error("cat map " + map.to_string() + " is not hyperbolic (|trace| <= 2)");
  }
}

}  // namespace

TorusPoint wrap(double q, double p) {
  auto reduce = [](double x) {
    double r = x - std::floor(x);
    if (r >= 1.0 - 1e-15) r = 0.0;
    return r;
  };
  return {reduce(q), reduce(p)};
}

double torus_distance(const TorusPoint& x, const TorusPoint& y) {
  auto d1 = [](double u, double v) {
    double d = std::fabs(u - v);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
  };
  return std::hypot(d1(x.q, y.q), d1(x.p, y.p));
}

TorusPoint RationalPoint::to_point() const {
  return wrap(static_cast<double>(q_num) / static_cast<double>(den),
              static_cast<double>(p_num) / static_cast<double>(den));
}

CatMap::CatMap(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d)
    : a_(a), b_(b), c_(c), d_(d) {
  if (a * d - b * c != 1) {
    throw std::invalid_argument("cat map " + to_string() + " must have determinant 1");
  }
}

CatMap CatMap::arnold() { return CatMap(2, 3, 1, 2); }

bool CatMap::is_hyperbolic() const { return std::llabs(trace()) > 2; }

CatMap CatMap::power(int n) const {
  CatMap base = n < 0 ? inverse() : *this;
  std::int64_t r[4] = {1, 0, 0, 1};
  for (int k = 0; k < std::abs(n); ++k) {
    const std::int64_t t[4] = {r[0] * base.a_ + r[1] * base.c_, r[0] * base.b_ + r[1] * base.d_,
                               r[2] * base.a_ + r[3] * base.c_, r[2] * base.b_ + r[3] * base.d_};
    std::copy(t, t + 4, r);
  }
  return CatMap(r[0], r[1], r[2], r[3]);
}

std::array<double, 2> CatMap::apply_lifted(double q, double p) const {
  return {static_cast<double>(a_) * q + static_cast<double>(b_) * p,
          static_cast<double>(c_) * q + static_cast<double>(d_) * p};
}

TorusPoint CatMap::apply(const TorusPoint& x) const {
  const auto y = apply_lifted(x.q, x.p);
  return wrap(y[0], y[1]);
}

RationalPoint CatMap::apply(const RationalPoint& x) const {
  const i128 u = x.q_num, v = x.p_num;
  return {mod_pos(a_ * u + b_ * v, x.den), mod_pos(c_ * u + d_ * v, x.den), x.den};
}

std::string CatMap::to_string() const {
  std::ostringstream os;
  os << "[[" << a_ << "," << b_ << "],[" << c_ << "," << d_ << "]]";
  return os.str();
}

TorusPoint iterate(const CatMap& map, const TorusPoint& x, long steps) {
  const CatMap step = steps < 0 ? map.inverse() : map;
  TorusPoint y = wrap(x.q, x.p);
  for (long k = 0; k < std::labs(steps); ++k) y = step.apply(y);
  return y;
}

RationalPoint iterate(const CatMap& map, const RationalPoint& x, long steps) {
  const CatMap step = steps < 0 ? map.inverse() : map;
  RationalPoint y{mod_pos(x.q_num, x.den), mod_pos(x.p_num, x.den), x.den};
  for (long k = 0; k < std::labs(steps); ++k) y = step.apply(y);
  return y;
}

std::int64_t fixed_point_count(const CatMap& map, int n) {
  if (n < 1) throw std::invalid_argument("period must be >= 1");
  require_hyperbolic(map);
  const CatMap m = map.power(n);
  const std::int64_t det = (m.a() - 1) * (m.d() - 1) - m.b() * m.c();
  return std::llabs(det);
}

std::vector<PeriodicOrbit> periodic_points(const CatMap& map, int n) {
  const std::int64_t den = fixed_point_count(map, n);
  if (den > 5'000'000) {
    throw std::length_error("period " + std::to_string(n) + " has " + std::to_string(den) +
                            " fixed points; enumeration capped at 5e6");
  }
  const CatMap m = map.power(n);
  // Solutions of (M^n - I) x in Z^2 are x = adj(M^n - I) k / det, i.e. the
  // subgroup of (Z/den)^2 generated by the columns of the adjugate.
  const std::int64_t b11 = m.a() - 1, b12 = m.b(), b21 = m.c(), b22 = m.d() - 1;
  const std::array<std::array<std::int64_t, 2>, 2> gens = {
      {{mod_pos(b22, den), mod_pos(-b21, den)}, {mod_pos(-b12, den), mod_pos(b11, den)}}};

  std::unordered_set<std::int64_t> seen;
  std::vector<RationalPoint> points;
  std::vector<RationalPoint> frontier{{0, 0, den}};
  seen.insert(0);
  while (!frontier.empty()) {
    RationalPoint x = frontier.back();
    frontier.pop_back();
    points.push_back(x);
    for (const auto& g : gens) {
      RationalPoint y{(x.q_num + g[0]) % den, (x.p_num + g[1]) % den, den};
      if (seen.insert(y.q_num * den + y.p_num).second) frontier.push_back(y);
    }
  }
  if (static_cast<std::int64_t>(points.size()) != den) {
    throw std::logic_error("periodic point enumeration found " + std::to_string(points.size()) +
                           " points, expected " + std::to_string(den));
  }
  std::sort(points.begin(), points.end(), lex_less);

  const double lyap = lyapunov_exponent(map);
  std::unordered_set<std::int64_t> assigned;
  std::vector<PeriodicOrbit> orbits;
  for (const auto& start : points) {
    if (assigned.count(start.q_num * den + start.p_num)) continue;
    PeriodicOrbit orbit;
    RationalPoint x = start;
    do {
      assigned.insert(x.q_num * den + x.p_num);
      orbit.exact.push_back(x);
      orbit.points.push_back(x.to_point());
      x = map.apply(x);
    } while (!(x == start));
    orbit.period = static_cast<int>(orbit.exact.size());
    orbit.lyapunov = lyap;
    if (map.b() != 0) orbit.action = orbit_action(map, orbit);
    orbits.push_back(std::move(orbit));
  }
  return orbits;
}

double lyapunov_exponent(const CatMap& map) {
  require_hyperbolic(map);
  const double t = std::fabs(static_cast<double>(map.trace()));
  return std::log(0.5 * (t + std::sqrt(t * t - 4.0)));
}

ManifoldDirections manifold_directions(const CatMap& map) {
  require_hyperbolic(map);
  const double t = static_cast<double>(map.trace());
  const double sign = t > 0 ? 1.0 : -1.0;
  const double lu = sign * 0.5 * (std::fabs(t) + std::sqrt(t * t - 4.0));
  const double ls = 1.0 / lu;
  const double a = static_cast<double>(map.a()), b = static_cast<double>(map.b());
  const double c = static_cast<double>(map.c()), d = static_cast<double>(map.d());

  auto eigvec = [&](double lam) {
    std::array<double, 2> v = std::fabs(b) >= std::fabs(c) ? std::array<double, 2>{b, lam - a}
                                                             : std::array<double, 2>{lam - d, c};
    const double norm = std::hypot(v[0], v[1]);
    v[0] /= norm;
    v[1] /= norm;
    const double lead = v[0] != 0.0 ? v[0] : v[1];
    if (lead < 0) {
      v[0] = -v[0];
      v[1] = -v[1];
    }
    return v;
  };
  return {eigvec(lu), eigvec(ls), std::fabs(lu)};
}

double Action::value() const { return static_cast<double>(num) / static_cast<double>(den); }

Action step_action(const CatMap& map, const RationalPoint& x) {
  if (map.b() == 0) {
    throw std::invalid_argument("map " + map.to_string() + " has no type-1 generating function (b = 0)");
  }
  const i128 D = x.den, u = x.q_num, v = x.p_num;
  const i128 a = map.a(), b = map.b(), c = map.c(), d = map.d();
  const i128 U = a * u + b * v;  // lifted q' times D
  const i128 P = c * u + d * v;  // lifted p' times D
  const i128 winding = floor_div(P, D);
  Action s;
  s.num = a * u * u - 2 * u * U + d * U * U - 2 * b * winding * U * D;
  s.den = 2 * b * D * D;
  if (s.den < 0) {
    s.num = -s.num;
    s.den = -s.den;
  }
  return s;
}

namespace {

void check_orbit(const CatMap& map, const PeriodicOrbit& orbit) {
  if (orbit.exact.empty() || static_cast<int>(orbit.exact.size()) != orbit.period) {
    throw std::invalid_argument("malformed periodic orbit");
  }
  for (int k = 0; k < orbit.period; ++k) {
    if (!(map.apply(orbit.exact[k]) == orbit.exact[(k + 1) % orbit.period])) {
      throw std::invalid_argument("orbit is not an orbit of map " + map.to_string());
    }
  }
}

// Sum of step actions from points[0] up to (excluding) points[upto], exact.
Action partial_action(const CatMap& map, const PeriodicOrbit& orbit, int upto) {
  Action total{0, 1};
  for (int k = 0; k < upto; ++k) {
    const Action s = step_action(map, orbit.exact[k]);
    const i128 g = gcd128(total.den, s.den);
    total.num = total.num * (s.den / g) + s.num * (total.den / g);
    total.den = total.den / g * s.den;
    const i128 h = gcd128(total.num, total.den);
    if (h > 1) {
      total.num /= h;
      total.den /= h;
    }
  }
  return total;
}

double reduce_unit(const Action& s) {
  i128 r = s.num % s.den;
  if (r < 0) r += s.den;
  return static_cast<double>(r) / static_cast<double>(s.den);
}

}  // namespace

double orbit_action(const CatMap& map, const PeriodicOrbit& orbit) {
  check_orbit(map, orbit);
  return reduce_unit(partial_action(map, orbit, orbit.period));
}

std::vector<double> accumulated_actions(const CatMap& map, const PeriodicOrbit& orbit) {
  check_orbit(map, orbit);
  std::vector<double> out;
  out.reserve(orbit.period);
  for (int k = 0; k < orbit.period; ++k) out.push_back(reduce_unit(partial_action(map, orbit, k)));
  return out;
}

PeriodicOrbit find_orbit(const CatMap& map, const TorusPoint& x, int max_period, double tol) {
  const TorusPoint target = wrap(x.q, x.p);
  for (int n = 1; n <= max_period; ++n) {
    for (const auto& orbit : periodic_points(map, n)) {
      if (orbit.period != n) continue;
      for (int k = 0; k < orbit.period; ++k) {
        if (torus_distance(orbit.points[k], target) > tol) continue;
        PeriodicOrbit rotated = orbit;
        std::rotate(rotated.exact.begin(), rotated.exact.begin() + k, rotated.exact.end());
        std::rotate(rotated.points.begin(), rotated.points.begin() + k, rotated.points.end());
        return rotated;
      }
    }
  }
  std::ostringstream os;
  os << "(" << target.q << "," << target.p << ") is not a periodic point of " << map.to_string()
     << " with period <= " << max_period;
  throw std::invalid_argument(os.str());
}

}  // namespace oqm::classical
