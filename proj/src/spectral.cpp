#include "oqm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace oqm::spectral {
namespace {

constexpr double kModulusSlack = 1e-8;
// Moduli this close to 1 are roundoff on a unitary spectrum and give Gamma = 0.
constexpr double kUnitModulus = 1e-12;

double clamped_decay(Complex z) {
  const double r = std::abs(z);
  if (r > 1.0 + kModulusSlack) return std::numeric_limits<double>::quiet_NaN();
  if (r < 1e-300) return kInfiniteDecay;
  if (r >= 1.0 - kUnitModulus) return 0.0;
  return std::max(0.0, -2.0 * std::log(r));
}

bool is_normal(const ComplexMatrix& m, double tol) {
  const ComplexMatrix mh = m.adjoint();
  const ComplexMatrix lhs = m * mh;
  const ComplexMatrix rhs = mh * m;
  const double scale = std::max(1e-300, rhs.diagonal().real().maxCoeff());
  return (lhs - rhs).cwiseAbs().maxCoeff() <= tol * scale;
}

void fail(const std::string& routine, lapack_int info, const DecomposeOptions& opt, int n) {
  throw SolverError(routine + " failed (info=" + std::to_string(info) + ") for N=" + std::to_string(n) +
                    (opt.label.empty() ? "" : " [" + opt.label + "]"));
}

}  // namespace

int ResonanceSet::order_number(int index) const {
  for (int r = 0; r < static_cast<int>(order.size()); ++r) {
    if (order[r] == index) return r + 1;
  }
  throw std::out_of_range("eigenvalue index " + std::to_string(index) + " not in ordering");
}

ResonanceSet decompose(const ComplexMatrix& m, const DecomposeOptions& options) {
  if (m.rows() != m.cols() || m.rows() == 0) throw SolverError("decompose expects a non-empty square matrix");
  if (!m.allFinite()) throw SolverError("decompose: matrix has non-finite entries" +
                                        (options.label.empty() ? "" : " [" + options.label + "]"));
  const int n = static_cast<int>(m.rows());
  ResonanceSet res;
  res.dim = HilbertDim(n);
  res.eigenvalues.resize(n);

  ComplexMatrix work = m;
  if (options.vectors && is_normal(m, options.normality_tol)) {
    // Normal input: the Schur vectors are an orthonormal eigenbasis, also
    // inside degenerate eigenspaces.
    ComplexMatrix schur(n, n);
    lapack_int sdim = 0;
    const lapack_int info = LAPACKE_zgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, work.data(), n, &sdim,
                                          res.eigenvalues.data(), schur.data(), n);
    if (info != 0) fail("zgees", info, options, n);
    res.right = schur;
    res.left = std::move(schur);
    res.orthonormal = true;
  } else if (options.vectors) {
    ComplexMatrix vl(n, n), vr(n, n);
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'V', 'V', n, work.data(), n,
                                          res.eigenvalues.data(), vl.data(), n, vr.data(), n);
    if (info != 0) fail("zgeev", info, options, n);
    vl.colwise().normalize();
    vr.colwise().normalize();
    res.right = std::move(vr);
    res.left = std::move(vl);
  } else {
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, work.data(), n,
                                          res.eigenvalues.data(), nullptr, n, nullptr, n);
    if (info != 0) fail("zgeev", info, options, n);
  }

  index_resonances(res);
  return res;
}

void index_resonances(ResonanceSet& res) {
  const int n = res.size();
  res.decay_rates.resize(n);
  std::transform(res.eigenvalues.begin(), res.eigenvalues.end(), res.decay_rates.begin(), clamped_decay);

  res.order.resize(n);
  std::iota(res.order.begin(), res.order.end(), 0);
  std::vector<double> mod(n), arg(n);
  for (int i = 0; i < n; ++i) {
    mod[i] = std::abs(res.eigenvalues[i]);
    arg[i] = std::arg(res.eigenvalues[i]);
  }
  std::sort(res.order.begin(), res.order.end(), [&](int i, int j) {
    if (mod[i] != mod[j]) return mod[i] < mod[j];
    if (arg[i] != arg[j]) return arg[i] < arg[j];
    return i < j;
  });
}

ResonanceSet decompose(const Propagator& m, DecomposeOptions options) {
  if (options.label.empty()) {
    options.label = m.opening() ? m.opening()->to_string() + "," + to_string(m.order()) : "closed";
  }
  return decompose(m.entries(), options);
}

double decay_rate(Complex z) {
  if (std::abs(z) > 1.0 + kModulusSlack) {
    throw std::domain_error("decay_rate: |z| = " + std::to_string(std::abs(z)) + " exceeds 1");
  }
  return clamped_decay(z);
}

double weyl_fraction(std::span<const Complex> eigenvalues, double gamma_f) {
  if (!(gamma_f > 0.0)) throw std::invalid_argument("gamma_f must be positive");
  if (eigenvalues.empty()) return 0.0;
  std::size_t count = 0;
  for (const Complex& z : eigenvalues) {
    if (clamped_decay(z) < gamma_f) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(eigenvalues.size());
}

double weyl_fraction(const ResonanceSet& res, double gamma_f) {
  return weyl_fraction(std::span<const Complex>(res.eigenvalues), gamma_f);
}

WeylFit fit_weyl_law(std::span<const WeylSample> samples, double delta_q, double lyapunov, double gamma_f) {
  WeylFit fit;
  fit.gamma_f = gamma_f;
  fit.samples.assign(samples.begin(), samples.end());
  fit.b_theory = delta_q / lyapunov;

  std::vector<double> x, y;
  for (const auto& s : samples) {
    if (!(s.fraction > 0.0) || s.n < 1) {
      ++fit.excluded;
      continue;
    }
    x.push_back(std::log(static_cast<double>(s.n)));
    y.push_back(std::log(s.fraction));
  }
  if (x.size() < 5) {
    throw std::invalid_argument("Weyl fit needs at least 5 positive samples, got " + std::to_string(x.size()));
  }
  const double k = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("Weyl fit needs at least two distinct N");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  fit.b = -slope;
  fit.a = std::exp(intercept);
  for (std::size_t i = 0; i < x.size(); ++i) fit.residuals.push_back(y[i] - (intercept + slope * x[i]));
  return fit;
}

}  // namespace oqm::spectral
