// spectral.hpp
//
// Dense non-Hermitian eigendecomposition of propagators and the resonance
// bookkeeping built on it: decay rates |z|^2 = exp(-Gamma), ascending-|z|
// order numbers, and the fraction of long-lived resonances with its
// power-law fit in N.

#pragma once

#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oqm/quantize.hpp"

namespace oqm::spectral {

/// Eigensolver failure (LAPACK info > 0 or a broken input).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decay-rate marker for |z| below 1e-300.
inline constexpr double kInfiniteDecay = std::numeric_limits<double>::infinity();

struct ResonanceSet {
  HilbertDim dim{1};
  std::vector<Complex> eigenvalues;
  // Column i pairs with eigenvalues[i]; both empty when vectors were not
  // requested. Right: M v = z v. Left: w^dagger M = z w^dagger. Unit 2-norm.
  ComplexMatrix right;
  ComplexMatrix left;
  std::vector<double> decay_rates;
  // order[r] = index of the (r+1)-th smallest |z|; ties by arg(z), then index.
  std::vector<int> order;
  // True when the vectors are an orthonormal eigenbasis (normal input);
  // left == right in that case.
  bool orthonormal = false;

  bool has_vectors() const { return right.size() > 0; }
  int size() const { return static_cast<int>(eigenvalues.size()); }
  /// 1-based position of eigenvalue `index` in ascending-|z| order.
  int order_number(int index) const;
};

struct DecomposeOptions {
  bool vectors = true;
  // Relative tolerance of ||A A^dagger - A^dagger A||_max used to pick the
  // Schur (orthonormal) route for normal matrices.
  double normality_tol = 1e-10;
  std::string label;  // reported in SolverError messages, e.g. the cache key
};

ResonanceSet decompose(const ComplexMatrix& m, const DecomposeOptions& options = {});
/// Recompute decay_rates and order from eigenvalues (used after deserializing).
void index_resonances(ResonanceSet& res);
ResonanceSet decompose(const Propagator& m, DecomposeOptions options = {});

/// Gamma = -2 ln|z|; 0 for |z| >= 1 - 1e-12, kInfiniteDecay for |z| < 1e-300.
/// Throws std::domain_error for |z| > 1 + 1e-8.
double decay_rate(Complex z);

/// #{i : Gamma_i < gamma_f} / N. Throws std::invalid_argument for gamma_f <= 0.
double weyl_fraction(const ResonanceSet& res, double gamma_f);
double weyl_fraction(std::span<const Complex> eigenvalues, double gamma_f);

struct WeylSample {
  int n = 0;
  double fraction = 0.0;
};

struct WeylFit {
  double gamma_f = 0.0;
  std::vector<WeylSample> samples;
  double a = 0.0;  // fraction ~ a N^-b
  double b = 0.0;
  double b_theory = 0.0;  // delta_q / lambda
  int excluded = 0;       // samples with fraction <= 0 left out of the fit
  std::vector<double> residuals;  // ln(fraction) - ln(a N^-b), fitted samples only
};

/// Least-squares line through (ln N, ln fraction). Needs >= 5 positive samples
/// (std::invalid_argument otherwise).
WeylFit fit_weyl_law(std::span<const WeylSample> samples, double delta_q, double lyapunov,
                     double gamma_f);

}  // namespace oqm::spectral
