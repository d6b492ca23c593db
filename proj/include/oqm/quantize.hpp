// quantize.hpp
//
// Quantized cat map on the N-site torus lattice q_j = j/N (hbar = 1/(2 pi N)),
// periodized coherent states, and projective openings: absorbing strips in
// position that turn the unitary propagator into M_open = P M (or M P).

#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oqm/classical.hpp"

namespace oqm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Hilbert-space dimension N >= 1.
class HilbertDim {
 public:
  explicit HilbertDim(int n);
  int value() const { return n_; }
  double hbar() const;
  friend bool operator==(const HilbertDim&, const HilbertDim&) = default;

 private:
  int n_;
};

enum class OpeningVariant { kSingle, kSymmetric };
enum class ProjectionOrder { kPM, kMP };

std::string to_string(OpeningVariant v);
std::string to_string(ProjectionOrder o);
OpeningVariant parse_variant(const std::string& s);
ProjectionOrder parse_order(const std::string& s);

/// Absorbing strip(s) in position.
///
/// single:    one strip [q0 - dq/2, q0 + dq/2), reduced mod 1.
/// symmetric: two strips of width dq/2 centred at q0 and 1 - q0.
struct OpeningSpec {
  OpeningVariant variant = OpeningVariant::kSingle;
  double q0 = 0.5;
  double delta_q = 0.0;

  /// Throws std::invalid_argument for q0 outside (0,1), dq outside [0,1) or
  /// overlapping symmetric strips.
  void validate() const;
  /// Strips as (lower edge, width), lower edge reduced into [0,1).
  std::vector<std::pair<double, double>> strips() const;
  /// "single,0.225,0.25"
  std::string to_string() const;
  static OpeningSpec parse(const std::string& text);
};

enum class PropagatorKind { kClosed, kOpened };

class Propagator {
 public:
  Propagator(HilbertDim dim, ComplexMatrix entries, PropagatorKind kind,
             std::optional<OpeningSpec> opening = std::nullopt,
             ProjectionOrder order = ProjectionOrder::kPM);

  HilbertDim dim() const { return dim_; }
  const ComplexMatrix& entries() const { return entries_; }
  PropagatorKind kind() const { return kind_; }
  const std::optional<OpeningSpec>& opening() const { return opening_; }
  ProjectionOrder order() const { return order_; }

  /// max |(M^dagger M - I)_{ij}|
  double unitarity_defect() const;
  double max_singular_value() const;

 private:
  HilbertDim dim_;
  ComplexMatrix entries_;
  PropagatorKind kind_;
  std::optional<OpeningSpec> opening_;
  ProjectionOrder order_;
};

/// Complex amplitudes on the position lattice.
struct StateVector {
  HilbertDim dim;
  ComplexVector amplitudes;

  double norm() const { return amplitudes.norm(); }
  StateVector normalized() const;
};

/// Diagonal 0/1 projector onto the complement of the opening.
struct Projector {
  HilbertDim dim;
  std::vector<std::uint8_t> keep;  // keep[j] == 0 iff site j is absorbed
  int open_channels = 0;           // O, number of absorbed sites

  ComplexMatrix dense() const;
};

/// M_kj = e^{i pi/4} N^{-1/2} exp[(2 pi i/N)(k^2 - jk + j^2)].
Propagator build_closed_cat(HilbertDim n);

/// Sites q_j = j/N inside a strip [lo, lo + w) (half-open, mod 1) are zeroed.
Projector build_projector(HilbertDim n, const OpeningSpec& opening);

/// P M (default) or M P. Throws std::invalid_argument if `closed` is not a
/// closed propagator.
Propagator open_map(const Propagator& closed, const OpeningSpec& opening,
                    ProjectionOrder order = ProjectionOrder::kPM);

/// Periodized Gaussian centred at `center`, |nu| <= 3 images, unit norm.
StateVector coherent_state(HilbertDim n, const classical::TorusPoint& center);

/// Classical map propagated by the build_closed_cat kernel in (q,p)
/// coordinates: (q,p) -> (2q + p, 3q + 2p). This is the transpose of
/// CatMap::arnold(), i.e. the same matrix acting on (p,q).
classical::CatMap kernel_dynamics();

}  // namespace oqm
