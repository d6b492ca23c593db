#include "oqm/quantize.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace oqm {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Strip edges closer than this (in lattice units) to a site count as hitting it.
constexpr double kEdgeSnap = 1e-9;

}  // namespace

HilbertDim::HilbertDim(int n) : n_(n) {
  if (n < 1) throw std::invalid_argument("Hilbert dimension must be >= 1, got " + std::to_string(n));
}

double HilbertDim::hbar() const { return 1.0 / (kTwoPi * n_); }

std::string to_string(OpeningVariant v) { return v == OpeningVariant::kSingle ? "single" : "symmetric"; }
std::string to_string(ProjectionOrder o) { return o == ProjectionOrder::kPM ? "PM" : "MP"; }

OpeningVariant parse_variant(const std::string& s) {
  if (s == "single" || s == "a") return OpeningVariant::kSingle;
  if (s == "symmetric" || s == "b") return OpeningVariant::kSymmetric;
  throw std::invalid_argument("unknown opening variant '" + s + "' (single|symmetric)");
}

ProjectionOrder parse_order(const std::string& s) {
  if (s == "PM") return ProjectionOrder::kPM;
  if (s == "MP") return ProjectionOrder::kMP;
  throw std::invalid_argument("unknown projection order '" + s + "' (PM|MP)");
}

void OpeningSpec::validate() const {
  if (!(q0 > 0.0 && q0 < 1.0)) throw std::invalid_argument("opening q0 must lie in (0,1)");
  if (!(delta_q >= 0.0 && delta_q < 1.0)) throw std::invalid_argument("opening delta_q must lie in [0,1)");
  if (variant == OpeningVariant::kSymmetric && delta_q > 0.0) {
    double gap = std::fabs(1.0 - 2.0 * q0);
    gap = std::min(gap, 1.0 - gap);
    if (gap < delta_q / 2.0 - 1e-12) {
      throw std::invalid_argument("symmetric strips at q0=" + std::to_string(q0) + " overlap for delta_q=" +
                                  std::to_string(delta_q));
    }
  }
}

std::vector<std::pair<double, double>> OpeningSpec::strips() const {
  validate();
  std::vector<std::pair<double, double>> out;
  if (delta_q == 0.0) return out;
  auto lower = [](double x) { return x - std::floor(x); };
  if (variant == OpeningVariant::kSingle) {
    out.emplace_back(lower(q0 - delta_q / 2.0), delta_q);
  } else {
    out.emplace_back(lower(q0 - delta_q / 4.0), delta_q / 2.0);
    out.emplace_back(lower(1.0 - q0 - delta_q / 4.0), delta_q / 2.0);
  }
  return out;
}

std::string OpeningSpec::to_string() const {
  // Shortest round-trip form: "single,0.225,0.25".
  auto shortest = [](double x) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), end);
  };
  return oqm::to_string(variant) + "," + shortest(q0) + "," + shortest(delta_q);
}

OpeningSpec OpeningSpec::parse(const std::string& text) {
  std::istringstream is(text);
  std::string variant, q0, dq;
  if (!std::getline(is, variant, ',') || !std::getline(is, q0, ',') || !std::getline(is, dq)) {
    throw std::invalid_argument("opening must be 'variant,q0,dq', got '" + text + "'");
  }
  OpeningSpec spec;
  spec.variant = parse_variant(variant);
  try {
    std::size_t used = 0;
    spec.q0 = std::stod(q0, &used);
    if (used != q0.size()) throw std::invalid_argument(q0);
    spec.delta_q = std::stod(dq, &used);
    if (used != dq.size()) throw std::invalid_argument(dq);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("opening must be 'variant,q0,dq', got '" + text + "'");
  }
  spec.validate();
  return spec;
}

Propagator::Propagator(HilbertDim dim, ComplexMatrix entries, PropagatorKind kind,
                       std::optional<OpeningSpec> opening, ProjectionOrder order)
    : dim_(dim), entries_(std::move(entries)), kind_(kind), opening_(std::move(opening)), order_(order) {
  if (entries_.rows() != dim_.value() || entries_.cols() != dim_.value()) {
    throw std::invalid_argument("propagator entries do not match dimension " + std::to_string(dim_.value()));
  }
}

double Propagator::unitarity_defect() const {
  const ComplexMatrix g = entries_.adjoint() * entries_;
  return (g - ComplexMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double Propagator::max_singular_value() const {
  Eigen::BDCSVD<ComplexMatrix> svd(entries_);
  return svd.singularValues()(0);
}

StateVector StateVector::normalized() const {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("cannot normalize a zero or non-finite state");
  return {dim, amplitudes / n};
}

ComplexMatrix Projector::dense() const {
  ComplexMatrix p = ComplexMatrix::Zero(dim.value(), dim.value());
  for (int j = 0; j < dim.value(); ++j) p(j, j) = keep[j] ? 1.0 : 0.0;
  return p;
}

Propagator build_closed_cat(HilbertDim n) {
  const int N = n.value();
  // The exponent only matters mod N, so tabulate the N roots of unity.
  std::vector<Complex> roots(N);
  for (int m = 0; m < N; ++m) roots[m] = std::polar(1.0, kTwoPi * m / N);
  const Complex prefactor = std::polar(1.0 / std::sqrt(static_cast<double>(N)), std::numbers::pi / 4.0);

  ComplexMatrix m(N, N);
  for (std::int64_t j = 0; j < N; ++j) {
    for (std::int64_t k = 0; k < N; ++k) {
      std::int64_t e = (k * k - j * k + j * j) % N;
      m(k, j) = prefactor * roots[e];
    }
  }
  return Propagator(n, std::move(m), PropagatorKind::kClosed);
}

Projector build_projector(HilbertDim n, const OpeningSpec& opening) {
  const int N = n.value();
  Projector proj{n, std::vector<std::uint8_t>(N, 1), 0};
  for (const auto& [lo, width] : opening.strips()) {
    for (int j = 0; j < N; ++j) {
      double t = std::fmod(j - lo * N, static_cast<double>(N));
      if (t < 0) t += N;
      if (std::fabs(t - std::round(t)) < kEdgeSnap) t = std::round(t);
      if (t >= N) t -= N;
      if (t < width * N - kEdgeSnap) proj.keep[j] = 0;
    }
  }
  for (auto k : proj.keep) proj.open_channels += k ? 0 : 1;
  return proj;
}

Propagator open_map(const Propagator& closed, const OpeningSpec& opening, ProjectionOrder order) {
  if (closed.kind() != PropagatorKind::kClosed) {
    throw std::invalid_argument("open_map expects a closed propagator");
  }
  const Projector proj = build_projector(closed.dim(), opening);
  ComplexMatrix m = closed.entries();
  for (int j = 0; j < closed.dim().value(); ++j) {
    if (proj.keep[j]) continue;
    if (order == ProjectionOrder::kPM) {
      m.row(j).setZero();
    } else {
      m.col(j).setZero();
    }
  }
  return Propagator(closed.dim(), std::move(m), PropagatorKind::kOpened, opening, order);
}

StateVector coherent_state(HilbertDim n, const classical::TorusPoint& center) {
  const int N = n.value();
  const classical::TorusPoint c = classical::wrap(center.q, center.p);
  ComplexVector amp = ComplexVector::Zero(N);
  for (int j = 0; j < N; ++j) {
    const double q = static_cast<double>(j) / N;
    for (int nu = -3; nu <= 3; ++nu) {
      const double x = q - c.q + nu;
      amp(j) += std::polar(std::exp(-std::numbers::pi * N * x * x), kTwoPi * N * c.p * x);
    }
  }
  return StateVector{n, amp}.normalized();
}

classical::CatMap kernel_dynamics() { return classical::CatMap::arnold().transposed(); }

}  // namespace oqm
