// phasespace.hpp
//
// Husimi portraits |<coh(q,p)|psi>|^2 on a uniform cell-centred grid, their
// log-scale version, invariant-manifold overlays, and the plain-text formats
// used to hand them to plotting tools.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oqm/classical.hpp"
#include "oqm/quantize.hpp"

namespace oqm::phasespace {

enum class Scale { kLinear, kLog };

inline constexpr int kDefaultResolution = 128;
/// Offset added before taking the log, relative to the max-normalized grid.
inline constexpr double kLogEpsilon = 1e-12;

struct HusimiGrid {
  int resolution = 0;          // G
  std::vector<double> values;  // values[a * G + b] at q_a = (a+1/2)/G, p_b = (b+1/2)/G
  Scale scale = Scale::kLinear;
  std::string label;
  int n = 0;                // Hilbert dimension of the source state
  double raw_max = 0.0;     // maximum before normalization
  double raw_mass = 0.0;    // sum of raw cell values

  double at(int a, int b) const { return values[static_cast<std::size_t>(a) * resolution + b]; }
  double q_center(int a) const { return (a + 0.5) / resolution; }
  double p_center(int b) const { return (b + 0.5) / resolution; }
  /// Cell (a, b) holding the largest value (first in row-major order on ties).
  std::pair<int, int> argmax() const;
};

/// Linear grid normalized to max 1. Throws std::invalid_argument for G < 1.
HusimiGrid husimi(const StateVector& state, int resolution = kDefaultResolution, std::string label = {});

/// ln(value + kLogEpsilon) of a linear grid.
HusimiGrid to_log_scale(const HusimiGrid& linear);

enum class Branch { kUnstable, kStable };

struct Polyline {
  Branch branch = Branch::kUnstable;
  std::vector<classical::TorusPoint> vertices;
};

/// Segments along the unstable and stable directions through every orbit
/// point, `length` of arclength per branch (half on each side), split where
/// the line wraps around the torus. All vertices lie in [0,1)^2.
std::vector<Polyline> manifold_overlay(const classical::PeriodicOrbit& orbit, const classical::CatMap& map,
                                       double length);

/// One line per p row (b = 0 first), G space-separated values over q.
void write_grid(const std::filesystem::path& path, const HusimiGrid& grid);
/// JSON sidecar: n, label, scale, resolution, log_epsilon, raw_max, raw_mass.
void write_grid_metadata(const std::filesystem::path& path, const HusimiGrid& grid);
HusimiGrid read_grid(const std::filesystem::path& grid_path, const std::filesystem::path& metadata_path);

/// "q p" per line, blank line between polylines, '#' comment naming the branch.
void write_polylines(const std::filesystem::path& path, const std::vector<Polyline>& lines);

/// '# oqm-state N=<N> label=<label>' header, then "re im" per lattice site.
void write_state(const std::filesystem::path& path, const StateVector& state, const std::string& label);
StateVector read_state(const std::filesystem::path& path, std::string* label = nullptr);

/// Writes `content` via a temporary file renamed into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace oqm::phasespace
