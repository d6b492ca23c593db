// experiments.hpp
//
// Parameter sweeps over N, opening width and opening variant: scar overlaps
// against closed eigenfunctions and open-map resonances, their running
// averages, and fractions of long-lived resonances with a power-law fit.
//
// Sweep points are independent; a small work pool runs them and results are
// assembled in grid order, so output tables do not depend on the job count.
// Finished rows are cached as small JSON records keyed by everything that
// determines them; decompositions themselves are cached only on request
// (a vector decomposition at N = 360 is about 4 MB).

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oqm/classical.hpp"
#include "oqm/quantize.hpp"
#include "oqm/scar.hpp"
#include "oqm/spectral.hpp"

namespace oqm::experiments {

enum class Experiment { kOverlapVsN, kOverlapVsWidth, kWeylVsN };
const char* to_string(Experiment e);

/// Malformed or inconsistent configuration. key() names the offending entry
/// ("n_range.step", "openings[1].q0", ...).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Inclusive integer range first, first + step, ..., <= last.
struct IntRange {
  int first = 0;
  int last = 0;
  int step = 1;
  std::vector<int> values() const;
};

/// Inclusive real grid first + k * step, k = 0 .. round((last - first)/step).
struct RealGrid {
  double first = 0.0;
  double last = 0.0;
  double step = 1.0;
  std::vector<double> values() const;
};

struct SweepConfig {
  Experiment experiment = Experiment::kOverlapVsN;
  IntRange n_range{100, 360, 1};
  // For width sweeps each entry fixes variant and q0; its delta_q is replaced
  // by every point of delta_q_grid.
  std::vector<OpeningSpec> openings;
  classical::TorusPoint orbit{0.5, 0.5};  // snapped to a periodic orbit of the kernel map
  double gamma_f = 0.71;
  int average_window = 10;  // Delta N
  std::optional<int> truncation;  // scar-sum T; default from the Ehrenfest time
  scar::PhaseConvention phase = scar::PhaseConvention::kReturnAmplitude;
  std::vector<double> delta_q_grid;
  std::filesystem::path output_dir = "out";
  bool cache_decompositions = false;

  /// Throws ConfigError.
  void validate() const;
};

/// Defaults per experiment:
///   overlap vs N:     N 100..360 step 1, single q0=0.225 dq=0.25
///   overlap vs width: N 350..360 step 1, single q0=0.225 and symmetric
///                     q0=0.1625, dq 0.025..0.40 step 0.025
///   Weyl vs N:        N 100..400 step 10, single (0.125, 0.05),
///                     single (0.225, 0.25), symmetric (0.1625, 0.25)
SweepConfig default_config(Experiment e);

/// JSON object overriding default_config(e). Keys:
///   n_range        {"first", "last", "step"}
///   openings       list of "variant,q0,dq" strings or {"variant", "q0", "delta_q"}
///   orbit          [q, p]
///   gamma_f, average_window, truncation
///   phase          "return-amplitude" | "action-only"
///   delta_q_grid   {"first", "last", "step"} or a list of values
///   output_dir, cache_decompositions
/// Unknown keys and wrong types throw ConfigError naming the key.
SweepConfig parse_config(const std::string& text, Experiment e);
SweepConfig load_config(const std::filesystem::path& path, Experiment e);
nlohmann::json to_json(const SweepConfig& config);

struct SweepRow {
  int n = 0;
  std::string opening;  // OpeningSpec::to_string()
  int open_channels = 0;  // O
  double x_max_closed = 0.0;
  double x_max_right = 0.0;
  double x_max_left = 0.0;
  int nu_max_right = 0;
  int nu_max_left = 0;
  double gamma_right = 0.0;  // decay rate of the right maximizer
  double gamma_left = 0.0;
  double weyl_fraction = 0.0;  // #{Gamma < gamma_f} / N
};

struct WidthRow {
  std::string variant;
  double q0 = 0.0;
  double delta_q = 0.0;
  double mean_closed = 0.0;
  double mean_right = 0.0;
  double mean_left = 0.0;
  int samples = 0;  // N values that entered the means
};

struct WeylRow {
  std::string opening;
  int n = 0;
  int open_channels = 0;
  int long_lived = 0;  // #{Gamma < gamma_f}
  double fraction = 0.0;
};

struct WeylResult {
  OpeningSpec opening;
  spectral::WeylFit fit;
  std::vector<WeylRow> rows;
};

struct SweepStats {
  int decompositions = 0;  // eigensolver calls actually made
  int cached_rows = 0;     // rows served from the row cache
  int cached_decompositions = 0;
  std::vector<std::string> failures;  // one message per skipped sweep point
  double seconds = 0.0;
};

struct RunOptions {
  int jobs = 0;  // 0: hardware concurrency
  // Row and decomposition cache; nullopt disables caching entirely.
  std::optional<std::filesystem::path> cache_dir;
  std::function<void(const std::string&)> log;
};

struct OverlapSweep {
  std::vector<SweepRow> rows;  // by opening (config order), then N
  SweepStats stats;
};

struct WidthSweep {
  std::vector<SweepRow> rows;   // by variant, delta_q, then N
  std::vector<WidthRow> table;  // by variant, then delta_q
  SweepStats stats;
};

struct WeylSweep {
  std::vector<WeylResult> results;  // one per opening
  SweepStats stats;
};

OverlapSweep run_overlap_vs_N(const SweepConfig& config, const RunOptions& options = {});
WidthSweep run_overlap_vs_width(const SweepConfig& config, const RunOptions& options = {});
WeylSweep run_weyl_vs_N(const SweepConfig& config, const RunOptions& options = {});

/// Centred moving average over all samples with |N' - N| <= window/2.
/// Throws std::invalid_argument for an empty or unsorted series or window < 1.
std::vector<std::pair<int, double>> running_average(const std::vector<std::pair<int, double>>& series,
                                                    int window);

/// Spearman rank correlation (average ranks on ties); NaN if either side is
/// constant. Throws std::invalid_argument on size mismatch or < 2 samples.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// CSV text, 17 significant digits, header naming every column.
std::string overlap_csv(const std::vector<SweepRow>& rows);
std::string running_average_csv(const std::vector<SweepRow>& rows, int window);
std::string width_csv(const std::vector<WidthRow>& rows);
std::string weyl_csv(const std::vector<WeylResult>& results);
std::string weyl_fit_csv(const std::vector<WeylResult>& results);

std::vector<SweepRow> parse_overlap_csv(const std::string& text);

/// Writes every table of a finished sweep plus manifest.json under
/// config.output_dir; each file is written to a temporary and renamed.
/// Returns the paths written.
std::vector<std::filesystem::path> write_outputs(const SweepConfig& config, const OverlapSweep& sweep);
std::vector<std::filesystem::path> write_outputs(const SweepConfig& config, const WidthSweep& sweep);
std::vector<std::filesystem::path> write_outputs(const SweepConfig& config, const WeylSweep& sweep);

}  // namespace oqm::experiments
