// oqm: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "oqm/classical.hpp"
#include "oqm/experiments.hpp"
#include "oqm/phasespace.hpp"
#include "oqm/quantize.hpp"
#include "oqm/resonance_cache.hpp"
#include "oqm/scar.hpp"
#include "oqm/spectral.hpp"

namespace {

namespace fs = std::filesystem;
namespace ex = oqm::experiments;

constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

oqm::classical::TorusPoint parse_point(const std::string& text) {
  std::istringstream is(text);
  double q = 0.0, p = 0.0;
  char comma = 0;
  if (!(is >> q >> comma >> p) || comma != ',' || !is.eof()) {
    throw UsageError("--orbit expects 'q,p', got '" + text + "'");
  }
  return {q, p};
}

oqm::classical::CatMap parse_matrix(const std::string& text) {
  std::istringstream is(text);
  long long v[4];
  char sep = 0;
  for (int i = 0; i < 4; ++i) {
    if (!(is >> v[i]) || (i < 3 && (!(is >> sep) || sep != ','))) {
      throw UsageError("--matrix expects 'a,b,c,d', got '" + text + "'");
    }
  }
  if (!is.eof()) throw UsageError("--matrix expects 'a,b,c,d', got '" + text + "'");
  try {
    return oqm::classical::CatMap(v[0], v[1], v[2], v[3]);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--matrix: ") + e.what());
  }
}

struct SweepFlags {
  std::string config;
  std::string out;
  int jobs = 0;
  bool no_cache = false;
  bool quiet = false;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f) {
  cmd->add_option("--config", f.config, "Sweep config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory (overrides output_dir)");
  cmd->add_option("--jobs", f.jobs, "Parallel jobs (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--no-cache", f.no_cache, "Do not read or write the result cache");
  cmd->add_flag("--quiet", f.quiet, "No progress messages");
}

std::pair<ex::SweepConfig, ex::RunOptions> prepare(const SweepFlags& f, ex::Experiment e) {
  ex::SweepConfig config = ex::load_config(f.config, e);
  if (!f.out.empty()) config.output_dir = f.out;
  ex::RunOptions options;
  options.jobs = f.jobs;
  if (!f.no_cache) options.cache_dir = oqm::spectral::ResonanceCache::default_dir();
  if (!f.quiet) options.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  return {config, options};
}

void report(const ex::SweepStats& s, const std::vector<fs::path>& paths) {
  std::cout << "decompositions: " << s.decompositions << ", cached rows: " << s.cached_rows
            << ", cached decompositions: " << s.cached_decompositions << ", skipped: " << s.failures.size() << '\n';
  for (const auto& p : paths) std::cout << "wrote " << p.string() << '\n';
}

int cmd_spectrum(int n, const std::string& open, const std::string& order) {
  const oqm::HilbertDim dim(n);
  oqm::Propagator m = oqm::build_closed_cat(dim);
  if (!open.empty()) {
    oqm::OpeningSpec spec;
    try {
      spec = oqm::OpeningSpec::parse(open);
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--open: ") + e.what());
    }
    m = oqm::open_map(m, spec, oqm::parse_order(order));
  }
  oqm::spectral::DecomposeOptions opts;
  opts.vectors = false;
  const auto res = oqm::spectral::decompose(m, opts);
  std::printf("# N=%d %s\n", n, open.empty() ? "closed" : ("open " + open + " " + order).c_str());
  std::printf("# %5s %24s %24s %22s %22s\n", "nu", "re(z)", "im(z)", "|z|", "Gamma");
  for (int r = 0; r < res.size(); ++r) {
    const int i = res.order[r];
    const auto z = res.eigenvalues[i];
    std::printf("%7d %24.17g %24.17g %22.17g %22.17g\n", r + 1, z.real(), z.imag(), std::abs(z), res.decay_rates[i]);
  }
  return 0;
}

int cmd_scar(int n, const std::string& orbit_text, std::optional<int> t, const std::string& phase, int grid,
             const std::string& out) {
  const oqm::HilbertDim dim(n);
  oqm::classical::PeriodicOrbit orbit;
  try {
    orbit = oqm::classical::find_orbit(oqm::kernel_dynamics(), parse_point(orbit_text));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--orbit: ") + e.what());
  }
  auto params = oqm::scar::ScarParams::with_default_truncation(orbit, dim);
  if (t) params.truncation = *t;
  params.phase = phase == "action-only" ? oqm::scar::PhaseConvention::kActionOnly
                                        : oqm::scar::PhaseConvention::kReturnAmplitude;
  const auto closed = oqm::build_closed_cat(dim);
  const auto psi = oqm::scar::scar_function(params, closed);
  const auto husimi = oqm::phasespace::husimi(psi, grid, "scar");
  const auto overlay = oqm::phasespace::manifold_overlay(orbit, oqm::kernel_dynamics(), 0.6);

  const fs::path dir(out);
  oqm::phasespace::write_state(dir / "scar_state.txt", psi, "scar");
  oqm::phasespace::write_grid(dir / "scar_husimi.txt", husimi);
  oqm::phasespace::write_grid_metadata(dir / "scar_husimi.json", husimi);
  oqm::phasespace::write_polylines(dir / "scar_manifolds.txt", overlay);
  const auto [a, b] = husimi.argmax();
  std::cout << "orbit period " << orbit.period << ", action " << orbit.action << ", T = " << params.truncation
            << '\n';
  std::cout << "Husimi maximum at cell (" << a << ", " << b << ") centred at (" << husimi.q_center(a) << ", "
            << husimi.p_center(b) << ")\n";
  for (const char* f : {"scar_state.txt", "scar_husimi.txt", "scar_husimi.json", "scar_manifolds.txt"}) {
    std::cout << "wrote " << (dir / f).string() << '\n';
  }
  return 0;
}

int cmd_husimi(const std::string& state_path, int grid, bool log_scale, const std::string& out) {
  std::string label;
  const auto state = oqm::phasespace::read_state(state_path, &label);
  auto h = oqm::phasespace::husimi(state, grid, label);
  if (log_scale) h = oqm::phasespace::to_log_scale(h);
  const fs::path dir(out);
  const std::string stem = fs::path(state_path).stem().string();
  oqm::phasespace::write_grid(dir / (stem + "_husimi.txt"), h);
  oqm::phasespace::write_grid_metadata(dir / (stem + "_husimi.json"), h);
  std::cout << "wrote " << (dir / (stem + "_husimi.txt")).string() << '\n';
  std::cout << "wrote " << (dir / (stem + "_husimi.json")).string() << '\n';
  return 0;
}

int cmd_orbits(int period, const std::string& matrix) {
  const auto map = matrix.empty() ? oqm::kernel_dynamics() : parse_matrix(matrix);
  if (!map.is_hyperbolic()) throw UsageError("--matrix must be hyperbolic (|trace| > 2)");
  const auto orbits = oqm::classical::periodic_points(map, period);
  std::printf("# map %s, points fixed by M^%d: %lld\n", map.to_string().c_str(), period,
              static_cast<long long>(oqm::classical::fixed_point_count(map, period)));
  std::printf("# period  action               points\n");
  for (const auto& o : orbits) {
    std::ostringstream pts;
    pts.precision(17);
    for (std::size_t k = 0; k < o.points.size(); ++k) {
      pts << (k ? " " : "") << "(" << o.points[k].q << "," << o.points[k].p << ")";
    }
    std::printf("%8d  %-19.17g  %s\n", o.period, o.action, pts.str().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open quantum cat map: resonances, scar overlaps and Weyl-law sweeps"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(OQM_VERSION));

  int n = 0;
  std::string open, order = "PM";
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues and decay rates of the closed or opened map");
  spectrum->add_option("--n", n, "Hilbert dimension N")->required()->check(CLI::PositiveNumber);
  spectrum->add_option("--open", open, "Opening 'variant,q0,dq', e.g. single,0.225,0.25");
  spectrum->add_option("--order", order, "Projection order")->check(CLI::IsMember({"PM", "MP"}));

  std::string orbit_text, phase = "return-amplitude", out = ".";
  std::optional<int> truncation;
  int grid = oqm::phasespace::kDefaultResolution;
  auto* scar = app.add_subcommand("scar", "Scar function of a periodic orbit with its Husimi grid");
  scar->add_option("--n", n, "Hilbert dimension N")->required()->check(CLI::PositiveNumber);
  scar->add_option("--orbit", orbit_text, "Orbit point 'q,p'")->required();
  scar->add_option("--t", truncation, "Truncation T (default: Ehrenfest time)")->check(CLI::NonNegativeNumber);
  scar->add_option("--phase", phase, "Phase convention")->check(CLI::IsMember({"return-amplitude", "action-only"}));
  scar->add_option("--grid", grid, "Husimi grid resolution")->check(CLI::PositiveNumber);
  scar->add_option("--out", out, "Output directory");

  SweepFlags overlap_flags, width_flags, weyl_flags;
  auto* overlap = app.add_subcommand("overlap-sweep", "Scar overlaps as a function of N");
  add_sweep_flags(overlap, overlap_flags);
  auto* width = app.add_subcommand("width-sweep", "Mean scar overlaps as a function of the opening width");
  add_sweep_flags(width, width_flags);
  auto* weyl = app.add_subcommand("weyl", "Long-lived fraction versus N and its power-law fit");
  add_sweep_flags(weyl, weyl_flags);

  std::string state_path;
  bool log_scale = false;
  auto* husimi = app.add_subcommand("husimi", "Husimi grid of a stored state");
  husimi->add_option("--state", state_path, "State file")->required()->check(CLI::ExistingFile);
  husimi->add_option("--grid", grid, "Grid resolution")->check(CLI::PositiveNumber);
  husimi->add_flag("--log", log_scale, "Log scale");
  husimi->add_option("--out", out, "Output directory");

  int period = 1;
  std::string matrix;
  auto* orbits = app.add_subcommand("orbits", "Periodic orbits of the classical map with their actions");
  orbits->add_option("--period", period, "n: list points fixed by M^n")->required()->check(CLI::Range(1, 12));
  orbits->add_option("--matrix", matrix, "Map 'a,b,c,d' (default: the quantized map's classical dynamics)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*spectrum) return cmd_spectrum(n, open, order);
    if (*scar) return cmd_scar(n, orbit_text, truncation, phase, grid, out);
    if (*husimi) return cmd_husimi(state_path, grid, log_scale, out);
    if (*orbits) return cmd_orbits(period, matrix);
    if (*overlap) {
      auto [config, options] = prepare(overlap_flags, ex::Experiment::kOverlapVsN);
      const auto sweep = ex::run_overlap_vs_N(config, options);
      report(sweep.stats, ex::write_outputs(config, sweep));
      return sweep.rows.empty() ? kNumericalError : 0;
    }
    if (*width) {
      auto [config, options] = prepare(width_flags, ex::Experiment::kOverlapVsWidth);
      const auto sweep = ex::run_overlap_vs_width(config, options);
      report(sweep.stats, ex::write_outputs(config, sweep));
      return sweep.rows.empty() ? kNumericalError : 0;
    }
    if (*weyl) {
      auto [config, options] = prepare(weyl_flags, ex::Experiment::kWeylVsN);
      const auto sweep = ex::run_weyl_vs_N(config, options);
      const auto paths = ex::write_outputs(config, sweep);
      std::printf("%-28s %12s %10s %10s\n", "opening", "a", "b", "b_theory");
      for (const auto& r : sweep.results) {
        std::printf("%-28s %12.6g %10.4f %10.3f\n", r.opening.to_string().c_str(), r.fit.a, r.fit.b, r.fit.b_theory);
      }
      report(sweep.stats, paths);
      return 0;
    }
  } catch (const ex::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const oqm::spectral::SolverError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kNumericalError;
  }
  return kConfigError;
}
