#include "oqm/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "oqm/phasespace.hpp"
#include "oqm/resonance_cache.hpp"

namespace oqm::experiments {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string shortest(double x) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), end);
}

std::string full(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

int resolve_jobs(int jobs, std::size_t items) {
  int n = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(items, 1)));
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first exception
// thrown by any job is rethrown after all threads have joined.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const int workers = resolve_jobs(jobs, count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

class Engine {
 public:
  Engine(const SweepConfig& config, const RunOptions& options) : config_(config), options_(options) {
    config_.validate();
    if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
    try {
      orbit_ = classical::find_orbit(kernel_dynamics(), config_.orbit);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("orbit", e.what());
    }
  }

  const SweepConfig& config() const { return config_; }

  void log(const std::string& msg) const {
    if (options_.log) options_.log(msg);
  }

  void fail(std::size_t item, const std::string& msg) {
    log(msg);
    std::lock_guard<std::mutex> lock(failure_mutex_);
    failures_.emplace_back(item, msg);
  }

  SweepStats stats(Clock::time_point start) {
    SweepStats s;
    s.decompositions = decompositions_;
    s.cached_rows = cached_rows_;
    s.cached_decompositions = cached_decompositions_;
    std::sort(failures_.begin(), failures_.end());
    for (auto& f : failures_) s.failures.push_back(f.second);
    s.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return s;
  }

  spectral::ResonanceSet decomposition(const Propagator& m, bool vectors, bool use_cache) {
    const std::string key = spectral::cache_key(m.dim(), m.opening(), m.order());
    spectral::DecomposeOptions opts;
    opts.vectors = vectors;
    opts.label = key;
    if (!(use_cache && cache_)) {
      ++decompositions_;
      return spectral::decompose(m, opts);
    }
    bool computed = false;
    auto res = cache_->get_or_compute(key, vectors, [&] { return spectral::decompose(m, opts); }, &computed);
    ++(computed ? decompositions_ : cached_decompositions_);
    return res;
  }

  int truncation(HilbertDim n) const {
    if (config_.truncation) return *config_.truncation;
    return scar::ehrenfest_truncation(n, classical::lyapunov_exponent(kernel_dynamics()));
  }

  std::string row_key(int n, const OpeningSpec& op) const {
    const auto& x = orbit_.exact[0];
    return "row1-N" + std::to_string(n) + "-" + spectral::cache_key(HilbertDim(n), op).substr(4) + "-orb" +
           std::to_string(x.q_num) + "_" + std::to_string(x.p_num) + "_" + std::to_string(x.den) + "-T" +
           std::to_string(truncation(HilbertDim(n))) +
           (config_.phase == scar::PhaseConvention::kReturnAmplitude ? "-ra" : "-ao") + "-gf" +
           shortest(config_.gamma_f);
  }

  std::optional<SweepRow> load_row(const std::string& key) {
    if (!cache_) return std::nullopt;
    std::ifstream in(cache_->dir() / "rows" / (key + ".json"));
    if (!in) return std::nullopt;
    try {
      const json j = json::parse(in);
      SweepRow r;
      r.n = j.at("N").get<int>();
      r.opening = j.at("opening").get<std::string>();
      r.open_channels = j.at("O").get<int>();
      r.x_max_closed = j.at("x_max_closed").get<double>();
      r.x_max_right = j.at("x_max_right").get<double>();
      r.x_max_left = j.at("x_max_left").get<double>();
      r.nu_max_right = j.at("nu_max_right").get<int>();
      r.nu_max_left = j.at("nu_max_left").get<int>();
      r.gamma_right = j.at("gamma_right").get<double>();
      r.gamma_left = j.at("gamma_left").get<double>();
      r.weyl_fraction = j.at("weyl_fraction").get<double>();
      ++cached_rows_;
      return r;
    } catch (const json::exception& e) {
      log("ignoring unreadable cached row " + key + ": " + e.what());
      return std::nullopt;
    }
  }

  void store_row(const std::string& key, const SweepRow& r) {
    if (!cache_) return;
    const json j = {{"N", r.n},
                    {"opening", r.opening},
                    {"O", r.open_channels},
                    {"x_max_closed", r.x_max_closed},
                    {"x_max_right", r.x_max_right},
                    {"x_max_left", r.x_max_left},
                    {"nu_max_right", r.nu_max_right},
                    {"nu_max_left", r.nu_max_left},
                    {"gamma_right", r.gamma_right},
                    {"gamma_left", r.gamma_left},
                    {"weyl_fraction", r.weyl_fraction}};
    phasespace::write_text_atomic(cache_->dir() / "rows" / (key + ".json"), j.dump() + "\n");
  }

  // Rows for every opening at one N; the closed decomposition and the scar
  // function are shared between openings.
  std::vector<SweepRow> overlap_rows(int n_value, const std::vector<OpeningSpec>& openings) {
    const HilbertDim n(n_value);
    std::vector<std::optional<SweepRow>> rows(openings.size());
    std::vector<std::string> keys(openings.size());
    bool missing = false;
    for (std::size_t i = 0; i < openings.size(); ++i) {
      keys[i] = row_key(n_value, openings[i]);
      rows[i] = load_row(keys[i]);
      missing = missing || !rows[i];
    }
    if (missing) {
      const Propagator closed = build_closed_cat(n);
      scar::ScarParams params;
      params.orbit = orbit_;
      params.dynamics = kernel_dynamics();
      params.n = n;
      params.truncation = truncation(n);
      params.phase = config_.phase;
      const StateVector psi = scar::scar_function(params, closed);
      const auto closed_res = decomposition(closed, true, config_.cache_decompositions);
      const double x_closed = scar::overlap_scan_closed(psi, closed_res).x_max;

      for (std::size_t i = 0; i < openings.size(); ++i) {
        if (rows[i]) continue;
        const Propagator open = open_map(closed, openings[i]);
        const auto res = decomposition(open, true, config_.cache_decompositions);
        const auto right = scar::overlap_scan(psi, res, scar::Side::kRight);
        const auto left = scar::overlap_scan(psi, res, scar::Side::kLeft);
        SweepRow r;
        r.n = n_value;
        r.opening = openings[i].to_string();
        r.open_channels = build_projector(n, openings[i]).open_channels;
        r.x_max_closed = x_closed;
        r.x_max_right = right.x_max;
        r.x_max_left = left.x_max;
        r.nu_max_right = right.nu_max;
        r.nu_max_left = left.nu_max;
        r.gamma_right = right.decay_rate;
        r.gamma_left = left.decay_rate;
        r.weyl_fraction = spectral::weyl_fraction(res, config_.gamma_f);
        store_row(keys[i], r);
        rows[i] = r;
      }
    }
    std::vector<SweepRow> out;
    for (auto& r : rows) out.push_back(std::move(*r));
    return out;
  }

  // Sweeps overlap_rows over the N grid; result[k][i] is opening i at the k-th N.
  std::vector<std::optional<std::vector<SweepRow>>> overlap_grid(const std::vector<OpeningSpec>& openings) {
    const std::vector<int> ns = config_.n_range.values();
    std::vector<std::optional<std::vector<SweepRow>>> out(ns.size());
    parallel_for(ns.size(), options_.jobs, [&](std::size_t k) {
      try {
        out[k] = overlap_rows(ns[k], openings);
        log("N=" + std::to_string(ns[k]) + " done");
      } catch (const spectral::SolverError& e) {
        fail(k, "N=" + std::to_string(ns[k]) + " skipped: " + e.what());
      } catch (const std::domain_error& e) {
        fail(k, "N=" + std::to_string(ns[k]) + " skipped: " + e.what());
      }
    });
    return out;
  }

 private:
  SweepConfig config_;
  RunOptions options_;
  std::optional<spectral::ResonanceCache> cache_;
  classical::PeriodicOrbit orbit_;
  std::atomic<int> decompositions_{0};
  std::atomic<int> cached_rows_{0};
  std::atomic<int> cached_decompositions_{0};
  std::mutex failure_mutex_;
  std::vector<std::pair<std::size_t, std::string>> failures_;
};

double mean(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

json stats_json(const SweepStats& s) {
  return {{"decompositions", s.decompositions},
          {"cached_rows", s.cached_rows},
          {"cached_decompositions", s.cached_decompositions},
          {"failures", s.failures},
          {"seconds", s.seconds}};
}

std::filesystem::path emit(const SweepConfig& config, const std::string& name, const std::string& text) {
  const auto path = config.output_dir / name;
  phasespace::write_text_atomic(path, text);
  return path;
}

void write_manifest(const SweepConfig& config, const SweepStats& stats, std::vector<std::filesystem::path>& paths,
                    json extra = json::object()) {
  json files = json::array();
  for (const auto& p : paths) files.push_back(p.filename().string());
  json manifest = {{"tool", "oqm"},
                   {"version", OQM_VERSION},
                   {"experiment", to_string(config.experiment)},
                   {"config", to_json(config)},
                   {"stats", stats_json(stats)},
                   {"files", files}};
  if (!extra.empty()) manifest["results"] = std::move(extra);
  paths.push_back(emit(config, "manifest.json", manifest.dump(2) + "\n"));
}

const char* kOverlapHeader =
    "N,variant,q0,delta_q,O,x_max_closed,x_max_right,x_max_left,nu_max_right,nu_max_left,gamma_right,gamma_left,"
    "weyl_fraction";

}  // namespace

OverlapSweep run_overlap_vs_N(const SweepConfig& config, const RunOptions& options) {
  const auto start = Clock::now();
  Engine engine(config, options);
  const auto grid = engine.overlap_grid(config.openings);
  OverlapSweep out;
  for (std::size_t i = 0; i < config.openings.size(); ++i) {
    for (const auto& rows : grid) {
      if (rows) out.rows.push_back((*rows)[i]);
    }
  }
  out.stats = engine.stats(start);
  return out;
}

WidthSweep run_overlap_vs_width(const SweepConfig& config, const RunOptions& options) {
  const auto start = Clock::now();
  SweepConfig c = config;
  c.experiment = Experiment::kOverlapVsWidth;
  Engine engine(c, options);
  std::vector<OpeningSpec> expanded;
  for (const auto& base : c.openings) {
    for (double dq : c.delta_q_grid) expanded.push_back({base.variant, base.q0, dq});
  }
  const auto grid = engine.overlap_grid(expanded);

  WidthSweep out;
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    std::vector<double> closed, right, left;
    for (const auto& rows : grid) {
      if (!rows) continue;
      const SweepRow& r = (*rows)[i];
      out.rows.push_back(r);
      closed.push_back(r.x_max_closed);
      right.push_back(r.x_max_right);
      left.push_back(r.x_max_left);
    }
    out.table.push_back({to_string(expanded[i].variant), expanded[i].q0, expanded[i].delta_q, mean(closed),
                         mean(right), mean(left), static_cast<int>(right.size())});
  }
  out.stats = engine.stats(start);
  return out;
}

WeylSweep run_weyl_vs_N(const SweepConfig& config, const RunOptions& options) {
  const auto start = Clock::now();
  Engine engine(config, options);
  const std::vector<int> ns = config.n_range.values();
  const std::size_t per = ns.size();
  std::vector<std::optional<WeylRow>> cells(config.openings.size() * per);

  parallel_for(cells.size(), options.jobs, [&](std::size_t k) {
    const OpeningSpec& op = config.openings[k / per];
    const HilbertDim n(ns[k % per]);
    try {
      const Propagator open = open_map(build_closed_cat(n), op);
      const auto res = engine.decomposition(open, false, true);
      WeylRow row;
      row.opening = op.to_string();
      row.n = n.value();
      row.open_channels = build_projector(n, op).open_channels;
      row.fraction = spectral::weyl_fraction(res, config.gamma_f);
      row.long_lived = static_cast<int>(std::lround(row.fraction * n.value()));
      cells[k] = row;
    } catch (const spectral::SolverError& e) {
      engine.fail(k, "N=" + std::to_string(n.value()) + " " + op.to_string() + " skipped: " + e.what());
    }
  });

  const double lambda = classical::lyapunov_exponent(kernel_dynamics());
  WeylSweep out;
  for (std::size_t i = 0; i < config.openings.size(); ++i) {
    WeylResult result;
    result.opening = config.openings[i];
    std::vector<spectral::WeylSample> samples;
    for (std::size_t k = 0; k < per; ++k) {
      if (const auto& cell = cells[i * per + k]) {
        result.rows.push_back(*cell);
        samples.push_back({cell->n, cell->fraction});
      }
    }
    try {
      result.fit = spectral::fit_weyl_law(samples, result.opening.delta_q, lambda, config.gamma_f);
    } catch (const std::invalid_argument& e) {
      engine.fail(config.openings.size() * per + i, result.opening.to_string() + " fit failed: " + e.what());
      result.fit.gamma_f = config.gamma_f;
      result.fit.samples = samples;
      result.fit.a = result.fit.b = std::nan("");
      result.fit.b_theory = result.opening.delta_q / lambda;
    }
    out.results.push_back(std::move(result));
  }
  out.stats = engine.stats(start);
  return out;
}

std::vector<std::pair<int, double>> running_average(const std::vector<std::pair<int, double>>& series, int window) {
  if (series.empty()) throw std::invalid_argument("running average of an empty series");
  if (window < 1) throw std::invalid_argument("running-average window must be >= 1");
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].first < series[i - 1].first) throw std::invalid_argument("running average needs a series sorted by N");
  }
  const double half = 0.5 * window;
  std::vector<std::pair<int, double>> out;
  out.reserve(series.size());
  std::size_t lo = 0, hi = 0;  // window is series[lo, hi)
  for (const auto& sample : series) {
    const int n = sample.first;
    while (hi < series.size() && series[hi].first - n <= half) ++hi;
    while (n - series[lo].first > half) ++lo;
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k) s += series[k].second;
    out.emplace_back(n, s / static_cast<double>(hi - lo));
  }
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 samples");
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

std::string overlap_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << kOverlapHeader << '\n';
  for (const auto& r : rows) {
    const OpeningSpec op = OpeningSpec::parse(r.opening);
    os << r.n << ',' << to_string(op.variant) << ',' << shortest(op.q0) << ',' << shortest(op.delta_q) << ','
       << r.open_channels << ',' << full(r.x_max_closed) << ',' << full(r.x_max_right) << ',' << full(r.x_max_left)
       << ',' << r.nu_max_right << ',' << r.nu_max_left << ',' << full(r.gamma_right) << ',' << full(r.gamma_left)
       << ',' << full(r.weyl_fraction) << '\n';
  }
  return os.str();
}

std::vector<SweepRow> parse_overlap_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kOverlapHeader) throw std::runtime_error("not an overlap sweep table");
  std::vector<SweepRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 13) throw std::runtime_error("overlap table row has " + std::to_string(f.size()) + " fields");
    SweepRow r;
    r.n = std::stoi(f[0]);
    r.opening = OpeningSpec{parse_variant(f[1]), std::stod(f[2]), std::stod(f[3])}.to_string();
    r.open_channels = std::stoi(f[4]);
    r.x_max_closed = std::stod(f[5]);
    r.x_max_right = std::stod(f[6]);
    r.x_max_left = std::stod(f[7]);
    r.nu_max_right = std::stoi(f[8]);
    r.nu_max_left = std::stoi(f[9]);
    r.gamma_right = std::stod(f[10]);
    r.gamma_left = std::stod(f[11]);
    r.weyl_fraction = std::stod(f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string running_average_csv(const std::vector<SweepRow>& rows, int window) {
  std::ostringstream os;
  os << "N,variant,q0,delta_q,window,avg_x_max_closed,avg_x_max_right,avg_x_max_left\n";
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.opening) == order.end()) order.push_back(r.opening);
  }
  for (const auto& name : order) {
    std::vector<std::pair<int, double>> closed, right, left;
    for (const auto& r : rows) {
      if (r.opening != name) continue;
      closed.emplace_back(r.n, r.x_max_closed);
      right.emplace_back(r.n, r.x_max_right);
      left.emplace_back(r.n, r.x_max_left);
    }
    const auto ac = running_average(closed, window), ar = running_average(right, window),
               al = running_average(left, window);
    const OpeningSpec op = OpeningSpec::parse(name);
    for (std::size_t k = 0; k < ac.size(); ++k) {
      os << ac[k].first << ',' << to_string(op.variant) << ',' << shortest(op.q0) << ',' << shortest(op.delta_q)
         << ',' << window << ',' << full(ac[k].second) << ',' << full(ar[k].second) << ',' << full(al[k].second)
         << '\n';
    }
  }
  return os.str();
}

std::string width_csv(const std::vector<WidthRow>& rows) {
  std::ostringstream os;
  os << "variant,q0,delta_q,samples,mean_x_max_closed,mean_x_max_right,mean_x_max_left\n";
  for (const auto& r : rows) {
    os << r.variant << ',' << shortest(r.q0) << ',' << shortest(r.delta_q) << ',' << r.samples << ','
       << full(r.mean_closed) << ',' << full(r.mean_right) << ',' << full(r.mean_left) << '\n';
  }
  return os.str();
}

std::string weyl_csv(const std::vector<WeylResult>& results) {
  std::ostringstream os;
  os << "variant,q0,delta_q,N,O,long_lived,weyl_fraction\n";
  for (const auto& res : results) {
    for (const auto& r : res.rows) {
      os << to_string(res.opening.variant) << ',' << shortest(res.opening.q0) << ','
         << shortest(res.opening.delta_q) << ',' << r.n << ',' << r.open_channels << ',' << r.long_lived << ','
         << full(r.fraction) << '\n';
    }
  }
  return os.str();
}

std::string weyl_fit_csv(const std::vector<WeylResult>& results) {
  std::ostringstream os;
  os << "variant,q0,delta_q,gamma_f,a,b,b_theory,fitted_samples,excluded\n";
  for (const auto& res : results) {
    os << to_string(res.opening.variant) << ',' << shortest(res.opening.q0) << ',' << shortest(res.opening.delta_q)
       << ',' << shortest(res.fit.gamma_f) << ',' << full(res.fit.a) << ',' << full(res.fit.b) << ','
       << full(res.fit.b_theory) << ',' << res.fit.residuals.size() << ',' << res.fit.excluded << '\n';
  }
  return os.str();
}

std::vector<std::filesystem::path> write_outputs(const SweepConfig& config, const OverlapSweep& sweep) {
  std::vector<std::filesystem::path> paths;
  paths.push_back(emit(config, "overlap_vs_N.csv", overlap_csv(sweep.rows)));
  if (!sweep.rows.empty()) {
    paths.push_back(emit(config, "overlap_vs_N_avg.csv", running_average_csv(sweep.rows, config.average_window)));
  }
  write_manifest(config, sweep.stats, paths);
  return paths;
}

std::vector<std::filesystem::path> write_outputs(const SweepConfig& config, const WidthSweep& sweep) {
  std::vector<std::filesystem::path> paths;
  paths.push_back(emit(config, "overlap_vs_width_rows.csv", overlap_csv(sweep.rows)));
  paths.push_back(emit(config, "overlap_vs_width.csv", width_csv(sweep.table)));
  write_manifest(config, sweep.stats, paths);
  return paths;
}

std::vector<std::filesystem::path> write_outputs(const SweepConfig& config, const WeylSweep& sweep) {
  std::vector<std::filesystem::path> paths;
  paths.push_back(emit(config, "weyl_vs_N.csv", weyl_csv(sweep.results)));
  paths.push_back(emit(config, "weyl_fit.csv", weyl_fit_csv(sweep.results)));
  json fits = json::array();
  for (const auto& r : sweep.results) {
    fits.push_back({{"opening", r.opening.to_string()}, {"a", r.fit.a}, {"b", r.fit.b}, {"b_theory", r.fit.b_theory}});
  }
  write_manifest(config, sweep.stats, paths, fits);
  return paths;
}

}  // namespace oqm::experiments
