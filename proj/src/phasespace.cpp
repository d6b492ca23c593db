#include "oqm/phasespace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace oqm::phasespace {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Gaussian image terms below this envelope are dropped from the Husimi sums.
constexpr double kEnvelopeCutoff = 1e-18;

struct Term {
  int site;
  double x;         // q_j - q_a + nu
  double envelope;  // exp(-pi N x^2)
};

const char* scale_name(Scale s) { return s == Scale::kLinear ? "linear" : "log"; }

}  // namespace

std::pair<int, int> HusimiGrid::argmax() const {
  const auto it = std::max_element(values.begin(), values.end());
  const auto k = static_cast<int>(std::distance(values.begin(), it));
  return {k / resolution, k % resolution};
}

HusimiGrid husimi(const StateVector& state, int resolution, std::string label) {
  if (resolution < 1) throw std::invalid_argument("Husimi resolution must be >= 1");
  const int N = state.dim.value();
  const int G = resolution;
  const ComplexVector& psi = state.amplitudes;

  HusimiGrid grid;
  grid.resolution = G;
  grid.values.assign(static_cast<std::size_t>(G) * G, 0.0);
  grid.label = std::move(label);
  grid.n = N;

  std::vector<Term> terms;
  std::vector<Complex> coeff(N);
  std::vector<int> touched;
  std::vector<char> used(N, 0);
  for (int a = 0; a < G; ++a) {
    const double qa = grid.q_center(a);
    terms.clear();
    for (int j = 0; j < N; ++j) {
      for (int nu = -3; nu <= 3; ++nu) {
        const double x = static_cast<double>(j) / N - qa + nu;
        const double env = std::exp(-std::numbers::pi * N * x * x);
        if (env >= kEnvelopeCutoff) terms.push_back({j, x, env});
      }
    }
    for (int b = 0; b < G; ++b) {
      const double pb = grid.p_center(b);
      touched.clear();
      for (const Term& t : terms) {
        if (!used[t.site]) {
          used[t.site] = 1;
          coeff[t.site] = 0.0;
          touched.push_back(t.site);
        }
        coeff[t.site] += std::polar(t.envelope, kTwoPi * N * pb * t.x);
      }
      double norm2 = 0.0;
      Complex overlap = 0.0;
      for (int j : touched) {
        norm2 += std::norm(coeff[j]);
        overlap += std::conj(coeff[j]) * psi(j);
        used[j] = 0;
      }
      grid.values[static_cast<std::size_t>(a) * G + b] = std::norm(overlap) / norm2;
    }
  }

  grid.raw_max = *std::max_element(grid.values.begin(), grid.values.end());
  for (double v : grid.values) grid.raw_mass += v;
  if (grid.raw_max > 0.0) {
    for (double& v : grid.values) v /= grid.raw_max;
  }
  return grid;
}

HusimiGrid to_log_scale(const HusimiGrid& linear) {
  if (linear.scale != Scale::kLinear) throw std::invalid_argument("grid is already log scale");
  HusimiGrid out = linear;
  out.scale = Scale::kLog;
  for (double& v : out.values) v = std::log(v + kLogEpsilon);
  return out;
}

std::vector<Polyline> manifold_overlay(const classical::PeriodicOrbit& orbit, const classical::CatMap& map,
                                       double length) {
  if (length < 0.0) throw std::invalid_argument("overlay length must be >= 0");
  const auto dirs = classical::manifold_directions(map);
  const double below_one = std::nextafter(1.0, 0.0);
  auto clamp_unit = [&](double v) { return std::clamp(v, 0.0, below_one); };

  std::vector<Polyline> out;
  for (const auto& x0 : orbit.points) {
    for (Branch branch : {Branch::kUnstable, Branch::kStable}) {
      const auto& u = branch == Branch::kUnstable ? dirs.unstable : dirs.stable;
      const double sq = x0.q - 0.5 * length * u[0];
      const double sp = x0.p - 0.5 * length * u[1];
      if (length == 0.0) {
        out.push_back({branch, {x0, x0}});
        continue;
      }
      // Parameters where the line crosses an integer q or p.
      std::vector<double> cuts{0.0, length};
      for (int axis = 0; axis < 2; ++axis) {
        const double start = axis == 0 ? sq : sp;
        const double step = u[axis];
        if (step == 0.0) continue;
        const double end = start + length * step;
        for (double k = std::ceil(std::min(start, end)); k <= std::floor(std::max(start, end)); k += 1.0) {
          const double t = (k - start) / step;
          if (t > 0.0 && t < length) cuts.push_back(t);
        }
      }
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double t0 = cuts[i], t1 = cuts[i + 1];
        const double mid = 0.5 * (t0 + t1);
        const double oq = std::floor(sq + mid * u[0]);
        const double op = std::floor(sp + mid * u[1]);
        Polyline seg{branch, {}};
        seg.vertices.push_back({clamp_unit(sq + t0 * u[0] - oq), clamp_unit(sp + t0 * u[1] - op)});
        seg.vertices.push_back({clamp_unit(sq + t1 * u[0] - oq), clamp_unit(sp + t1 * u[1] - op)});
        out.push_back(std::move(seg));
      }
    }
  }
  return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_grid(const std::filesystem::path& path, const HusimiGrid& grid) {
  std::ostringstream os;
  os.precision(17);
  for (int b = 0; b < grid.resolution; ++b) {
    for (int a = 0; a < grid.resolution; ++a) {
      if (a) os << ' ';
      os << grid.at(a, b);
    }
    os << '\n';
  }
  write_text_atomic(path, os.str());
}

void write_grid_metadata(const std::filesystem::path& path, const HusimiGrid& grid) {
  nlohmann::json meta = {{"n", grid.n},
                         {"label", grid.label},
                         {"scale", scale_name(grid.scale)},
                         {"resolution", grid.resolution},
                         {"log_epsilon", kLogEpsilon},
                         {"raw_max", grid.raw_max},
                         {"raw_mass", grid.raw_mass},
                         {"layout", "row b holds p=(b+1/2)/G, column a holds q=(a+1/2)/G"}};
  write_text_atomic(path, meta.dump(2) + "\n");
}

HusimiGrid read_grid(const std::filesystem::path& grid_path, const std::filesystem::path& metadata_path) {
  std::ifstream meta_in(metadata_path);
  if (!meta_in) throw std::runtime_error("cannot read " + metadata_path.string());
  const auto meta = nlohmann::json::parse(meta_in);
  HusimiGrid grid;
  grid.n = meta.at("n").get<int>();
  grid.label = meta.at("label").get<std::string>();
  grid.scale = meta.at("scale").get<std::string>() == "log" ? Scale::kLog : Scale::kLinear;
  grid.resolution = meta.at("resolution").get<int>();
  grid.raw_max = meta.at("raw_max").get<double>();
  grid.raw_mass = meta.at("raw_mass").get<double>();
  const int G = grid.resolution;
  grid.values.assign(static_cast<std::size_t>(G) * G, 0.0);

  std::ifstream in(grid_path);
  if (!in) throw std::runtime_error("cannot read " + grid_path.string());
  for (int b = 0; b < G; ++b) {
    for (int a = 0; a < G; ++a) {
      if (!(in >> grid.values[static_cast<std::size_t>(a) * G + b])) {
        throw std::runtime_error("grid file " + grid_path.string() + " is truncated");
      }
    }
  }
  return grid;
}

void write_polylines(const std::filesystem::path& path, const std::vector<Polyline>& lines) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) os << '\n';
    os << "# " << (lines[i].branch == Branch::kUnstable ? "unstable" : "stable") << '\n';
    for (const auto& v : lines[i].vertices) os << v.q << ' ' << v.p << '\n';
  }
  write_text_atomic(path, os.str());
}

void write_state(const std::filesystem::path& path, const StateVector& state, const std::string& label) {
  std::ostringstream os;
  os.precision(17);
  os << "# oqm-state N=" << state.dim.value() << " label=" << label << '\n';
  for (int j = 0; j < state.dim.value(); ++j) {
    os << state.amplitudes(j).real() << ' ' << state.amplitudes(j).imag() << '\n';
  }
  write_text_atomic(path, os.str());
}

StateVector read_state(const std::filesystem::path& path, std::string* label) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read state file " + path.string());
  std::string header;
  std::getline(in, header);
  const std::string tag = "# oqm-state N=";
  if (header.rfind(tag, 0) != 0) throw std::runtime_error(path.string() + " is not an oqm state file");
  std::istringstream hs(header.substr(tag.size()));
  int n = 0;
  hs >> n;
  std::string rest;
  std::getline(hs, rest);
  if (label) *label = rest.rfind(" label=", 0) == 0 ? rest.substr(7) : std::string{};

  ComplexVector amp(HilbertDim(n).value());
  for (int j = 0; j < n; ++j) {
    double re = 0.0, im = 0.0;
    if (!(in >> re >> im)) throw std::runtime_error("state file " + path.string() + " is truncated");
    amp(j) = {re, im};
  }
  if (!amp.allFinite()) throw std::runtime_error("state file " + path.string() + " has non-finite amplitudes");
  return StateVector{HilbertDim(n), amp};
}

}  // namespace oqm::phasespace
