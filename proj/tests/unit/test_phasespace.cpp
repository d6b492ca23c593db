#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oqm/phasespace.hpp"
#include "oqm/scar.hpp"

using namespace oqm;
using namespace oqm::phasespace;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("oqm-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("Husimi values are coherent-state overlaps") {
  const HilbertDim n(60);
  ComplexVector v(60);
  for (int j = 0; j < 60; ++j) v(j) = Complex(std::sin(0.3 * j + 1.0), std::cos(0.11 * j * j));
  const StateVector psi = StateVector{n, v}.normalized();
  const auto grid = husimi(psi, 16);
  for (int a = 0; a < 16; a += 3) {
    for (int b = 0; b < 16; b += 5) {
      const auto c = coherent_state(n, {grid.q_center(a), grid.p_center(b)});
      const double direct = std::norm(c.amplitudes.dot(psi.amplitudes));
      CHECK(grid.at(a, b) * grid.raw_max == doctest::Approx(direct).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(husimi(psi, 0), std::invalid_argument);
}

TEST_CASE("coherent state portraits peak at their centre") {
  const HilbertDim n(200);
  const auto grid = husimi(coherent_state(n, {10.5 / 32, 22.5 / 32}), 32);
  const auto [a, b] = grid.argmax();
  CHECK(a == 10);
  CHECK(b == 22);
  CHECK(grid.at(a, b) == 1.0);
  // The Husimi function integrates to 1 / N over the torus.
  CHECK(husimi(coherent_state(n, {0.2, 0.9}), 64).raw_mass / (64.0 * 64.0) ==
        doctest::Approx(1.0 / 200).epsilon(1e-6));

  const auto lg = to_log_scale(grid);
  CHECK(lg.scale == Scale::kLog);
  CHECK(lg.at(a, b) == doctest::Approx(std::log(1.0 + kLogEpsilon)));
  CHECK_THROWS_AS(to_log_scale(lg), std::invalid_argument);
}

TEST_CASE("manifold overlays") {
  const auto map = kernel_dynamics();
  const auto orbit = classical::find_orbit(map, {0.5, 0.5});
  const auto lines = manifold_overlay(orbit, map, 1.6);
  REQUIRE_FALSE(lines.empty());
  double unstable_length = 0.0;
  for (const auto& l : lines) {
    REQUIRE(l.vertices.size() == 2);
    for (const auto& v : l.vertices) {
      CHECK(v.q >= 0.0);
      CHECK(v.q < 1.0);
      CHECK(v.p >= 0.0);
      CHECK(v.p < 1.0);
    }
    const double dq = l.vertices[1].q - l.vertices[0].q;
    const double dp = l.vertices[1].p - l.vertices[0].p;
    const double slope = dp / dq;
    CHECK(std::abs(slope) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-6));
    CHECK((slope > 0) == (l.branch == Branch::kUnstable));
    if (l.branch == Branch::kUnstable) unstable_length += std::hypot(dq, dp);
  }
  CHECK(unstable_length == doctest::Approx(1.6).epsilon(1e-9));
  // Length 1.6 at slope sqrt(3) crosses p = 0 and p = 1 once each.
  int unstable_pieces = 0;
  for (const auto& l : lines) unstable_pieces += l.branch == Branch::kUnstable;
  CHECK(unstable_pieces == 3);

  const auto dots = manifold_overlay(orbit, map, 0.0);
  CHECK(dots.size() == 2);
  CHECK(dots[0].vertices[0] == orbit.points[0]);
  CHECK_THROWS_AS(manifold_overlay(orbit, map, -1.0), std::invalid_argument);
}

TEST_CASE("grid, state and polyline files") {
  const auto dir = scratch("phasespace");
  const HilbertDim n(45);
  const auto centre = classical::find_orbit(kernel_dynamics(), {0.5, 0.5});
  const auto psi = scar::scar_function(scar::ScarParams::with_default_truncation(centre, n), build_closed_cat(n));

  write_state(dir / "s.txt", psi, "scar centre");
  std::string label;
  const auto back = read_state(dir / "s.txt", &label);
  CHECK(label == "scar centre");
  CHECK(back.amplitudes == psi.amplitudes);

  const auto grid = husimi(psi, 24, "scar");
  write_grid(dir / "g.txt", grid);
  write_grid_metadata(dir / "g.json", grid);
  const auto g2 = read_grid(dir / "g.txt", dir / "g.json");
  CHECK(g2.values == grid.values);
  CHECK(g2.n == 45);
  CHECK(g2.label == "scar");
  CHECK(g2.raw_max == grid.raw_max);

  // First line of the grid file is the p_0 row.
  std::ifstream in(dir / "g.txt");
  double first = 0.0, second = 0.0;
  in >> first >> second;
  CHECK(first == grid.at(0, 0));
  CHECK(second == grid.at(1, 0));

  write_polylines(dir / "m.txt", manifold_overlay(centre, kernel_dynamics(), 0.3));
  CHECK(std::filesystem::file_size(dir / "m.txt") > 0);
  CHECK_FALSE(std::filesystem::exists(dir / "m.txt.tmp"));

  std::ofstream(dir / "bad.txt") << "# oqm-state N=3 label=x\n1 0\n0 1\n";
  CHECK_THROWS_AS(read_state(dir / "bad.txt"), std::runtime_error);
  std::ofstream(dir / "worse.txt") << "hello\n";
  CHECK_THROWS_AS(read_state(dir / "worse.txt"), std::runtime_error);
}
