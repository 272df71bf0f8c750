#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "evtes/modes2d.hpp"
#include "evtes/slab.hpp"

using namespace evtes;

namespace {

// Coarse enough for a few seconds per solve; fine enough for the bands used here.
GridConfig coarse() {
  GridConfig g;
  g.dx_um = 1.0;
  g.dx_outer_um = 2.0;
  g.inner_half_width_um = 8.0;
  g.dy_um = 0.1;
  g.dy_far_um = 0.5;
  g.dy_surface_um = 0.02;
  g.dy_metal_um = 0.004;
  g.metal_margin_um = 0.1;
  return g;
}

std::shared_ptr<const Grid2D> grid_for(const CrossSection& cs, const GridConfig& g) {
  return std::make_shared<Grid2D>(make_grid(cs, g));
}

CrossSection uniform_device() {
  auto cs = default_device();
  cs.channel->contrast = 0.0;
  return cs;
}

// Lateral walls that do not disturb a laterally constant field.
GridConfig slab_like() {
  GridConfig g;
  g.dx_um = 2.0;
  g.dx_outer_um = 2.0;
  g.edges[kLeft].kind = g.edges[kRight].kind = EdgeKind::Neumann;
  return g;
}

double centroid_x(const Mode2D& m) {
  const auto& g = *m.grid;
  double s = 0, sx = 0;
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const double w = std::norm(m.field[g.index(i, j)]) * g.area(i, j);
      s += w;
      sx += w * g.x[i];
    }
  return sx / s;
}

}  // namespace

TEST_CASE("grid construction") {
  const auto cs = with_detector(default_device(), DetectorGeometry{25, 25, 40});
  const auto g = make_grid(cs, coarse());
  CHECK_NOTHROW(g.validate());
  for (std::size_t i = 1; i < g.x.size(); ++i) REQUIRE(g.x[i] > g.x[i - 1]);
  for (std::size_t j = 1; j < g.y.size(); ++j) REQUIRE(g.y[j] > g.y[j - 1]);

  int inside = 0;
  for (std::size_t j = 0; j < g.ny(); ++j)
    if (g.y[j] > 0.0 && g.y[j] < 0.040) ++inside;
  CHECK(inside >= 8);
  // Interfaces are cell edges.
  bool top = false, metal = false;
  for (double e : g.y_edges) {
    top |= std::abs(e) < 1e-12;
    metal |= std::abs(e - 0.040) < 1e-12;
  }
  CHECK(top);
  CHECK(metal);

  SUBCASE("absorbers stay clear of core and overlay") {
    for (std::size_t i = 0; i < g.nx(); ++i)
      for (std::size_t j = 0; j < g.ny(); ++j)
        if (g.in_absorber(i, j)) REQUIRE(!(std::abs(g.x[i]) < 12.5 && g.y[j] > -5.5 && g.y[j] < 0.04));
  }
  SUBCASE("overlay wider than the window is rejected") {
    const auto wide = with_detector(default_device(), DetectorGeometry{25, 49, 40});
    CHECK_THROWS_AS(make_grid(wide, coarse()), std::invalid_argument);
  }
  SUBCASE("absorbing layer over the core is rejected") {
    auto c = coarse();
    c.y_min_um = -6.0;
    CHECK_THROWS_AS(make_grid(default_device(), c), std::invalid_argument);
  }
  SUBCASE("bad spacings are rejected") {
    auto c = coarse();
    c.dy_um = 0.0;
    CHECK_THROWS_AS(make_grid(default_device(), c), std::invalid_argument);
    c = coarse();
    c.edges[kTop].pml_um = -1.0;
    CHECK_THROWS_AS(make_grid(default_device(), c), std::invalid_argument);
  }
  SUBCASE("refinement divides every spacing") {
    const auto r = coarse().refined(2.0);
    CHECK(r.dx_um == 0.5);
    CHECK(r.dy_metal_um == 0.002);
  }
}

TEST_CASE("absorbing layer strength") {
  EdgeCondition e;
  CHECK(pml_round_trip_db(e, 1.55, 1.0) > 60.0);
  CHECK(pml_round_trip_db(e, 1.55, 3.48) > 60.0);
  // Attenuation of a quadratic profile: 2 * k0 n strength L / 3 nepers one way, both ways.
  const double k0 = 2 * M_PI / 1.55;
  const double np = 2.0 * 2.0 * k0 * 1.444 * e.strength * e.pml_um / 3.0;
  CHECK(pml_round_trip_db(e, 1.55, 1.444) == doctest::Approx(10.0 * np / std::log(10.0)).epsilon(1e-9));
  e.strength = 0.0;
  CHECK(pml_round_trip_db(e, 1.55, 1.444) == doctest::Approx(0.0));
}

TEST_CASE("laterally uniform guide reproduces the slab") {
  const auto cs = uniform_device();
  const auto g = grid_for(cs, slab_like());
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    const auto m = solve_modes_2d(cs, g, pol, default_guess(cs), 1).at(0);
    const auto s = find_slab_modes(vertical_stack(cs, 0.0, pol), 1).at(0);
    CHECK(std::abs(m.n_eff.real() - s.n_eff.real()) < 1e-6);
    CHECK(std::abs(m.n_eff - s.n_eff) < 1e-6);
  }
}

TEST_CASE("effective-index method") {
  SUBCASE("separable limit equals the vertical slab") {
    const auto cs = uniform_device();
    for (auto pol : {Polarization::TE, Polarization::TM}) {
      const auto s = find_slab_modes(vertical_stack(cs, 0.0, pol), 1).at(0);
      CHECK(std::abs(effective_index_method(cs, pol) - s.n_eff) < 1e-12);
    }
  }
  SUBCASE("weak birefringence of the bare channel") {
    const auto cs = default_device();
    CHECK(std::abs(effective_index_method(cs, Polarization::TE).real() -
                   effective_index_method(cs, Polarization::TM).real()) < 1e-3);
  }
  SUBCASE("agrees with the 2-D solve") {
    const auto cs = default_device();
    const auto g = grid_for(cs, coarse());
    for (auto pol : {Polarization::TE, Polarization::TM}) {
      const auto m = fundamental_mode(cs, g, pol);
      CHECK(std::abs(m.n_eff.real() - effective_index_method(cs, pol).real()) < 1e-4);
    }
  }
  SUBCASE("loss of the loaded TM mode within a factor two") {
    const auto cs = with_detector(default_device(), DetectorGeometry{25, 25, 40});
    const auto m = fundamental_mode(cs, grid_for(cs, coarse()), Polarization::TM);
    const double ratio = effective_index_method(cs, Polarization::TM).imag() / m.n_eff.imag();
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
  }
  CHECK_THROWS_AS(effective_index_method(default_device(), Polarization::TE, 0.0), std::invalid_argument);
}

TEST_CASE("bare channel modes") {
  const auto cs = default_device();
  const auto g = grid_for(cs, coarse());
  const auto modes = solve_modes_2d(cs, g, Polarization::TE, default_guess(cs), 3);
  REQUIRE(modes.size() == 3);
  for (std::size_t k = 1; k < modes.size(); ++k)
    CHECK(std::abs(modes[k].n_eff - default_guess(cs)) >= std::abs(modes[k - 1].n_eff - default_guess(cs)));

  const auto m = fundamental_mode(cs, g, Polarization::TE);
  CHECK(m.power_normalized);
  CHECK(m.power() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(m.principal_fraction() > 0.9);
  CHECK(std::abs(overlap(m, m) - cplx(1.0)) < 1e-9);
  CHECK(std::abs(centroid_x(m)) < 0.05);
  // Bound: between the oxide and the peak core index.
  CHECK(m.n_eff.real() > 1.444);
  CHECK(m.n_eff.real() < 1.444 * 1.006 * 1.003);

  for (const auto& a : modes)
    for (const auto& b : modes) CHECK(std::abs(overlap(a, b)) <= 1.0 + 1e-9);

  std::ostringstream os;
  write_field_csv(os, m);
  CHECK(os.str().rfind("x_um,y_um,re,im\n", 0) == 0);
}

TEST_CASE("lossless bound case is real and orthogonal") {
  const auto cs = default_device();
  auto c = coarse();
  for (auto& e : c.edges) e.kind = EdgeKind::Dirichlet;
  c.y_min_um = -12.0;  // inside the oxide, clear of the leaky substrate
  const auto g = grid_for(cs, c);
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    const auto ms = solve_modes_2d(cs, g, pol, default_guess(cs), 2);
    REQUIRE(ms.size() == 2);
    for (const auto& m : ms) CHECK(std::abs(m.n_eff.imag()) < 1e-9);
    // Fundamental and first higher (laterally odd) mode.
    CHECK(ms[1].n_eff.real() < ms[0].n_eff.real());
    CHECK(std::abs(overlap(ms[0], ms[1])) < 1e-6);
    const auto mirror = [&](std::size_t p) { return g->index(g->nx() - 1 - p / g->ny(), p % g->ny()); };
    double odd = 0.0, norm = 0.0;
    for (std::size_t p = 0; p < g->size(); ++p) {
      odd += std::norm(ms[1].field[p] + ms[1].field[mirror(p)]);
      norm += std::norm(ms[1].field[p]);
    }
    CHECK(odd / norm < 1e-8);
  }
}

TEST_CASE("lateral window independence") {
  const auto cs = default_device();
  auto wide = cs;
  wide.window_width_um *= 1.5;
  auto c = coarse();
  c.dx_outer_um = c.dx_um;
  const auto a = fundamental_mode(cs, grid_for(cs, c), Polarization::TE);
  const auto b = fundamental_mode(wide, grid_for(wide, c), Polarization::TE);
  CHECK(std::abs(a.n_eff - b.n_eff) < 1e-7);
}

TEST_CASE("solver errors") {
  const auto cs = default_device();
  const auto g = grid_for(cs, coarse());
  CHECK_THROWS_AS(solve_modes_2d(cs, g, Polarization::TE, {5.0, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(solve_modes_2d(cs, g, Polarization::TE, {0.5, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(solve_modes_2d(cs, g, Polarization::TE, default_guess(cs), 0), std::invalid_argument);
  CHECK_THROWS_AS(solve_modes_2d(cs, nullptr, Polarization::TE, default_guess(cs), 1), std::invalid_argument);

  SUBCASE("overlay not resolved") {
    // A grid built for the bare guide has only a few samples inside the film.
    const auto loaded = with_detector(cs, DetectorGeometry{25, 25, 40});
    CHECK_THROWS_AS(solve_modes_2d(loaded, g, Polarization::TM, default_guess(loaded), 1), std::invalid_argument);
  }
  SUBCASE("iteration budget exhausted") {
    ModeSolveOptions o;
    o.krylov_dim = 4;
    o.max_restarts = 0;
    o.tol = 1e-15;
    try {
      solve_modes_2d(cs, g, Polarization::TE, default_guess(cs), 3, o);
      FAIL("expected non-convergence");
    } catch (const ModeSolverError& e) {
      CHECK(e.restarts() >= 0);
      CHECK(e.residual() > 0.0);
    }
  }
  SUBCASE("modes on different grids") {
    const auto m1 = fundamental_mode(cs, g, Polarization::TE);
    const auto m2 = fundamental_mode(cs, grid_for(cs, coarse()), Polarization::TE);
    CHECK_NOTHROW(overlap(m1, m2));  // equal grids compare equal
    auto c = coarse();
    c.dx_um = 0.8;
    const auto m3 = fundamental_mode(cs, grid_for(cs, c), Polarization::TE);
    CHECK_THROWS_AS(overlap(m1, m3), std::invalid_argument);
  }
}

TEST_CASE("tungsten overlay") {
  const auto bare = default_device();
  const auto loaded = with_detector(bare, DetectorGeometry{25, 25, 40});
  const auto g = grid_for(loaded, coarse());
  const auto b = fundamental_mode(bare, g, Polarization::TM);
  const auto m = fundamental_mode(loaded, g, Polarization::TM);
  CHECK(m.n_eff.imag() > 0.0);
  CHECK(std::abs(b.n_eff.imag()) < 1e-6);
  CHECK(std::norm(overlap(b, m)) > 0.96);
  CHECK(std::norm(overlap(b, m)) < 0.995);

  // Nonzero intensity inside the metal, and the peak pushed down from the surface.
  double in_metal = 0.0, yb = 0.0, ym = 0.0, sb = 0.0, sm = 0.0;
  for (std::size_t i = 0; i < g->nx(); ++i)
    for (std::size_t j = 0; j < g->ny(); ++j) {
      const double a = g->area(i, j);
      const double wm = std::norm(m.field[g->index(i, j)]) * a, wb = std::norm(b.field[g->index(i, j)]) * a;
      if (g->y[j] > 0.0 && g->y[j] < 0.04) in_metal += wm;
      ym += wm * g->y[j], sm += wm;
      yb += wb * g->y[j], sb += wb;
    }
  CHECK(in_metal > 0.0);
  CHECK(ym / sm < yb / sb);
}

TEST_CASE("TM absorbs more than TE at every thickness") {
  for (double t : {10.0, 40.0, 100.0}) {
    CAPTURE(t);
    const auto cs = with_detector(default_device(), DetectorGeometry{25, 25, t});
    const auto g = grid_for(cs, coarse());
    const auto tm = fundamental_mode(cs, g, Polarization::TM);
    const auto te = fundamental_mode(cs, g, Polarization::TE);
    CHECK(tm.alpha_cm() > te.alpha_cm());
    CHECK(tm.alpha_cm() == doctest::Approx(alpha_from_neff(tm.n_eff.imag(), 1.55)));
  }
}
