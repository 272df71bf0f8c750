#include "doctest.h"
#include "evtes/slab.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace evtes;

namespace {

SlabStack symmetric(double n_clad, double n_core, double d, Polarization pol, double wl = 1.55) {
  SlabStack s;
  s.layers = {{{n_clad, 0}, 0}, {{n_core, 0}, d}, {{n_clad, 0}, 0}};
  s.wavelength_um = wl;
  s.polarization = pol;
  return s;
}

SlabStack planar_device(Polarization pol) {
  SlabStack s;
  s.layers = {{{3.48, 0}, 0}, {{1.444, 0}, 17.0}, {{1.444 * 1.006, 0}, 5.5}, {{1.0, 0}, 0}};
  s.polarization = pol;
  return s;
}

double weighted_norm(const SlabMode& m, const SlabStack& s) {
  // Trapezoid over the samples with the weight of the layer holding each midpoint.
  double y_bottom = s.origin_um;
  std::vector<double> tops;
  for (std::size_t i = 1; i + 1 < s.layers.size(); ++i) tops.push_back(y_bottom += s.layers[i].thickness_um);
  auto eps_at = [&](double y) {
    if (y < s.origin_um) return s.layers.front().index.permittivity();
    for (std::size_t i = 0; i < tops.size(); ++i)
      if (y < tops[i]) return s.layers[i + 1].index.permittivity();
    return s.layers.back().index.permittivity();
  };
  double sum = 0;
  for (std::size_t k = 0; k + 1 < m.y_um.size(); ++k) {
    const double w = power_weight(s.polarization, eps_at(0.5 * (m.y_um[k] + m.y_um[k + 1])));
    sum += 0.5 * (std::norm(m.field[k]) + std::norm(m.field[k + 1])) * w * (m.y_um[k + 1] - m.y_um[k]);
  }
  return sum;
}

}  // namespace

TEST_CASE("residual vanishes at the analytic symmetric-slab root") {
  const auto s = symmetric(1.45, 1.456, 5.5, Polarization::TE);
  const auto roots = oracle::symmetric_slab(1.45, 1.456, 5.5, 1.55, false);
  REQUIRE(!roots.empty());
  for (double r : roots) CHECK(std::abs(slab_dispersion(s, r)) < 1e-10);
}

TEST_CASE("conjugate symmetry for real-index stacks") {
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    const auto s = symmetric(1.45, 1.456, 5.5, pol);
    for (cplx z : {cplx{1.452, 1e-4}, cplx{1.455, -3e-4}, cplx{1.4501, 2e-3}}) {
      const cplx a = slab_dispersion(s, std::conj(z));
      const cplx b = std::conj(slab_dispersion(s, z));
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("uniform stack guides nothing") {
  const auto s = symmetric(1.45, 1.45, 5.5, Polarization::TE);
  CHECK(default_search_box(s).empty());
  CHECK(find_slab_modes(s, 5).empty());
  CHECK(count_slab_zeros(s, SearchBox{1.4, 1.449, -1e-3, 1e-3}) == 0);
}

TEST_CASE("oracle equivalence over the symmetric family") {
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    for (double contrast : {0.003, 0.006, 0.02}) {
      for (double d : {2.0, 5.5, 8.0}) {
        const double n_clad = 1.45, n_core = 1.45 * (1 + contrast);
        const auto ref = oracle::symmetric_slab(n_clad, n_core, d, 1.55, pol == Polarization::TM);
        const auto modes = find_slab_modes(symmetric(n_clad, n_core, d, pol), 20);
        CAPTURE(contrast);
        CAPTURE(d);
        std::size_t n_ref = 0;
        for (double r : ref)
          if (r > n_clad + 1e-8) ++n_ref;
        REQUIRE(modes.size() >= n_ref);
        for (std::size_t i = 0; i < n_ref; ++i) {
          CHECK(std::abs(modes[i].n_eff - ref[i]) < 1e-9);
          CHECK(modes[i].order == static_cast<int>(i));
        }
      }
    }
  }
}

TEST_CASE("returned modes satisfy the dispersion relation and are normalized") {
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    const auto s = symmetric(1.45, 1.479, 8.0, pol);
    const auto modes = find_slab_modes(s, 10);
    REQUIRE(modes.size() >= 3);
    for (std::size_t i = 0; i < modes.size(); ++i) {
      CHECK(std::abs(slab_dispersion(s, modes[i].n_eff)) < 1e-10);
      CHECK(weighted_norm(modes[i], s) == doctest::Approx(1.0).epsilon(1e-9));
      if (i > 0) CHECK(modes[i].n_eff.real() < modes[i - 1].n_eff.real());
    }
  }
  CHECK(find_slab_modes(symmetric(1.45, 1.479, 8.0, Polarization::TE), 2).size() == 2);
  CHECK_THROWS_AS(find_slab_modes(symmetric(1.45, 1.479, 8.0, Polarization::TE), 0), std::invalid_argument);
}

TEST_CASE("fundamental of a symmetric slab has no node") {
  const auto m = find_slab_modes(symmetric(1.45, 1.456, 5.5, Polarization::TE), 1).at(0);
  double peak = 0;
  for (auto f : m.field) peak = std::max(peak, std::abs(f));
  for (auto f : m.field) {
    CHECK(std::abs(f.imag()) < 1e-12 * peak);
    CHECK(f.real() > -1e-12 * peak);
  }
  CHECK(m.order == 0);
}

TEST_CASE("planar device stack: fundamental bracketed by cladding and core") {
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    const auto s = planar_device(pol);
    const auto modes = find_slab_modes(s, 4);
    REQUIRE(!modes.empty());
    const auto& m = modes.front();
    CHECK(m.n_eff.real() > 1.444);
    CHECK(m.n_eff.real() < 1.444 * 1.006);
    CHECK(m.n_eff.imag() >= -1e-12);
    if (pol == Polarization::TE) {
      // The substrate sits 17 um below; the mode matches the 3-layer guide.
      const auto ref = oracle::asymmetric_slab_te(1.444, 1.444 * 1.006, 1.0, 5.5, 1.55);
      CHECK(std::abs(m.n_eff.real() - ref.front()) < 1e-9);
    }
  }
}

TEST_CASE("lossy core: imaginary part follows the confinement factor") {
  const double n_clad = 1.45, n_core = 1.456, d = 5.5, k = 1e-6;
  SlabStack s = symmetric(n_clad, n_core, d, Polarization::TE);
  s.layers[1].index.n_imag = k;
  const auto m = find_slab_modes(s, 1).at(0);
  const double n0 = oracle::symmetric_slab(n_clad, n_core, d, 1.55, false).front();
  const double gamma = oracle::symmetric_core_fraction_te(n_clad, n_core, d, 1.55, n0);
  CHECK(m.n_eff.imag() == doctest::Approx(gamma * n_core * k / n0).epsilon(1e-3));
}

TEST_CASE("tungsten top layer absorbs the TM mode") {
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    SlabStack s;
    s.layers = {{{1.444, 0}, 0}, {{1.444 * 1.006, 0}, 5.5}, {{2.7, 5.25}, 0.040}, {{1.0, 0}, 0}};
    s.polarization = pol;
    const auto modes = find_slab_modes(s, 1);
    REQUIRE(modes.size() == 1);
    const double a = alpha_from_neff(modes[0].n_eff.imag(), 1.55);
    CAPTURE(a);
    CHECK(modes[0].n_eff.imag() > 0.0);
    CHECK(modes[0].n_eff.imag() < 5.25);
    CHECK(a > 0.5);
    CHECK(a < 1000.0);
    // Fine sampling across the metal.
    std::size_t inside = 0;
    for (double y : modes[0].y_um)
      if (y > 5.5 && y < 5.54) ++inside;
    CHECK(inside >= 15);
  }
}

TEST_CASE("scaling invariance") {
  for (auto pol : {Polarization::TE, Polarization::TM}) {
    auto s = planar_device(pol);
    const auto a = find_slab_modes(s, 3);
    for (auto& l : s.layers) l.thickness_um *= 2.5;
    s.wavelength_um *= 2.5;
    const auto b = find_slab_modes(s, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i].n_eff - b[i].n_eff) < 1e-10);
  }
}

TEST_CASE("mode count is monotone in core thickness") {
  std::size_t last = 0;
  for (double d = 1.0; d <= 20.0; d += 1.5) {
    const auto n = find_slab_modes(symmetric(1.45, 1.46, d, Polarization::TE), 50).size();
    CHECK(n >= last);
    last = n;
  }
  CHECK(last >= 3);
}

TEST_CASE("passivity and near-cutoff flag") {
  // Thickness chosen so the second mode sits just above cutoff.
  const double n_clad = 1.45, n_core = 1.46;
  const double k0 = 2 * std::numbers::pi / 1.55;
  const double d_cut = std::numbers::pi / (k0 * std::sqrt(n_core * n_core - n_clad * n_clad));
  const auto modes = find_slab_modes(symmetric(n_clad, n_core, d_cut * 1.003, Polarization::TE), 5);
  REQUIRE(modes.size() == 2);
  CHECK_FALSE(modes[0].near_cutoff);
  CHECK(modes[1].near_cutoff);
  for (const auto& m : modes) CHECK(m.n_eff.imag() >= -1e-12);
}

TEST_CASE("refinement errors carry the search box") {
  const auto s = symmetric(1.45, 1.456, 5.5, Polarization::TE);
  const auto m = refine_slab_mode(s, {1.453, 0.0});
  CHECK(std::abs(slab_dispersion(s, m.n_eff)) < 1e-10);
  try {
    refine_slab_mode(s, {std::nan(""), 0.0});
    FAIL("expected SlabSolverError");
  } catch (const SlabSolverError& e) {
    CHECK(std::string(e.what()).find("Newton") != std::string::npos);
  }
  SlabStack bad;
  bad.layers = {{{1.45, 0}, 0}, {{1.46, 0}, 0.0}, {{1.45, 0}, 0}};
  CHECK_THROWS_AS(find_slab_modes(bad, 1), std::invalid_argument);
}

TEST_CASE("vertical stack of the device") {
  auto cs = with_detector(default_device(), DetectorGeometry{});
  const auto s = vertical_stack(cs, 0.0, Polarization::TM);
  REQUIRE(s.layers.size() == 5);
  CHECK(s.layers[2].index.n_real == doctest::Approx(1.444 * 1.006 * 1.003));
  CHECK(s.layers[3].thickness_um == doctest::Approx(0.04));
  CHECK(s.origin_um == doctest::Approx(-22.5));
  CHECK(vertical_stack(cs, 20.0, Polarization::TM).layers.size() == 4);
}
