#include "evtes/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace evtes {

namespace {

struct Zone {
  double lo, hi, step;
};

// Edges covering [lo, hi] with breakpoints at `marks`; each piece uses the
// smallest step of the zones containing its midpoint, else `base`.
std::vector<double> graded_edges(double lo, double hi, std::vector<double> marks, const std::vector<Zone>& zones,
                                 double base) {
  marks.push_back(lo);
  marks.push_back(hi);
  for (const auto& z : zones) {
    marks.push_back(z.lo);
    marks.push_back(z.hi);
  }
  std::vector<double> b;
  for (double m : marks)
    if (m >= lo && m <= hi) b.push_back(m);
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end(), [](double a, double c) { return std::abs(a - c) < 1e-9; }), b.end());

  std::vector<double> e;
  for (std::size_t k = 0; k + 1 < b.size(); ++k) {
    const double a = b[k], c = b[k + 1], mid = 0.5 * (a + c);
    double step = base;
    for (const auto& z : zones)
      if (mid > z.lo && mid < z.hi) step = std::min(step, z.step);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((c - a) / step - 1e-9)));
    for (std::size_t i = 0; i < n; ++i) e.push_back(a + (c - a) * static_cast<double>(i) / static_cast<double>(n));
  }
  e.push_back(b.back());
  return e;
}

std::vector<double> centers(const std::vector<double>& e) {
  std::vector<double> c(e.size() - 1);
  for (std::size_t i = 0; i + 1 < e.size(); ++i) c[i] = 0.5 * (e[i] + e[i + 1]);
  return c;
}

std::vector<cplx> stretch(const std::vector<double>& c, double lo, double hi, const EdgeCondition& lo_e,
                          const EdgeCondition& hi_e) {
  std::vector<cplx> s(c.size(), cplx{1.0});
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (lo_e.kind == EdgeKind::PML && c[i] < lo + lo_e.pml_um) {
      const double d = (lo + lo_e.pml_um - c[i]) / lo_e.pml_um;
      s[i] += cplx{lo_e.stretch, lo_e.strength} * d * d;
    }
    if (hi_e.kind == EdgeKind::PML && c[i] > hi - hi_e.pml_um) {
      const double d = (c[i] - (hi - hi_e.pml_um)) / hi_e.pml_um;
      s[i] += cplx{hi_e.stretch, hi_e.strength} * d * d;
    }
  }
  return s;
}

double absorber_depth(const EdgeCondition& e) { return e.kind == EdgeKind::PML ? e.pml_um : 0.0; }

}  // namespace

double pml_round_trip_db(const EdgeCondition& e, double wavelength_um, double n) {
  if (e.kind != EdgeKind::PML) return 0.0;
  // Field decays as exp(-k n Im(int s dx)); Im(int s) = strength L / 3 per pass.
  const double k = 2.0 * std::numbers::pi / wavelength_um * n;
  const double neper = 2.0 * k * e.strength * e.pml_um / 3.0;
  return 20.0 * std::log10(std::exp(1.0)) * neper;
}

GridConfig GridConfig::refined(double factor) const {
  GridConfig c = *this;
  c.dx_um /= factor;
  c.dx_outer_um /= factor;
  c.dy_um /= factor;
  c.dy_far_um /= factor;
  c.dy_metal_um /= factor;
  c.dy_surface_um /= factor;
  return c;
}

void GridConfig::validate() const {
  for (double v : {dx_um, dx_outer_um, dy_um, dy_far_um, dy_metal_um, dy_surface_um})
    if (!(v > 0.0)) throw std::invalid_argument("grid: spacings must be > 0");
  if (inner_half_width_um < 0.0 || near_core_margin_um < 0.0 || metal_margin_um < 0.0 || surface_below_um < 0.0 ||
      surface_above_um < 0.0)
    throw std::invalid_argument("grid: margins must be >= 0");
  for (const auto& e : edges)
    if (e.kind == EdgeKind::PML && (!(e.pml_um > 0.0) || e.strength < 0.0 || e.stretch < 0.0))
      throw std::invalid_argument("grid: absorbing layer needs thickness > 0 and non-negative strength");
}

bool Grid2D::same_as(const Grid2D& o) const {
  return x_edges == o.x_edges && y_edges == o.y_edges && sx == o.sx && sy == o.sy && wavelength_um == o.wavelength_um;
}

void Grid2D::validate() const {
  auto increasing = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1])) return false;
    return v.size() >= 2;
  };
  if (!increasing(x_edges) || !increasing(y_edges)) throw std::invalid_argument("grid: coordinates must increase");
  if (x.size() + 1 != x_edges.size() || y.size() + 1 != y_edges.size() || sx.size() != x.size() ||
      sy.size() != y.size())
    throw std::invalid_argument("grid: inconsistent array sizes");
}

Grid2D make_grid(const CrossSection& cs, const GridConfig& cfg) {
  cs.validate();
  cfg.validate();
  const auto& E = cfg.edges;
  const double half = cfg.half_width_um.value_or(0.5 * cs.window_width_um);
  const double x_lo = -half, x_hi = half;
  const double y_lo = cfg.y_min_um.value_or(-cs.stack_height_um() - cfg.substrate_depth_um);
  const double y_hi = cfg.y_max_um.value_or(cfg.cover_height_um);
  if (!(y_hi > y_lo) || !(half > 0.0)) throw std::invalid_argument("grid: empty window");

  // Lateral: fine inside the channel region, aligned to the overlay edges.
  std::vector<double> xm{-cfg.inner_half_width_um, cfg.inner_half_width_um};
  if (E[kLeft].kind == EdgeKind::PML) xm.push_back(x_lo + E[kLeft].pml_um);
  if (E[kRight].kind == EdgeKind::PML) xm.push_back(x_hi - E[kRight].pml_um);
  if (cs.overlay) {
    xm.push_back(cs.overlay->offset_um - 0.5 * cs.overlay->width_um);
    xm.push_back(cs.overlay->offset_um + 0.5 * cs.overlay->width_um);
  }
  std::vector<Zone> xz{{-cfg.inner_half_width_um, cfg.inner_half_width_um, cfg.dx_um}};

  // Vertical: film interfaces, refinement around the core and the metal.
  std::vector<double> ym{0.0};
  for (std::size_t i = 0; i < cs.films.size(); ++i) ym.push_back(cs.film_bottom_um(i));
  if (E[kBottom].kind == EdgeKind::PML) ym.push_back(y_lo + E[kBottom].pml_um);
  if (E[kTop].kind == EdgeKind::PML) ym.push_back(y_hi - E[kTop].pml_um);
  std::vector<Zone> yz;
  double core_lo = -cs.stack_height_um(), core_hi = 0.0;
  if (cs.channel) {
    core_lo = cs.film_bottom_um(cs.channel->core_film);
    core_hi = core_lo + cs.films[cs.channel->core_film].thickness_um;
  }
  yz.push_back({core_lo - cfg.near_core_margin_um, std::max(core_hi, 0.0) + cfg.near_core_margin_um, cfg.dy_um});
  yz.push_back({-cfg.surface_below_um, cfg.surface_above_um, cfg.dy_surface_um});
  auto add_metal = [&](double lo, double hi) {
    const double t = hi - lo;
    ym.push_back(lo);
    ym.push_back(hi);
    yz.push_back({lo - cfg.metal_margin_um, hi + cfg.metal_margin_um, cfg.dy_metal_um});
    yz.push_back({lo, hi, std::min(cfg.dy_metal_um, t / 8.0)});
  };
  if (cs.overlay) add_metal(0.0, cs.overlay->thickness_um());
  for (std::size_t i = 0; i < cs.films.size(); ++i)
    if (cs.films[i].index.permittivity().real() < 0.0)
      add_metal(cs.film_bottom_um(i), cs.film_bottom_um(i) + cs.films[i].thickness_um);

  Grid2D g;
  g.wavelength_um = cs.wavelength_um;
  g.edges = E;
  g.x_edges = graded_edges(x_lo, x_hi, xm, xz, cfg.dx_outer_um);
  g.y_edges = graded_edges(y_lo, y_hi, ym, yz, cfg.dy_far_um);
  g.x = centers(g.x_edges);
  g.y = centers(g.y_edges);
  g.sx = stretch(g.x, x_lo, x_hi, E[kLeft], E[kRight]);
  g.sy = stretch(g.y, y_lo, y_hi, E[kBottom], E[kTop]);
  g.validate();

  // Absorbers must stay clear of the guiding region and the detector.
  const double ax_lo = x_lo + absorber_depth(E[kLeft]), ax_hi = x_hi - absorber_depth(E[kRight]);
  const double ay_lo = y_lo + absorber_depth(E[kBottom]), ay_hi = y_hi - absorber_depth(E[kTop]);
  if (cs.overlay) {
    const double l = cs.overlay->offset_um - 0.5 * cs.overlay->width_um;
    const double r = cs.overlay->offset_um + 0.5 * cs.overlay->width_um;
    if (l < ax_lo || r > ax_hi || cs.overlay->thickness_um() > ay_hi)
      throw std::invalid_argument("grid: detector overlay reaches into the absorbing boundary");
  }
  if (core_lo < ay_lo || core_hi > ay_hi) throw std::invalid_argument("grid: absorbing boundary overlaps the core");
  if (cs.channel && cs.channel->contrast > 0.0) {
    const double w = cs.channel->fwhm_um;
    if (-w < ax_lo || w > ax_hi) throw std::invalid_argument("grid: absorbing boundary overlaps the channel");
  }
  return g;
}

}  // namespace evtes
