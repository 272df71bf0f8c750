#include "evtes/slab.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>

namespace evtes {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNewtonTol = 1e-14;
constexpr int kNewtonMaxIter = 100;
constexpr double kCutoffFlag = 1e-6;
constexpr double kMetalMargin_um = 0.2;
constexpr double kMetalStep_um = 0.002;
constexpr double kDefaultStep_um = 0.05;

double k0_of(const SlabStack& s) { return 2.0 * kPi / s.wavelength_um; }

cplx flux_factor(Polarization pol, cplx eps) { return pol == Polarization::TE ? cplx{1.0} : eps; }

// Decay constant of a semi-infinite layer: fields go as exp(-gamma |y|).
cplx outer_gamma(double k0, cplx n_layer, cplx n_eff) {
  const cplx eps = n_layer * n_layer;
  const cplx b2 = n_eff * n_eff;
  if (n_eff.real() > n_layer.real()) return k0 * std::sqrt(b2 - eps);
  return cplx{0.0, -1.0} * k0 * std::sqrt(eps - b2);
}

// sinh(z)/z, entire.
cplx sinhc(cplx z) {
  if (std::abs(z) < 1e-4) {
    const cplx z2 = z * z;
    return 1.0 + z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sinh(z) / z;
}

struct State {
  cplx u, v;  // v = u' / p
};

State propagate(State s, cplx gamma, cplx p, double d) {
  const cplx gd = gamma * d;
  const cplx c = std::cosh(gd);
  const cplx sh = d * sinhc(gd);           // sinh(gamma d) / gamma
  const cplx g2 = gamma * gamma * sh;      // gamma sinh(gamma d)
  return {c * s.u + p * sh * s.v, g2 / p * s.u + c * s.v};
}

cplx inner_gamma(double k0, cplx n_layer, cplx n_eff) { return k0 * std::sqrt(n_eff * n_eff - n_layer * n_layer); }

std::optional<cplx> newton(const SlabStack& stack, cplx z) {
  for (int it = 0; it < kNewtonMaxIter; ++it) {
    const cplx f = slab_dispersion(stack, z);
    if (f == cplx{0.0}) return z;
    const double h = 1e-7 * std::max(1.0, std::abs(z));
    const cplx fp = (slab_dispersion(stack, z + h) - slab_dispersion(stack, z - h)) / (2.0 * h);
    if (fp == cplx{0.0} || !std::isfinite(std::abs(fp))) return std::nullopt;
    cplx step = f / fp;
    const double max_step = 0.02 * std::max(1.0, std::abs(z));
    if (std::abs(step) > max_step) step *= max_step / std::abs(step);
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
    if (std::abs(step) < kNewtonTol * std::max(1.0, std::abs(z))) return z;
  }
  return std::nullopt;
}

double edge_phase(const SlabStack& stack, cplx za, cplx zb, cplx fa, cplx fb, int depth) {
  const double d = std::arg(fb / fa);
  if (std::abs(d) < kPi / 8.0 || depth > 48) return d;
  const cplx zm = 0.5 * (za + zb);
  const cplx fm = slab_dispersion(stack, zm);
  return edge_phase(stack, za, zm, fa, fm, depth + 1) + edge_phase(stack, zm, zb, fm, fb, depth + 1);
}

double box_floor(const SlabStack& s, double ceiling_eps) {
  double floor_eps = -1.0;
  for (const auto& l : s.layers) {
    const double e = l.index.permittivity().real();
    if (e > 0.0 && e < ceiling_eps) floor_eps = std::max(floor_eps, e);
  }
  return floor_eps;
}

void isolate(const SlabStack& stack, const SearchBox& box, int count, int depth, std::vector<cplx>& roots) {
  if (count <= 0) return;
  const double w = box.re_hi - box.re_lo;
  const double h = box.im_hi - box.im_lo;
  if (count == 1 || std::max(w, h) < 1e-12) {
    const cplx center{0.5 * (box.re_lo + box.re_hi), 0.5 * (box.im_lo + box.im_hi)};
    const double pad = 1e-9 * std::max(w, h) + 1e-13;
    for (cplx start : {center, cplx{box.re_lo + 0.25 * w, center.imag()}, cplx{box.re_lo + 0.75 * w, center.imag()}}) {
      if (auto r = newton(stack, start); r && box.contains(*r, pad)) {
        roots.push_back(*r);
        return;
      }
    }
    if (std::max(w, h) < 1e-12 || depth > 60)
      throw SlabSolverError("slab root refinement did not converge", box);
  }
  if (depth > 60) throw SlabSolverError("slab root isolation exceeded depth limit", box);
  // Off-center split so a lossless root on the real axis never lands on an edge.
  constexpr double frac = 0.5 + 0.0123;
  SearchBox a = box, b = box;
  if (w >= h) {
    const double mid = box.re_lo + frac * w;
    a.re_hi = mid;
    b.re_lo = mid;
  } else {
    const double mid = box.im_lo + frac * h;
    a.im_hi = mid;
    b.im_lo = mid;
  }
  const int ca = count_slab_zeros(stack, a);
  const int cb = count_slab_zeros(stack, b);
  isolate(stack, a, ca, depth + 1, roots);
  isolate(stack, b, cb, depth + 1, roots);
}

std::vector<double> sample_positions(const SlabStack& s, cplx n_eff) {
  const double k0 = k0_of(s);
  const auto& sub = s.layers.front();
  const auto& cov = s.layers.back();
  auto extent = [&](const SlabLayer& l) {
    const cplx g = outer_gamma(k0, l.index.value(), n_eff);
    if (g.real() <= 1e-6) return 2.0;
    return std::min(8.0 / g.real(), 20.0);
  };

  std::vector<double> breaks;
  const double y0 = s.origin_um - extent(sub);
  breaks.push_back(y0);
  std::vector<std::pair<double, double>> metal_zones;
  double y = s.origin_um;
  breaks.push_back(y);
  for (std::size_t i = 1; i + 1 < s.layers.size(); ++i) {
    const double top = y + s.layers[i].thickness_um;
    if (s.layers[i].index.permittivity().real() < 0.0) metal_zones.emplace_back(y - kMetalMargin_um, top + kMetalMargin_um);
    y = top;
    breaks.push_back(y);
  }
  const double y1 = y + extent(cov);
  breaks.push_back(y1);
  for (const auto& [a, b] : metal_zones) {
    breaks.push_back(std::max(a, y0));
    breaks.push_back(std::min(b, y1));
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               breaks.end());

  std::vector<double> pts;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    const double mid = 0.5 * (a + b);
    const bool fine = std::any_of(metal_zones.begin(), metal_zones.end(),
                                  [&](const auto& z) { return mid > z.first && mid < z.second; });
    const double step = fine ? kMetalStep_um : kDefaultStep_um;
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) / step - 1e-9)));
    for (std::size_t k = 0; k < n; ++k) pts.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(n));
  }
  pts.push_back(breaks.back());
  return pts;
}

SlabMode sample_mode(const SlabStack& s, cplx n_eff) {
  const double k0 = k0_of(s);
  const auto pol = s.polarization;
  const auto& L = s.layers;
  const cplx g_sub = outer_gamma(k0, L.front().index.value(), n_eff);
  const cplx g_cov = outer_gamma(k0, L.back().index.value(), n_eff);

  // States at each finite-layer bottom.
  std::vector<State> bottoms;
  std::vector<double> y_bottoms;
  State st{1.0, g_sub / flux_factor(pol, L.front().index.permittivity())};
  double y = s.origin_um;
  for (std::size_t i = 1; i + 1 < L.size(); ++i) {
    bottoms.push_back(st);
    y_bottoms.push_back(y);
    st = propagate(st, inner_gamma(k0, L[i].index.value(), n_eff), flux_factor(pol, L[i].index.permittivity()),
                   L[i].thickness_um);
    y += L[i].thickness_um;
  }
  const double y_top = y;
  const cplx u_top = st.u;

  SlabMode mode;
  mode.n_eff = n_eff;
  mode.y_um = sample_positions(s, n_eff);
  mode.field.resize(mode.y_um.size());

  auto layer_at = [&](double yy) -> std::size_t {
    if (yy < s.origin_um) return 0;
    for (std::size_t i = 0; i < y_bottoms.size(); ++i) {
      const double top = y_bottoms[i] + L[i + 1].thickness_um;
      if (yy < top || (i + 1 == y_bottoms.size() && yy <= top)) return i + 1;
    }
    return L.size() - 1;
  };

  for (std::size_t k = 0; k < mode.y_um.size(); ++k) {
    const double yy = mode.y_um[k];
    const auto li = layer_at(yy);
    if (li == 0) {
      mode.field[k] = std::exp(g_sub * (yy - s.origin_um));
    } else if (li == L.size() - 1) {
      mode.field[k] = u_top * std::exp(-g_cov * (yy - y_top));
    } else {
      const auto st_k = propagate(bottoms[li - 1], inner_gamma(k0, L[li].index.value(), n_eff),
                                  flux_factor(pol, L[li].index.permittivity()), yy - y_bottoms[li - 1]);
      mode.field[k] = st_k.u;
    }
  }

  // Unit power flux and a real positive peak.
  double norm = 0.0;
  for (std::size_t k = 0; k + 1 < mode.y_um.size(); ++k) {
    const double mid = 0.5 * (mode.y_um[k] + mode.y_um[k + 1]);
    const auto li = layer_at(mid);
    const double w = power_weight(pol, L[li].index.permittivity());
    norm += 0.5 * (std::norm(mode.field[k]) + std::norm(mode.field[k + 1])) * w * (mode.y_um[k + 1] - mode.y_um[k]);
  }
  std::size_t peak = 0;
  for (std::size_t k = 1; k < mode.field.size(); ++k)
    if (std::abs(mode.field[k]) > std::abs(mode.field[peak])) peak = k;
  const cplx phase = std::abs(mode.field[peak]) > 0 ? std::abs(mode.field[peak]) / mode.field[peak] : cplx{1.0};
  const double scale = norm > 0 ? 1.0 / std::sqrt(norm) : 1.0;
  for (auto& f : mode.field) f *= phase * scale;

  // Order = sign changes of the dominant real part, ignoring the far tails.
  const double amax = std::abs(mode.field[peak]);
  int changes = 0;
  double last = 0.0;
  for (const auto& f : mode.field) {
    if (std::abs(f) < 1e-3 * amax) continue;
    const double r = f.real();
    if (last != 0.0 && r * last < 0.0) ++changes;
    if (r != 0.0) last = r;
  }
  mode.order = changes;

  const double ceiling_eps = [&] {
    double c = 0.0;
    for (std::size_t i = 1; i + 1 < L.size(); ++i) c = std::max(c, L[i].index.permittivity().real());
    return c;
  }();
  const double floor_eps = box_floor(s, ceiling_eps);
  mode.near_cutoff = floor_eps > 0.0 && std::abs(n_eff.real() - std::sqrt(floor_eps)) < kCutoffFlag;
  return mode;
}

}  // namespace

std::string_view to_string(Polarization p) { return p == Polarization::TE ? "TE" : "TM"; }

Polarization parse_polarization(std::string_view text) {
  if (text == "TE" || text == "te") return Polarization::TE;
  if (text == "TM" || text == "tm") return Polarization::TM;
  throw std::invalid_argument("unknown polarization '" + std::string(text) + "'");
}

double power_weight(Polarization pol, cplx eps) {
  return pol == Polarization::TE ? 1.0 : std::abs((1.0 / eps).real());
}

void SlabStack::validate() const {
  if (layers.size() < 3) throw std::invalid_argument("slab stack needs at least 3 layers");
  if (!(wavelength_um > 0.0)) throw std::invalid_argument("slab stack: wavelength must be > 0");
  for (std::size_t i = 1; i + 1 < layers.size(); ++i)
    if (!(layers[i].thickness_um > 0.0)) throw std::invalid_argument("slab stack: inner layer thickness must be > 0");
}

cplx slab_dispersion(const SlabStack& s, cplx n_eff) {
  const double k0 = k0_of(s);
  const auto pol = s.polarization;
  const auto& L = s.layers;
  const cplx g_sub = outer_gamma(k0, L.front().index.value(), n_eff);
  const cplx g_cov = outer_gamma(k0, L.back().index.value(), n_eff);
  State st{1.0, g_sub / flux_factor(pol, L.front().index.permittivity())};
  for (std::size_t i = 1; i + 1 < L.size(); ++i)
    st = propagate(st, inner_gamma(k0, L[i].index.value(), n_eff), flux_factor(pol, L[i].index.permittivity()),
                   L[i].thickness_um);
  return st.v + g_cov / flux_factor(pol, L.back().index.permittivity()) * st.u;
}

SearchBox default_search_box(const SlabStack& s) {
  s.validate();
  double ceiling_eps = 0.0;
  double max_k = 0.0;
  for (std::size_t i = 1; i + 1 < s.layers.size(); ++i)
    ceiling_eps = std::max(ceiling_eps, s.layers[i].index.permittivity().real());
  for (const auto& l : s.layers) max_k = std::max(max_k, l.index.n_imag);
  const double floor_eps = box_floor(s, ceiling_eps);
  if (floor_eps <= 0.0) return {};
  const double hi = std::sqrt(ceiling_eps);
  const double lo = std::sqrt(floor_eps);
  const double span = hi - lo;
  const double lo_pad = 1e-9 * std::max(1.0, lo);
  SearchBox box;
  box.re_lo = lo + lo_pad;
  box.re_hi = hi;
  const double height = 0.25 * span;
  box.im_lo = -0.02 * height;
  box.im_hi = max_k > 0.0 ? std::min(max_k, height) + 0.02 * height : 0.02 * height;
  return box;
}

int count_slab_zeros(const SlabStack& stack, const SearchBox& box) {
  if (box.empty()) return 0;
  const cplx c[4] = {{box.re_lo, box.im_lo}, {box.re_hi, box.im_lo}, {box.re_hi, box.im_hi}, {box.re_lo, box.im_hi}};
  constexpr int kEdgeSamples = 48;
  double total = 0.0;
  for (int e = 0; e < 4; ++e) {
    const cplx a = c[e];
    const cplx b = c[(e + 1) % 4];
    cplx za = a;
    cplx fa = slab_dispersion(stack, za);
    for (int k = 1; k <= kEdgeSamples; ++k) {
      const cplx zb = a + (b - a) * (static_cast<double>(k) / kEdgeSamples);
      const cplx fb = slab_dispersion(stack, zb);
      if (fa == cplx{0.0} || fb == cplx{0.0}) throw SlabSolverError("slab dispersion vanishes on the search contour", box);
      total += edge_phase(stack, za, zb, fa, fb, 0);
      za = zb;
      fa = fb;
    }
  }
  const double winding = total / (2.0 * kPi);
  const double rounded = std::round(winding);
  if (std::abs(winding - rounded) > 0.2 || rounded < 0)
    throw SlabSolverError("argument-principle count is not an integer (" + format_double(winding) + ")", box);
  return static_cast<int>(rounded);
}

std::vector<SlabMode> find_slab_modes(const SlabStack& stack, int max_modes) {
  return find_slab_modes(stack, max_modes, default_search_box(stack));
}

std::vector<SlabMode> find_slab_modes(const SlabStack& stack, int max_modes, const SearchBox& box) {
  if (max_modes < 1) throw std::invalid_argument("find_slab_modes: max_modes must be >= 1");
  stack.validate();
  if (box.empty()) return {};
  const int count = count_slab_zeros(stack, box);
  std::vector<cplx> roots;
  isolate(stack, box, count, 0, roots);
  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
  roots.erase(std::unique(roots.begin(), roots.end(), [](cplx a, cplx b) { return std::abs(a - b) < 1e-10; }),
              roots.end());
  if (static_cast<int>(roots.size()) > max_modes) roots.resize(static_cast<std::size_t>(max_modes));
  std::vector<SlabMode> modes;
  modes.reserve(roots.size());
  for (const auto& r : roots) modes.push_back(sample_mode(stack, r));
  return modes;
}

SlabMode refine_slab_mode(const SlabStack& stack, cplx guess) {
  stack.validate();
  auto r = newton(stack, guess);
  if (!r) {
    const double d = 1e-6;
    throw SlabSolverError("Newton refinement failed from guess " + format_double(guess.real()) + "+" +
                              format_double(guess.imag()) + "i",
                          SearchBox{guess.real() - d, guess.real() + d, guess.imag() - d, guess.imag() + d});
  }
  return sample_mode(stack, *r);
}

SlabStack vertical_stack(const CrossSection& cs, double x_um, Polarization pol) {
  SlabStack s;
  s.wavelength_um = cs.wavelength_um;
  s.polarization = pol;
  s.origin_um = -cs.stack_height_um();
  s.layers.push_back({cs.substrate.index, 0.0});
  for (std::size_t i = 0; i < cs.films.size(); ++i) {
    const double mid = cs.film_bottom_um(i) + 0.5 * cs.films[i].thickness_um;
    const cplx n = cs.index_at(x_um, mid);
    s.layers.push_back({{n.real(), n.imag()}, cs.films[i].thickness_um});
  }
  if (cs.overlay && std::abs(x_um - cs.overlay->offset_um) < 0.5 * cs.overlay->width_um)
    s.layers.push_back({cs.overlay->index, cs.overlay->thickness_um()});
  s.layers.push_back({cs.cover.index, 0.0});
  return s;
}

}  // namespace evtes
