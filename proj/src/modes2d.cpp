#include "evtes/modes2d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shift_invert.hpp"

namespace evtes {

namespace {

struct Coeffs {
  cplx a, b, f;  // row prefactor, neighbor factor, half-cell flux resistance
};

// Per-cell factors of the flux form (a_i / h_i) sum (b_n u_n - b_i u_i) / (f_i + f_n).
Coeffs coeffs(Polarization pol, bool x_dir, cplx eps, cplx h) {
  if (pol == Polarization::TE && x_dir) return {1.0, eps, eps * h / 2.0};
  if (pol == Polarization::TM && !x_dir) return {eps, 1.0, eps * h / 2.0};
  return {1.0, 1.0, h / 2.0};
}

std::vector<cplx> permittivity(const CrossSection& cs, const Grid2D& g) {
  std::vector<cplx> eps(g.size());
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const cplx n = cs.index_at(g.x[i], g.y[j]);
      eps[g.index(i, j)] = n * n;
    }
  return eps;
}

detail::SpMat assemble(const Grid2D& g, const std::vector<cplx>& eps, Polarization pol) {
  const double k0 = 2.0 * std::numbers::pi / g.wavelength_um;
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(g.size() * 5);

  auto line = [&](bool x_dir, std::size_t fixed, std::size_t len) {
    auto id = [&](std::size_t k) { return x_dir ? g.index(k, fixed) : g.index(fixed, k); };
    auto width = [&](std::size_t k) { return x_dir ? g.dx(k) * g.sx[k] : g.dy(k) * g.sy[k]; };
    const auto& lo_edge = g.edges[x_dir ? kLeft : kBottom];
    const auto& hi_edge = g.edges[x_dir ? kRight : kTop];
    for (std::size_t k = 0; k < len; ++k) {
      const auto row = id(k);
      const auto c = coeffs(pol, x_dir, eps[row], width(k));
      const cplx pre = c.a / width(k);
      cplx diag = 0.0;
      for (int side : {-1, 1}) {
        const bool boundary = (side < 0 && k == 0) || (side > 0 && k + 1 == len);
        if (boundary) {
          const auto& e = side < 0 ? lo_edge : hi_edge;
          if (e.kind != EdgeKind::Neumann) diag -= pre * c.b / c.f;
          continue;
        }
        const std::size_t kn = side < 0 ? k - 1 : k + 1;
        const auto col = id(kn);
        const auto cn = coeffs(pol, x_dir, eps[col], width(kn));
        const cplx inv = 1.0 / (c.f + cn.f);
        trip.emplace_back(static_cast<int>(row), static_cast<int>(col), pre * cn.b * inv);
        diag -= pre * c.b * inv;
      }
      trip.emplace_back(static_cast<int>(row), static_cast<int>(row), diag);
    }
  };
  for (std::size_t j = 0; j < g.ny(); ++j) line(true, j, g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) line(false, i, g.ny());
  for (std::size_t p = 0; p < g.size(); ++p)
    trip.emplace_back(static_cast<int>(p), static_cast<int>(p), k0 * k0 * eps[p]);

  detail::SpMat A(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

std::pair<double, double> core_extent(const CrossSection& cs) {
  if (!cs.channel) return {-cs.stack_height_um(), 0.0};
  const double lo = cs.film_bottom_um(cs.channel->core_film);
  return {lo, lo + cs.films[cs.channel->core_film].thickness_um};
}

Eigen::VectorXcd start_vector(const CrossSection& cs, const Grid2D& g) {
  const auto [lo, hi] = core_extent(cs);
  const double yc = 0.5 * (lo + hi), sy = std::max(1.0, 0.5 * (hi - lo));
  const double sx = cs.channel ? std::max(1.0, cs.channel->fwhm_um) : 0.25 * cs.window_width_um;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const double dx = g.x[i] / sx, dy = (g.y[j] - yc) / sy;
      // The odd part keeps antisymmetric modes reachable from the Krylov space.
      v[static_cast<Eigen::Index>(g.index(i, j))] = std::exp(-0.5 * (dx * dx + dy * dy)) * (1.0 + 0.3 * dx) + 1e-3;
    }
  return v;
}

void check_guess(const CrossSection& cs, cplx guess) {
  double lo = cs.substrate.index.n_real, hi = lo, kmax = cs.substrate.index.n_imag;
  auto take = [&](const ComplexIndex& n) {
    lo = std::min(lo, n.n_real);
    hi = std::max(hi, n.n_real);
    kmax = std::max(kmax, n.n_imag);
  };
  for (const auto& f : cs.films) take(f.index);
  take(cs.cover.index);
  if (cs.overlay) take(cs.overlay->index);
  if (cs.channel) hi = std::max(hi, cs.core().index.n_real * (1.0 + cs.channel->contrast));
  if (!(guess.real() >= lo && guess.real() <= hi) || guess.imag() < -1e-3 || guess.imag() > kmax + 1e-3 ||
      !std::isfinite(guess.real()) || !std::isfinite(guess.imag()))
    throw std::invalid_argument("solve_modes_2d: guess " + format_double(guess.real()) + "+" +
                                format_double(guess.imag()) + "i outside the physical range [" + format_double(lo) +
                                ", " + format_double(hi) + "]");
}

void check_metal_sampling(const CrossSection& cs, const Grid2D& g) {
  if (!cs.overlay) return;
  const double t = cs.overlay->thickness_um();
  const auto inside = std::count_if(g.y.begin(), g.y.end(), [&](double y) { return y > 0.0 && y < t; });
  if (inside < 8)
    throw std::invalid_argument("solve_modes_2d: overlay resolved by " + std::to_string(inside) +
                                " vertical samples, need >= 8");
}

double core_fraction(const CrossSection& cs, const Mode2D& m) {
  const auto& g = *m.grid;
  const auto [lo, hi] = core_extent(cs);
  const double half = cs.channel ? 2.0 * cs.channel->fwhm_um : 0.25 * cs.window_width_um;
  double in = 0.0, all = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const auto p = g.index(i, j);
      const double w = std::norm(m.field[p]) * m.weight[p] * g.area(i, j);
      all += w;
      if (std::abs(g.x[i]) < half && g.y[j] > lo - 2.0 && g.y[j] < hi + 2.0) in += w;
    }
  return all > 0 ? in / all : 0.0;
}

}  // namespace

double Mode2D::power() const {
  double s = 0.0;
  for (std::size_t i = 0; i < grid->nx(); ++i)
    for (std::size_t j = 0; j < grid->ny(); ++j) {
      const auto p = grid->index(i, j);
      s += std::norm(field[p]) * weight[p] * grid->area(i, j);
    }
  return s;
}

double Mode2D::alpha_cm() const { return alpha_from_neff(n_eff.imag(), grid->wavelength_um); }

cplx default_guess(const CrossSection& cs) {
  double hi = 0.0;
  for (const auto& f : cs.films) hi = std::max(hi, f.index.n_real);
  if (cs.channel) hi = std::max(hi, cs.core().index.n_real * (1.0 + cs.channel->contrast));
  return {hi, 0.0};
}

std::vector<Mode2D> solve_modes_2d(const CrossSection& cs, std::shared_ptr<const Grid2D> grid, Polarization pol,
                                   cplx n_guess, int count, const ModeSolveOptions& opt) {
  if (!grid) throw std::invalid_argument("solve_modes_2d: no grid");
  if (count < 1) throw std::invalid_argument("solve_modes_2d: count must be >= 1");
  cs.validate();
  grid->validate();
  if (std::abs(grid->wavelength_um - cs.wavelength_um) > 1e-12)
    throw std::invalid_argument("solve_modes_2d: grid and cross-section wavelengths differ");
  check_guess(cs, n_guess);
  check_metal_sampling(cs, *grid);

  const double k0 = 2.0 * std::numbers::pi / cs.wavelength_um;
  const auto eps = permittivity(cs, *grid);
  const auto A = assemble(*grid, eps, pol);

  detail::EigenPairs pairs;
  try {
    pairs = detail::shift_invert_arnoldi(A, (k0 * n_guess) * (k0 * n_guess), count, start_vector(cs, *grid),
                                         {opt.krylov_dim, opt.max_restarts, opt.tol});
  } catch (const detail::ArnoldiFailure& f) {
    throw ModeSolverError(f.reason + " (" + std::to_string(f.restarts) + " restarts, best residual " +
                              format_double(f.best_residual) + ", " + std::to_string(grid->size()) + " unknowns)",
                          f.restarts, f.best_residual);
  }

  std::vector<Mode2D> modes;
  for (std::size_t r = 0; r < pairs.values.size(); ++r) {
    Mode2D m;
    cplx n = std::sqrt(pairs.values[r]) / k0;
    if (n.real() < 0.0) n = -n;
    m.n_eff = n;
    m.polarization = pol;
    m.grid = grid;
    m.eigen_residual = pairs.residuals[r];
    m.weight.resize(grid->size());
    for (std::size_t p = 0; p < grid->size(); ++p) m.weight[p] = power_weight(pol, eps[p]);
    m.field.assign(pairs.vectors[r].data(), pairs.vectors[r].data() + pairs.vectors[r].size());

    std::size_t peak = 0;
    for (std::size_t p = 1; p < m.field.size(); ++p)
      if (std::abs(m.field[p]) > std::abs(m.field[peak])) peak = p;
    const cplx phase = std::abs(m.field[peak]) / m.field[peak];
    const double scale = 1.0 / std::sqrt(m.power());
    for (auto& f : m.field) f *= phase * scale;
    m.power_normalized = true;
    modes.push_back(std::move(m));
  }
  std::sort(modes.begin(), modes.end(),
            [&](const Mode2D& a, const Mode2D& b) { return std::abs(a.n_eff - n_guess) < std::abs(b.n_eff - n_guess); });
  return modes;
}

Mode2D fundamental_mode(const CrossSection& cs, std::shared_ptr<const Grid2D> grid, Polarization pol,
                        const ModeSolveOptions& opt) {
  const cplx guess = default_guess(cs);
  for (int count : {1, 6}) {
    auto modes = solve_modes_2d(cs, grid, pol, guess, count, opt);
    const Mode2D* best = nullptr;
    for (const auto& m : modes)
      if (core_fraction(cs, m) > 0.5 && (!best || m.n_eff.real() > best->n_eff.real())) best = &m;
    if (best) return *best;
  }
  throw ModeSolverError("no mode confined to the channel near n_eff = " + format_double(guess.real()));
}

cplx overlap(const Mode2D& a, const Mode2D& b) {
  if (!a.grid || !b.grid || !(a.grid == b.grid || a.grid->same_as(*b.grid)))
    throw std::invalid_argument("overlap: modes live on different grids");
  const auto& g = *a.grid;
  cplx num = 0.0;
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const auto p = g.index(i, j);
      const double dA = g.area(i, j);
      num += std::conj(a.field[p]) * b.field[p] * std::sqrt(a.weight[p] * b.weight[p]) * dA;
      na += std::norm(a.field[p]) * a.weight[p] * dA;
      nb += std::norm(b.field[p]) * b.weight[p] * dA;
    }
  return num / std::sqrt(na * nb);
}

cplx effective_index_method(const CrossSection& cs, Polarization pol, double strip_um) {
  cs.validate();
  if (!(strip_um > 0.0)) throw std::invalid_argument("effective_index_method: strip width must be > 0");
  const double half = 0.5 * cs.window_width_um;
  const auto n_strips = static_cast<std::size_t>(std::ceil(2.0 * half / strip_um));
  const double w = 2.0 * half / static_cast<double>(n_strips);

  std::vector<cplx> n_col(n_strips);
  std::size_t last_layers = 0;
  cplx last = 0.0;
  for (std::size_t i = 0; i < n_strips; ++i) {
    const double x = -half + (static_cast<double>(i) + 0.5) * w;
    const auto stack = vertical_stack(cs, x, pol);
    if (i == 0 || stack.layers.size() != last_layers) {
      const auto modes = find_slab_modes(stack, 1);
      if (modes.empty()) throw SlabSolverError("effective_index_method: no vertical mode at x = " + format_double(x), {});
      last = modes.front().n_eff;
    } else {
      last = refine_slab_mode(stack, last).n_eff;
    }
    last_layers = stack.layers.size();
    n_col[i] = last;
  }

  SlabStack lateral;
  lateral.wavelength_um = cs.wavelength_um;
  lateral.polarization = pol == Polarization::TE ? Polarization::TM : Polarization::TE;
  lateral.origin_um = -half;
  auto as_index = [](cplx n) { return ComplexIndex{n.real(), std::max(0.0, n.imag())}; };
  lateral.layers.push_back({as_index(n_col.front()), 0.0});
  for (const auto& n : n_col) lateral.layers.push_back({as_index(n), w});
  lateral.layers.push_back({as_index(n_col.back()), 0.0});

  double re_hi = 0.0, im_hi = 0.0;
  for (const auto& n : n_col) {
    re_hi = std::max(re_hi, n.real());
    im_hi = std::max(im_hi, n.imag());
  }
  const double re_lo = std::max(n_col.front().real(), n_col.back().real());
  if (!(re_hi > re_lo)) return n_col.front();  // laterally uniform
  const double span = re_hi - re_lo;
  const SearchBox box{re_lo + 1e-9 * re_lo, re_hi, -0.05 * span, im_hi + 0.05 * span};
  const auto modes = find_slab_modes(lateral, 1, box);
  if (modes.empty()) throw SlabSolverError("effective_index_method: no lateral mode", box);
  return modes.front().n_eff;
}

void write_field_csv(std::ostream& out, const Mode2D& m) {
  const auto& g = *m.grid;
  out << "x_um,y_um,re,im\n";
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const auto& f = m.field[g.index(i, j)];
      out << format_double(g.x[i]) << ',' << format_double(g.y[j]) << ',' << format_double(f.real()) << ','
          << format_double(f.imag()) << '\n';
    }
}

}  // namespace evtes
