#include "evtes/absorption.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "parallel.hpp"

namespace evtes {

using detail::parallel_for;

namespace {

constexpr double kTruncationFlag = 1e-3;
constexpr double kExtrapolationWidth_um = 2.0;
constexpr char kCacheVersion[] = "evtes-modal-v1";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string edge_text(const EdgeCondition& e) {
  return std::to_string(static_cast<int>(e.kind)) + ":" + format_double(e.pml_um) + ":" + format_double(e.strength) +
         ":" + format_double(e.stretch);
}

std::optional<ModalPair> cache_load(const std::filesystem::path& file, Polarization pol) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    const auto doc = IniDocument::parse(ss.str(), file.string());
    const auto* s = doc.find("modal_pair");
    if (!s) return std::nullopt;
    ModalPair p;
    p.polarization = pol;
    p.n_bare = {s->get_double("n_bare_re"), s->get_double("n_bare_im")};
    p.n_loaded = {s->get_double("n_loaded_re"), s->get_double("n_loaded_im")};
    p.overlap = {s->get_double("overlap_re"), s->get_double("overlap_im")};
    return p;
  } catch (const ConfigError&) {
    return std::nullopt;  // torn or foreign file: recompute
  }
}

void cache_store(const std::filesystem::path& file, const ModalPair& p, const std::string& key) {
  IniDocument doc;
  auto& s = doc.ensure("modal_pair");
  s.set("n_bare_re", format_double(p.n_bare.real()));
  s.set("n_bare_im", format_double(p.n_bare.imag()));
  s.set("n_loaded_re", format_double(p.n_loaded.real()));
  s.set("n_loaded_im", format_double(p.n_loaded.imag()));
  s.set("overlap_re", format_double(p.overlap.real()));
  s.set("overlap_im", format_double(p.overlap.imag()));
  std::filesystem::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp" + std::to_string(fnv1a(key + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()))));
  {
    std::ofstream out(tmp);
    out << "# " << key.substr(0, key.find('\n')) << '\n' << doc.to_string();
    if (!out) return;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}


double reflection(cplx n_in, cplx n_out, double c2) {
  return std::norm((n_in * c2 - n_out) / (n_in * c2 + n_out));
}

}  // namespace

std::string modal_cache_key(const CrossSection& loaded, Polarization pol, const GridConfig& g,
                            const ModeSolveOptions& solver) {
  std::ostringstream k;
  k << kCacheVersion << " pol=" << to_string(pol) << '\n' << loaded.to_ini().to_string() << "[grid]\n";
  for (double v : {g.dx_um, g.dx_outer_um, g.inner_half_width_um, g.dy_um, g.dy_far_um, g.near_core_margin_um,
                   g.dy_metal_um, g.metal_margin_um, g.dy_surface_um, g.surface_below_um, g.surface_above_um,
                   g.substrate_depth_um, g.cover_height_um})
    k << format_double(v) << ' ';
  k << (g.y_min_um ? format_double(*g.y_min_um) : "-") << ' ' << (g.y_max_um ? format_double(*g.y_max_um) : "-") << ' '
    << (g.half_width_um ? format_double(*g.half_width_um) : "-") << '\n';
  for (const auto& e : g.edges) k << edge_text(e) << ' ';
  k << "\n[solver] " << solver.krylov_dim << ' ' << solver.max_restarts << ' ' << format_double(solver.tol) << '\n';
  return k.str();
}

ModalPair solve_modal_pair(const CrossSection& cs, const DetectorGeometry& g, Polarization pol,
                           const AbsorptionOptions& opt) {
  const auto loaded = with_detector(cs.bare(), g, opt.materials);
  const auto key = modal_cache_key(loaded, pol, opt.grid, opt.solver);
  std::filesystem::path file;
  if (!opt.cache_dir.empty()) {
    char name[32];
    std::snprintf(name, sizeof(name), "%016llx.ini", static_cast<unsigned long long>(fnv1a(key)));
    file = std::filesystem::path(opt.cache_dir) / name;
    if (auto hit = cache_load(file, pol)) return *hit;
  }

  auto grid = std::make_shared<const Grid2D>(make_grid(loaded, opt.grid));
  const auto m_loaded = fundamental_mode(loaded, grid, pol, opt.solver);
  const auto m_bare = fundamental_mode(loaded.bare(), grid, pol, opt.solver);
  ModalPair p{pol, m_bare.n_eff, m_loaded.n_eff, overlap(m_bare, m_loaded)};
  if (!file.empty()) cache_store(file, p, key);
  return p;
}

SegmentScattering scatter(const ModalPair& modes, const DetectorGeometry& g, double wavelength_um, bool reversed) {
  g.validate();
  SegmentScattering s;
  s.polarization = modes.polarization;
  s.geometry = g;
  s.n_eff_bare = modes.n_bare;
  s.n_eff_loaded = modes.n_loaded;
  const double c2 = std::min(1.0, std::norm(modes.overlap));
  s.overlap_power = c2;
  s.alpha_cm = alpha_from_neff(modes.n_loaded.imag(), wavelength_um);
  const double r_entry = reflection(modes.n_bare, modes.n_loaded, c2);
  const double r_leave = reflection(modes.n_loaded, modes.n_bare, c2);
  s.r_power = reversed ? r_leave : r_entry;
  s.r_exit = reversed ? r_entry : r_leave;
  const double decay = std::exp(-s.alpha_cm * g.length_um * 1e-4);
  s.t_power = (1.0 - r_entry) * c2 * decay * (1.0 - r_leave) * c2;
  s.absorbed = 1.0 - s.r_power - s.t_power;
  s.naive_absorbed = 1.0 - decay;
  s.unbooked = (1.0 - s.r_power) * (1.0 - c2);
  s.truncated = s.unbooked > kTruncationFlag;
  return s;
}

SegmentScattering segment_scattering(const CrossSection& cs, const DetectorGeometry& g, Polarization pol,
                                     const AbsorptionOptions& opt) {
  return scatter(solve_modal_pair(cs, g, pol, opt), g, cs.wavelength_um);
}

std::vector<ThicknessRow> thickness_sweep(const CrossSection& cs, double width_um, double length_um,
                                          const std::vector<double>& thickness_nm, Polarization pol,
                                          const AbsorptionOptions& opt) {
  if (thickness_nm.empty()) throw std::invalid_argument("thickness_sweep: empty thickness list");
  for (std::size_t i = 0; i < thickness_nm.size(); ++i) {
    if (!(thickness_nm[i] > 0.0)) throw std::invalid_argument("thickness_sweep: thicknesses must be > 0");
    if (i > 0 && !(thickness_nm[i] > thickness_nm[i - 1]))
      throw std::invalid_argument("thickness_sweep: thicknesses must be strictly increasing");
  }
  std::vector<ThicknessRow> rows(thickness_nm.size());
  parallel_for(rows.size(), opt.threads, [&](std::size_t i) {
    auto& row = rows[i];
    row.thickness_nm = thickness_nm[i];
    row.polarization = pol;
    const DetectorGeometry g{length_um, width_um, thickness_nm[i], opt.detector_material};
    try {
      row.result = segment_scattering(cs, g, pol, opt);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

std::vector<AspectRow> aspect_sweep(const CrossSection& cs, double volume_um3, double thickness_nm,
                                    const std::vector<double>& length_um, Polarization pol,
                                    const AbsorptionOptions& opt) {
  if (length_um.empty()) throw std::invalid_argument("aspect_sweep: empty length list");
  std::vector<AspectRow> rows(length_um.size());
  parallel_for(rows.size(), opt.threads, [&](std::size_t i) {
    auto& row = rows[i];
    row.polarization = pol;
    row.length_um = length_um[i];
    try {
      const auto g = DetectorGeometry::at_fixed_volume(volume_um3, thickness_nm, length_um[i], opt.detector_material);
      row.width_um = g.width_um;
      row.extrapolated = g.width_um < kExtrapolationWidth_um;
      row.result = segment_scattering(cs, g, pol, opt);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

OptimizeResult optimize_length(const std::function<double(double)>& absorbed_at, double lo, double hi,
                               int grid_points, double tol) {
  if (!(lo > 0.0) || hi < lo) throw std::invalid_argument("optimize: invalid length bracket");
  OptimizeResult out;
  out.geometry.length_um = lo;
  if (hi - lo <= 1e-12 * hi) {
    out.absorbed = absorbed_at(lo);
    out.samples.emplace_back(lo, out.absorbed);
    return out;
  }
  grid_points = std::max(grid_points, 3);
  for (int i = 0; i < grid_points; ++i) {
    const double L = lo + (hi - lo) * i / (grid_points - 1);
    out.samples.emplace_back(L, absorbed_at(L));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.samples.size(); ++i)
    if (out.samples[i].second > out.samples[best].second) best = i;
  // Unimodal: non-decreasing up to the argmax, non-increasing after.
  for (std::size_t i = 1; i < out.samples.size(); ++i) {
    const double step = out.samples[i].second - out.samples[i - 1].second;
    if ((i <= best && step < -1e-12) || (i > best && step > 1e-12)) out.unimodal = false;
  }
  if (!out.unimodal) {
    out.warnings.push_back("absorbed fraction is not unimodal over the bracket; using the sampled maximum");
    out.geometry.length_um = out.samples[best].first;
    out.absorbed = out.samples[best].second;
    return out;
  }

  double a = out.samples[best == 0 ? 0 : best - 1].first;
  double b = out.samples[std::min(best + 1, out.samples.size() - 1)].first;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = absorbed_at(c), fd = absorbed_at(d);
  out.samples.emplace_back(c, fc);
  out.samples.emplace_back(d, fd);
  const double width0 = hi - lo;
  while (b - a > tol * width0) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = absorbed_at(c);
      out.samples.emplace_back(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = absorbed_at(d);
      out.samples.emplace_back(d, fd);
    }
  }
  for (const auto& [L, f] : out.samples)
    if (f > out.absorbed || out.absorbed == 0.0) {
      out.absorbed = f;
      out.geometry.length_um = L;
    }
  return out;
}

OptimizeResult optimize_geometry(const CrossSection& cs, double volume_um3, double thickness_nm, double length_lo,
                                 double length_hi, Polarization pol, const AbsorptionOptions& opt, int grid_points,
                                 double tol) {
  auto f = [&](double L) {
    const auto g = DetectorGeometry::at_fixed_volume(volume_um3, thickness_nm, L, opt.detector_material);
    return segment_scattering(cs, g, pol, opt).absorbed;
  };
  auto out = optimize_length(f, length_lo, length_hi, grid_points, tol);
  out.geometry = DetectorGeometry::at_fixed_volume(volume_um3, thickness_nm, out.geometry.length_um, opt.detector_material);
  return out;
}

}  // namespace evtes
