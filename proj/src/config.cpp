#include "evtes/config.hpp"

#include <cmath>
#include <filesystem>
#include <set>

namespace evtes {

namespace {

EdgeKind parse_edge(const std::string& s) {
  if (s == "pml") return EdgeKind::PML;
  if (s == "dirichlet") return EdgeKind::Dirichlet;
  if (s == "neumann") return EdgeKind::Neumann;
  throw ConfigError("[grid] boundary: expected pml, dirichlet or neumann, got '" + s + "'");
}

std::vector<double> list_or(const IniSection& s, const std::string& key, const std::vector<double>& fallback) {
  return s.has(key) ? s.get_double_list(key) : fallback;
}

void read_run(const IniSection& s, RunConfig& c) {
  c.seed = static_cast<std::uint64_t>(s.get_int("seed", static_cast<long long>(c.seed)));
  c.output_dir = s.get_string("output_dir", c.output_dir);
  c.cache_dir = s.get_string("cache_dir", c.cache_dir);
  const auto threads = s.get_int("threads", c.threads);
  if (threads < 0) throw ConfigError("[run] threads must be >= 0");
  c.threads = static_cast<unsigned>(threads);
}

void read_waveguide(const IniSection& s, WaveguideConfig& w) {
  w.substrate = s.get_string("substrate", w.substrate);
  w.cladding = s.get_string("cladding", w.cladding);
  w.cladding_um = s.get_double("cladding_um", w.cladding_um);
  w.core = s.get_string("core", w.core);
  w.core_um = s.get_double("core_um", w.core_um);
  w.cover = s.get_string("cover", w.cover);
  w.channel_contrast = s.get_double("channel_contrast", w.channel_contrast);
  w.channel_fwhm_um = s.get_double("channel_fwhm_um", w.channel_fwhm_um);
  w.window_um = s.get_double("window_um", w.window_um);
  w.buffer_material = s.get_string("buffer_material", w.buffer_material);
  w.buffer_nm = s.get_double("buffer_nm", w.buffer_nm);
}

void read_detector(const IniSection& s, DetectorConfig& d) {
  d.enabled = s.get_bool("enabled", d.enabled);
  d.geometry.material = s.get_string("material", d.geometry.material);
  d.geometry.thickness_nm = s.get_double("thickness_nm", d.geometry.thickness_nm);
  d.geometry.width_um = s.get_double("width_um", d.geometry.width_um);
  d.geometry.length_um = s.get_double("length_um", d.geometry.length_um);
  d.volume_um3 = s.get_double("volume_um3", d.volume_um3);
  d.thickness_sweep_nm = list_or(s, "thickness_sweep_nm", d.thickness_sweep_nm);
  d.aspect_lengths_um = list_or(s, "aspect_lengths_um", d.aspect_lengths_um);
  const auto range = list_or(s, "optimize_length_um", {d.optimize_lo_um, d.optimize_hi_um});
  if (range.size() != 2) throw ConfigError("[detector] optimize_length_um: expected 'low, high'");
  d.optimize_lo_um = range[0], d.optimize_hi_um = range[1];
  d.optimize_grid_points = static_cast<int>(s.get_int("optimize_grid_points", d.optimize_grid_points));
  d.optimize_tol = s.get_double("optimize_tol", d.optimize_tol);
}

void read_materials(const IniSection& s, MaterialLibrary& lib, double wavelength_um) {
  for (const auto& [name, value] : s.entries()) {
    const auto nk = s.get_double_list(name);
    if (nk.size() != 2) throw ConfigError("[materials] " + name + ": expected 'n, k'");
    try {
      lib.add(Material{name, ComplexIndex{nk[0], nk[1]}, wavelength_um});
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[materials] ") + e.what());
    }
  }
}

void read_grid(const IniSection& s, GridConfig& g, ModeSolveOptions& so) {
  g.dx_um = s.get_double("dx_um", g.dx_um);
  g.dx_outer_um = s.get_double("dx_outer_um", g.dx_outer_um);
  g.inner_half_width_um = s.get_double("inner_half_width_um", g.inner_half_width_um);
  g.dy_um = s.get_double("dy_um", g.dy_um);
  g.dy_far_um = s.get_double("dy_far_um", g.dy_far_um);
  g.near_core_margin_um = s.get_double("near_core_margin_um", g.near_core_margin_um);
  g.dy_metal_um = s.get_double("dy_metal_um", g.dy_metal_um);
  g.metal_margin_um = s.get_double("metal_margin_um", g.metal_margin_um);
  g.dy_surface_um = s.get_double("dy_surface_um", g.dy_surface_um);
  g.substrate_depth_um = s.get_double("substrate_depth_um", g.substrate_depth_um);
  g.cover_height_um = s.get_double("cover_height_um", g.cover_height_um);
  EdgeCondition e = g.edges[0];
  e.kind = parse_edge(s.get_string("boundary", "pml"));
  e.pml_um = s.get_double("pml_um", e.pml_um);
  e.strength = s.get_double("pml_strength", e.strength);
  e.stretch = s.get_double("pml_stretch", e.stretch);
  g.edges.fill(e);
  so.krylov_dim = static_cast<int>(s.get_int("krylov_dim", so.krylov_dim));
  so.max_restarts = static_cast<int>(s.get_int("max_restarts", so.max_restarts));
  so.tol = s.get_double("tol", so.tol);
}

void read_simulation(const IniSection& s, SimulationConfig& c) {
  auto& src = c.source;
  src.mean_photons = s.get_double("mean_photons", src.mean_photons);
  src.repetition_hz = s.get_double("repetition_hz", src.repetition_hz);
  const auto n = s.get_int("pulse_count", static_cast<long long>(src.pulse_count));
  if (n < 1) throw ConfigError("[simulation] pulse_count must be >= 1");
  src.pulse_count = static_cast<std::uint64_t>(n);
  auto& r = c.response;
  r.efficiency_tm = s.get_double("efficiency_tm", r.efficiency_tm);
  r.efficiency_te = s.get_double("efficiency_te", r.efficiency_te);
  r.noise_sigma = s.get_double("noise_sigma", r.noise_sigma);
  r.substrate_event_rate = s.get_double("substrate_event_rate", r.substrate_event_rate);
  r.substrate_collection = s.get_double("substrate_collection", r.substrate_collection);
  r.half_energy_event_rate = s.get_double("half_energy_event_rate", r.half_energy_event_rate);
  r.scatter_efficiency = s.get_double("scatter_efficiency", r.scatter_efficiency);
  r.reference_substrate_rate = s.get_double("reference_substrate_rate", r.reference_substrate_rate);
  auto& p = c.shape;
  p.tau_rise_us = s.get_double("tau_rise_us", p.tau_rise_us);
  p.tau_decay_us = s.get_double("tau_decay_us", p.tau_decay_us);
  p.dt_us = s.get_double("dt_us", p.dt_us);
  p.window_us = s.get_double("window_us", p.window_us);
  p.onset_us = s.get_double("onset_us", p.onset_us);
  p.saturation = s.get_double("saturation", p.saturation);
  c.reference = s.get_bool("reference", c.reference);
  c.reference_mean_photons = s.get_double("reference_mean_photons", c.reference_mean_photons);
  c.efficiency_csv = s.get_string("efficiency_csv", c.efficiency_csv);
  const auto traces = s.get_int("trace_count", static_cast<long long>(c.trace_count));
  if (traces < 0) throw ConfigError("[simulation] trace_count must be >= 0");
  c.trace_count = static_cast<std::size_t>(traces);
}

void read_calibration(const IniSection& s, CalibrationConfig& c) {
  c.measurement_file = s.get_string("measurement_file", c.measurement_file);
  c.r_int_values = list_or(s, "r_int_values", c.r_int_values);
  const auto n = s.get_int("samples", static_cast<long long>(c.samples));
  if (n < 1) throw ConfigError("[calibration] samples must be positive");
  c.samples = static_cast<std::size_t>(n);
}

}  // namespace

std::vector<double> DetectorConfig::thickness_values() const {
  if (thickness_sweep_nm.size() != 3) throw ConfigError("[detector] thickness_sweep_nm: expected 'start, stop, step'");
  const double a = thickness_sweep_nm[0], b = thickness_sweep_nm[1], h = thickness_sweep_nm[2];
  if (!(h > 0.0) || !(b >= a) || !(a > 0.0)) throw ConfigError("[detector] thickness_sweep_nm: empty or invalid range");
  std::vector<double> out;
  const auto n = static_cast<long long>(std::floor((b - a) / h + 1e-9));
  for (long long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * h);
  return out;
}

RunConfig RunConfig::from_ini(const IniDocument& doc, const std::string& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  static const std::set<std::string> known{"run", "waveguide", "detector", "materials", "grid", "simulation",
                                           "calibration"};
  for (const auto& s : doc.sections())
    if (!known.count(s.name())) throw ConfigError("unknown section [" + s.name() + "]");

  const double wl = c.materials.get(c.waveguide.core).wavelength_um;
  if (const auto* s = doc.find("materials")) read_materials(*s, c.materials, wl);
  if (const auto* s = doc.find("run")) read_run(*s, c);
  if (const auto* s = doc.find("waveguide")) read_waveguide(*s, c.waveguide);
  if (const auto* s = doc.find("detector")) read_detector(*s, c.detector);
  if (const auto* s = doc.find("grid")) read_grid(*s, c.grid, c.solver);
  if (const auto* s = doc.find("simulation")) read_simulation(*s, c.simulation);
  if (const auto* s = doc.find("calibration")) read_calibration(*s, c.calibration);
  c.simulation.source.seed = c.seed;
  for (const auto& s : doc.sections()) s.reject_unknown();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  return from_ini(IniDocument::load(path), parent.empty() ? "." : parent.string());
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

CrossSection RunConfig::cross_section() const {
  const auto& w = waveguide;
  const double wl = materials.get(w.core).wavelength_um;
  auto layer = [&](const std::string& name, double t) { return Layer{name, materials.index(name, wl), t}; };
  CrossSection cs;
  cs.wavelength_um = wl;
  cs.substrate = layer(w.substrate, 0.0);
  cs.films.push_back(layer(w.cladding, w.cladding_um));
  cs.films.push_back(layer(w.core, w.core_um));
  cs.cover = layer(w.cover, 0.0);
  if (w.channel_contrast != 0.0) cs.channel = ChannelProfile{w.channel_contrast, w.channel_fwhm_um, 1};
  cs.window_width_um = w.window_um;
  cs.validate();
  if (!w.buffer_material.empty()) cs = with_buffer_layer(cs, w.buffer_material, w.buffer_nm, materials);
  return cs;
}

AbsorptionOptions RunConfig::absorption_options() const {
  AbsorptionOptions o;
  o.grid = grid;
  o.solver = solver;
  o.materials = materials;
  o.detector_material = detector.geometry.material;
  o.cache_dir = resolve(cache_dir);
  o.threads = threads;
  return o;
}

void RunConfig::validate() const {
  auto wrap = [](auto&& f) {
    try {
      f();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    } catch (const std::out_of_range& e) {
      throw ConfigError(e.what());
    }
  };
  for (const auto* name : {&waveguide.substrate, &waveguide.cladding, &waveguide.core, &waveguide.cover,
                           &detector.geometry.material})
    if (!materials.contains(*name)) throw ConfigError("unknown material '" + *name + "'");
  if (!waveguide.buffer_material.empty() && !materials.contains(waveguide.buffer_material))
    throw ConfigError("unknown material '" + waveguide.buffer_material + "'");
  wrap([&] { cross_section(); });
  wrap([&] { detector.geometry.validate(); });
  wrap([&] { grid.validate(); });
  wrap([&] { simulation.source.validate(); });
  wrap([&] { simulation.response.validate(); });
  wrap([&] { simulation.shape.validate(); });
  if (!(detector.volume_um3 > 0.0)) throw ConfigError("[detector] volume_um3 must be positive");
  if (!(simulation.reference_mean_photons >= 0.0)) throw ConfigError("[simulation] reference_mean_photons must be >= 0");
  for (double r : calibration.r_int_values)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("[calibration] r_int_values must lie in [0, 1)");
  if (calibration.samples < 10000) throw ConfigError("[calibration] samples must be at least 10000");
  if (calibration.r_int_values.empty()) throw ConfigError("[calibration] r_int_values is empty");
}

}  // namespace evtes
