#include "evtes/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "evtes/report.hpp"

namespace evtes {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string pol_name(Polarization p) { return lower(to_string(p)); }

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

std::string num(double v) { return format_double(v); }

// Error text safe for a single CSV field.
std::string status_field(const std::string& error) {
  if (error.empty()) return "ok";
  std::string s = "failed: " + error;
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '"') c = ';';
  return s;
}

std::string scattering_fields(const SegmentScattering& s) {
  return csv_line({num(s.n_eff_loaded.real()), num(s.n_eff_loaded.imag()), num(s.alpha_cm), num(s.overlap_power),
                   num(s.r_power), num(s.t_power), num(s.absorbed), num(s.naive_absorbed)});
}

const char* const kScatterHeader = "re_neff,im_neff,alpha_cm,overlap2,r_entry,t,absorbed,naive_absorbed";
const char* const kScatterBlank = ",,,,,,,";

std::string with_status(std::string fields, const std::string& status) {
  fields.pop_back();  // newline from csv_line
  return fields + "," + status + "\n";
}

void describe_failure(std::ostream& out, const std::exception& e) {
  out << "error: " << e.what();
  if (const auto* m = dynamic_cast<const ModeSolverError*>(&e))
    out << fmt::format(" (restarts {}, best residual {:.3g})", m->restarts(), m->residual());
  out << '\n';
}

}  // namespace

int cmd_modes(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out) {
  const auto bare = cfg.cross_section();
  const auto cs = cfg.detector.enabled ? with_detector(bare, cfg.detector.geometry, cfg.materials) : bare;
  auto grid = std::make_shared<const Grid2D>(make_grid(cs, cfg.grid));
  out << fmt::format("grid {} x {} cells\n", grid->nx(), grid->ny());

  std::string summary = "pol,re_neff,im_neff,alpha_cm\n";
  std::string segment = std::string("pol,") + kScatterHeader + ",r_exit,unbooked\n";
  for (auto pol : pols) {
    const auto m = fundamental_mode(cs, grid, pol, cfg.solver);
    summary += csv_line({pol_name(pol), num(m.n_eff.real()), num(m.n_eff.imag()), num(m.alpha_cm())});
    std::ostringstream field;
    write_field_csv(field, m);
    write_file(out_path(cfg, "field_" + pol_name(pol) + ".csv"), field.str());
    out << fmt::format("{}: n_eff = {:.8f} {:+.4e}i, alpha = {:.3f} /cm\n", to_string(pol), m.n_eff.real(),
                       m.n_eff.imag(), m.alpha_cm());
    if (cfg.detector.enabled) {
      const auto b = fundamental_mode(bare, grid, pol, cfg.solver);
      const auto s = scatter(ModalPair{pol, b.n_eff, m.n_eff, overlap(b, m)}, cfg.detector.geometry, cs.wavelength_um);
      auto line = scattering_fields(s);
      line.pop_back();
      segment += pol_name(pol) + "," + line + "," + num(s.r_exit) + "," + num(s.unbooked) + "\n";
      out << fmt::format("    overlap^2 = {:.4f}, entry reflection = {:.3e}, absorbed over {} um = {:.4f}\n",
                         s.overlap_power, s.r_power, format_double(cfg.detector.geometry.length_um), s.absorbed);
    }
  }
  write_file(out_path(cfg, "modes_summary.csv"), summary);
  if (cfg.detector.enabled) write_file(out_path(cfg, "segment.csv"), segment);
  return kExitOk;
}

int cmd_sweep_thickness(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out) {
  const auto thicknesses = cfg.detector.thickness_values();
  const auto cs = cfg.cross_section();
  const auto opt = cfg.absorption_options();
  std::string csv = std::string("thickness_nm,pol,") + kScatterHeader + ",status\n";
  std::vector<PlotSeries> series;
  int warnings = 0;
  for (auto pol : pols) {
    const auto rows = thickness_sweep(cs, cfg.detector.geometry.width_um, cfg.detector.geometry.length_um,
                                      thicknesses, pol, opt);
    PlotSeries ps{std::string(to_string(pol)), {}, {}};
    for (const auto& r : rows) {
      const std::string head = num(r.thickness_nm) + "," + pol_name(pol) + ",";
      if (r.result) {
        csv += head + with_status(scattering_fields(*r.result), "ok");
        ps.x.push_back(r.thickness_nm), ps.y.push_back(r.result->alpha_cm);
      } else {
        ++warnings;
        csv += head + kScatterBlank + "," + status_field(r.error) + "\n";
        out << fmt::format("warning: {} at {} nm: {}\n", to_string(pol), num(r.thickness_nm), r.error);
      }
    }
    series.push_back(std::move(ps));
  }
  write_file(out_path(cfg, "thickness_sweep.csv"), csv);
  write_file(out_path(cfg, "thickness_sweep.svg"),
             svg_plot({"Absorption coefficient vs detector thickness", "thickness (nm)", "alpha (1/cm)"}, series));
  for (const auto& s : series) {
    if (s.y.empty()) continue;
    const auto k = std::max_element(s.y.begin(), s.y.end()) - s.y.begin();
    out << fmt::format("{}: peak alpha {:.3f} /cm at {} nm\n", s.label, s.y[k], num(s.x[k]));
  }
  out << fmt::format("{} rows, {} warnings\n", thicknesses.size() * pols.size(), warnings);
  return kExitOk;
}

int cmd_sweep_aspect(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out) {
  const auto& lengths = cfg.detector.aspect_lengths_um;
  if (lengths.empty()) throw ConfigError("[detector] aspect_lengths_um is empty");
  const auto cs = cfg.cross_section();
  const auto opt = cfg.absorption_options();
  std::string csv = std::string("length_um,width_um,pol,") + kScatterHeader + ",extrapolated,status\n";
  std::vector<PlotSeries> series;
  int warnings = 0;
  for (auto pol : pols) {
    const auto rows = aspect_sweep(cs, cfg.detector.volume_um3, cfg.detector.geometry.thickness_nm, lengths, pol, opt);
    PlotSeries ps{std::string(to_string(pol)), {}, {}};
    for (const auto& r : rows) {
      const std::string head = num(r.length_um) + "," + num(r.width_um) + "," + pol_name(pol) + ",";
      const std::string extra = r.extrapolated ? "1" : "0";
      if (r.result) {
        auto f = scattering_fields(*r.result);
        f.pop_back();
        csv += head + f + "," + extra + ",ok\n";
        ps.x.push_back(r.length_um), ps.y.push_back(r.result->absorbed);
      } else {
        ++warnings;
        csv += head + kScatterBlank + "," + extra + "," + status_field(r.error) + "\n";
        out << fmt::format("warning: {} at {} um: {}\n", to_string(pol), num(r.length_um), r.error);
      }
    }
    series.push_back(std::move(ps));
  }
  write_file(out_path(cfg, "aspect_sweep.csv"), csv);
  write_file(out_path(cfg, "aspect_sweep.svg"),
             svg_plot({fmt::format("Absorbed fraction at constant volume ({} um^3)", num(cfg.detector.volume_um3)),
                       "length (um)", "absorbed fraction"},
                      series));
  for (const auto& s : series) {
    if (s.y.empty()) continue;
    const auto k = std::max_element(s.y.begin(), s.y.end()) - s.y.begin();
    out << fmt::format("{}: max absorbed {:.4f} at length {} um\n", s.label, s.y[k], num(s.x[k]));
  }
  out << fmt::format("{} warnings\n", warnings);
  return kExitOk;
}

int cmd_optimize(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out) {
  const auto cs = cfg.cross_section();
  const auto opt = cfg.absorption_options();
  const auto& d = cfg.detector;
  std::string summary = "pol,length_um,width_um,thickness_nm,absorbed,unimodal\n";
  for (auto pol : pols) {
    const auto r = optimize_geometry(cs, d.volume_um3, d.geometry.thickness_nm, d.optimize_lo_um, d.optimize_hi_um,
                                     pol, opt, d.optimize_grid_points, d.optimize_tol);
    std::string samples = "length_um,absorbed\n";
    for (const auto& [x, y] : r.samples) samples += csv_line({num(x), num(y)});
    write_file(out_path(cfg, "optimize_" + pol_name(pol) + ".csv"), samples);
    summary += csv_line({pol_name(pol), num(r.geometry.length_um), num(r.geometry.width_um),
                         num(r.geometry.thickness_nm), num(r.absorbed), r.unimodal ? "1" : "0"});
    for (const auto& w : r.warnings) out << "warning: " << w << '\n';
    out << fmt::format("{}: best length {:.3f} um (width {:.3f} um), absorbed {:.4f}\n", to_string(pol),
                       r.geometry.length_um, r.geometry.width_um, r.absorbed);
  }
  write_file(out_path(cfg, "optimize_summary.csv"), summary);
  return kExitOk;
}

namespace {

// Reads pol and absorbed columns from a segment.csv written by `modes`.
std::map<std::string, double> read_efficiencies(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read efficiency file " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> cols;
  auto split = [](const std::string& s) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    for (std::string f; std::getline(ss, f, ',');) v.push_back(f);
    return v;
  };
  cols = split(line);
  const auto pol_col = std::find(cols.begin(), cols.end(), "pol") - cols.begin();
  const auto abs_col = std::find(cols.begin(), cols.end(), "absorbed") - cols.begin();
  if (pol_col == long(cols.size()) || abs_col == long(cols.size()))
    throw ConfigError(path + ": expected pol and absorbed columns");
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (long(f.size()) <= std::max(pol_col, abs_col)) throw ConfigError(path + ": short row");
    out[f[pol_col]] = parse_double(f[abs_col], path);
  }
  return out;
}

void write_run_outputs(const RunConfig& cfg, const std::string& label, const RunResult& r, const PulseShape& shape,
                       std::string& summary, double efficiency) {
  const auto& h = r.histogram;
  std::string hist = "bin_low,bin_high,count,assigned_n\n";
  PlotSeries ps{label, {}, {}};
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double lo = h.bin_edge(i), hi = h.bin_edge(i + 1);
    hist += csv_line({num(lo), num(hi), std::to_string(h.counts[i]),
                      std::to_string(std::min(assign_photon_number(std::max(0.0, 0.5 * (lo + hi))), kOverflowClass))});
    ps.x.push_back(lo), ps.y.push_back(double(h.counts[i]));
  }
  write_file(out_path(cfg, "histogram_" + label + ".csv"), hist);
  write_file(out_path(cfg, "histogram_" + label + ".svg"),
             svg_plot({"Pulse height distribution (" + label + ")", "pulse height (photons)", "counts", true}, {ps}));

  std::string traces = "pulse_id,t_us,amplitude\n";
  for (std::size_t i = 0; i < r.records.size() && !r.records[i].trace.empty(); ++i)
    for (std::size_t k = 0; k < r.records[i].trace.size(); ++k)
      traces += csv_line({std::to_string(i), num(static_cast<double>(k) * shape.dt_us), num(r.records[i].trace[k])});
  write_file(out_path(cfg, "traces_" + label + ".csv"), traces);

  std::string classes = "assigned_n,count\n";
  for (int k = 0; k <= kOverflowClass; ++k)
    classes += csv_line({k == kOverflowClass ? ">=6" : std::to_string(k), std::to_string(h.class_counts[k])});
  write_file(out_path(cfg, "photon_counts_" + label + ".csv"), classes);

  const auto& e = r.estimate;
  summary += csv_line({label, num(efficiency), std::to_string(h.total()), num(e.mean), num(e.uncertainty),
                       e.upper_bound ? num(*e.upper_bound) : "", num(r.misassigned_fraction), num(r.tail_statistic),
                       r.tail_detected ? "1" : "0", num(r.half_energy_statistic), r.half_energy_detected ? "1" : "0",
                       std::to_string(r.saturated)});
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out) {
  const auto& sim = cfg.simulation;
  RunOptions ro;
  ro.keep_traces = sim.trace_count;
  ro.threads = cfg.threads;
  std::string summary =
      "label,efficiency,pulse_count,mean,uncertainty,upper_bound,misassigned_fraction,tail_statistic,tail_detected,"
      "half_energy_statistic,half_energy_detected,saturated\n";

  auto report = [&](const std::string& label, const RunResult& r) {
    const auto& e = r.estimate;
    out << fmt::format("{}: <n> = {:.5f} +/- {:.5f}", label, e.mean, e.uncertainty);
    if (e.upper_bound) out << fmt::format(" (95 % upper bound {:.4g})", *e.upper_bound);
    if (e.low_statistics) out << " [fewer than 100 pulses]";
    out << '\n';
    if (r.tail_detected) out << fmt::format("    exponential tail detected (statistic {:.4g})\n", r.tail_statistic);
    if (r.half_energy_detected)
      out << fmt::format("    half-energy sub-population detected (statistic {:.4g})\n", r.half_energy_statistic);
    if (r.saturated) out << fmt::format("    {} saturated traces\n", r.saturated);
  };

  if (sim.reference) {
    SourceConfig src = sim.source;
    src.mean_photons = sim.reference_mean_photons;
    const auto r = simulate_reference_detector(src, sim.response, sim.shape, ro);
    write_run_outputs(cfg, "reference", r, sim.shape, summary, sim.response.scatter_efficiency);
    report("reference", r);
  } else {
    std::map<std::string, double> eff;
    if (!sim.efficiency_csv.empty()) eff = read_efficiencies(cfg.resolve(sim.efficiency_csv));
    for (auto pol : pols) {
      double e = sim.response.efficiency(pol);
      if (!eff.empty()) {
        const auto it = eff.find(pol_name(pol));
        if (it == eff.end()) throw ConfigError("efficiency file has no row for " + pol_name(pol));
        e = it->second;
      }
      const auto r = simulate_run(sim.source, sim.response, sim.shape, e, ro);
      write_run_outputs(cfg, pol_name(pol), r, sim.shape, summary, e);
      report(std::string(to_string(pol)), r);
    }
  }
  write_file(out_path(cfg, "simulate_summary.csv"), summary);
  return kExitOk;
}

int cmd_calibrate(const RunConfig& cfg, const std::string& measurement_file, std::ostream& out) {
  const auto path = measurement_file.empty() ? cfg.resolve(cfg.calibration.measurement_file) : measurement_file;
  const auto m = path.empty() ? CalibrationMeasurement{} : CalibrationMeasurement::from_ini(IniDocument::load(path));
  UncertaintyOptions uo;
  uo.samples = cfg.calibration.samples;
  uo.seed = cfg.seed;
  uo.systematic_r_int = cfg.calibration.r_int_values;

  out << fmt::format("corrected input power {:.6g} W, mean transmission {:.4f}\n",
                     corrected_input_power(m.P_pm_W, m.eta_switch.value, m.r_fiber), m.transmission());
  if (!throughput_check(m.T_AB.value, m.T_BA.value, std::hypot(m.T_AB.sigma(), m.T_BA.sigma())))
    out << "warning: T_AB and T_BA differ by more than their combined uncertainty\n";

  std::vector<CalibrationResult> rows;
  std::string csv = "r_int,quantity,value,u_stat,u_syst\n";
  for (double r : cfg.calibration.r_int_values) {
    auto mr = m;
    mr.r_int = r;
    rows.push_back(propagate_uncertainty(mr, uo));
    std::istringstream body(calibration_csv(rows.back()));
    std::string line;
    std::getline(body, line);  // header
    while (std::getline(body, line)) csv += num(r) + "," + line + "\n";
  }
  const auto table = format_efficiency_table(rows);
  out << table;
  for (const auto& r : rows)
    out << fmt::format("r_int = {:g} %: eta_TES systematic spread {:.2f} abs-pt\n", 100.0 * r.r_int, 100.0 * r.eta_tes.u_syst);
  write_file(out_path(cfg, "calibration.csv"), csv);
  write_file(out_path(cfg, "efficiency_table.txt"), table);
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evanescently coupled TES waveguide detector: mode solving, sweeps, photon statistics, calibration"};
  app.require_subcommand(1);
  std::string config_path, out_dir, pol_text = "both", measurement;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "INI run configuration");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--pol", pol_text, "polarization")->check(CLI::IsMember({"te", "tm", "both"}, CLI::ignore_case));
  auto* modes = app.add_subcommand("modes", "fundamental TE/TM modes and field maps");
  auto* thick = app.add_subcommand("sweep-thickness", "absorption vs detector thickness");
  auto* aspect = app.add_subcommand("sweep-aspect", "absorbed fraction vs length at constant volume");
  auto* optim = app.add_subcommand("optimize", "golden-section search over detector length");
  auto* simulate = app.add_subcommand("simulate", "photon statistics and pulse-height histograms");
  auto* calibrate = app.add_subcommand("calibrate", "efficiency extraction with uncertainties");
  calibrate->add_option("measurement", measurement, "measurement INI file");
  for (auto* sc : {modes, thick, aspect, optim, simulate, calibrate}) sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  RunConfig cfg;
  try {
    cfg = config_path.empty() ? RunConfig::from_ini(IniDocument{}) : RunConfig::load(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.seed = cfg.simulation.source.seed = *seed;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::vector<Polarization> pols;
  const auto p = lower(pol_text);
  if (p == "te" || p == "both") pols.push_back(Polarization::TE);
  if (p == "tm" || p == "both") pols.push_back(Polarization::TM);
  if (simulate->parsed() && p == "both") pols = {Polarization::TM, Polarization::TE};

  try {
    if (modes->parsed()) return cmd_modes(cfg, pols, out);
    if (thick->parsed()) return cmd_sweep_thickness(cfg, pols, out);
    if (aspect->parsed()) return cmd_sweep_aspect(cfg, pols, out);
    if (optim->parsed()) return cmd_optimize(cfg, pols, out);
    if (simulate->parsed()) return cmd_simulate(cfg, pols, out);
    return cmd_calibrate(cfg, measurement, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InconsistentMeasurementError& e) {
    err << "inconsistent measurement: " << e.what() << '\n';
    return kExitInconsistent;
  } catch (const std::exception& e) {
    describe_failure(err, e);
    return kExitCompute;
  }
}

}  // namespace evtes
