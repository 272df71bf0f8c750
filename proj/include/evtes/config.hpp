#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evtes/absorption.hpp"
#include "evtes/calibration.hpp"
#include "evtes/photon_chain.hpp"

namespace evtes {

/// Layer stack of the waveguide; materials are looked up by name.
struct WaveguideConfig {
  std::string substrate = "silicon";
  std::string cladding = "silica";
  double cladding_um = 17.0;
  std::string core = "silica_core";
  double core_um = 5.5;
  std::string cover = "air";
  double channel_contrast = 0.003;
  double channel_fwhm_um = 6.0;
  double window_um = 50.0;
  std::string buffer_material;  // optional stress-relief film on top of the core
  double buffer_nm = 0.0;
};

struct DetectorConfig {
  bool enabled = true;
  DetectorGeometry geometry;
  double volume_um3 = 25.0;
  std::vector<double> thickness_sweep_nm{10, 100, 5};  // start, stop, step
  std::vector<double> aspect_lengths_um{15, 25, 50, 100, 150, 200, 300, 400};
  double optimize_lo_um = 15.0;
  double optimize_hi_um = 400.0;
  int optimize_grid_points = 9;
  double optimize_tol = 1e-3;

  std::vector<double> thickness_values() const;
};

struct SimulationConfig {
  SourceConfig source;
  DetectorResponse response;
  PulseShape shape;
  bool reference = false;  // off-waveguide detector preset
  double reference_mean_photons = 1.03 / 5.6e-5;
  std::string efficiency_csv;  // optional modes summary supplying per-polarization efficiencies
  std::size_t trace_count = 20;
};

struct CalibrationConfig {
  std::string measurement_file;  // empty: built-in measurement record
  std::vector<double> r_int_values{0.0003, 0.01};
  std::size_t samples = 100000;
};

/// Sections [run], [waveguide], [detector], [materials], [grid],
/// [simulation], [calibration]. Unknown sections and keys are errors.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string cache_dir;
  unsigned threads = 1;
  std::string base_dir = ".";  // relative paths in the file resolve against this

  WaveguideConfig waveguide;
  DetectorConfig detector;
  MaterialLibrary materials = MaterialLibrary::builtin();
  GridConfig grid;
  ModeSolveOptions solver;
  SimulationConfig simulation;
  CalibrationConfig calibration;

  static RunConfig from_ini(const IniDocument& doc, const std::string& base_dir = ".");
  static RunConfig load(const std::string& path);

  /// Cross-section without the detector overlay.
  CrossSection cross_section() const;
  AbsorptionOptions absorption_options() const;
  std::string resolve(const std::string& path) const;
  void validate() const;
};

}  // namespace evtes
