#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "evtes/detector_geometry.hpp"
#include "evtes/modes2d.hpp"

namespace evtes {

/// Fundamental modes on both sides of the entry interface, solved on one grid.
struct ModalPair {
  Polarization polarization = Polarization::TE;
  cplx n_bare;
  cplx n_loaded;
  cplx overlap;  // <bare|loaded>, power normalized
};

struct SegmentScattering {
  Polarization polarization = Polarization::TE;
  DetectorGeometry geometry;
  double overlap_power = 1.0;  // |c|^2
  double r_power = 0.0;        // entry-interface reflection
  double r_exit = 0.0;
  double t_power = 1.0;        // transmitted into the output fundamental
  double absorbed = 0.0;       // 1 - r_power - t_power: metal, leakage, mismatch, exit reflection
  double naive_absorbed = 0.0; // 1 - exp(-alpha L)
  double alpha_cm = 0.0;
  double unbooked = 0.0;       // power not carried by the single-mode basis at entry
  bool truncated = false;      // unbooked > 1e-3
  cplx n_eff_bare, n_eff_loaded;
};

struct AbsorptionOptions {
  GridConfig grid;
  ModeSolveOptions solver;
  MaterialLibrary materials = MaterialLibrary::builtin();
  std::string detector_material = "tungsten";
  /// Directory for the on-disk modal cache; empty disables caching.
  std::string cache_dir;
  /// Worker threads for sweeps (0 = hardware concurrency).
  unsigned threads = 1;
};

/// Solves (or loads from the cache) the bare and loaded fundamentals for a
/// detector of width `g.width_um` and thickness `g.thickness_nm`.
ModalPair solve_modal_pair(const CrossSection& cs, const DetectorGeometry& g, Polarization pol,
                           const AbsorptionOptions& opt = {});

/// Single-pass eigenmode-expansion bookkeeping for a segment of length L.
/// `reversed` traverses the segment from the exit side.
SegmentScattering scatter(const ModalPair& modes, const DetectorGeometry& g, double wavelength_um,
                          bool reversed = false);

SegmentScattering segment_scattering(const CrossSection& cs, const DetectorGeometry& g, Polarization pol,
                                     const AbsorptionOptions& opt = {});

struct ThicknessRow {
  double thickness_nm = 0.0;
  Polarization polarization = Polarization::TE;
  std::optional<SegmentScattering> result;
  std::string error;  // set when the solve failed
};

/// Thicknesses must be strictly increasing and positive. Failed points are
/// marked and the sweep continues.
std::vector<ThicknessRow> thickness_sweep(const CrossSection& cs, double width_um, double length_um,
                                          const std::vector<double>& thickness_nm, Polarization pol,
                                          const AbsorptionOptions& opt = {});

struct AspectRow {
  double length_um = 0.0;
  double width_um = 0.0;
  Polarization polarization = Polarization::TE;
  bool extrapolated = false;  // width below 2 um, narrower than the mode
  std::optional<SegmentScattering> result;
  std::string error;
};

/// Constant-volume sweep: width = volume / (length * thickness).
std::vector<AspectRow> aspect_sweep(const CrossSection& cs, double volume_um3, double thickness_nm,
                                    const std::vector<double>& length_um, Polarization pol,
                                    const AbsorptionOptions& opt = {});

struct OptimizeResult {
  DetectorGeometry geometry;
  double absorbed = 0.0;
  bool unimodal = true;
  std::vector<std::string> warnings;
  std::vector<std::pair<double, double>> samples;  // (length, absorbed)
};

/// Golden-section search over length in [length_lo, length_hi] at fixed
/// volume, preceded by a coarse unimodality scan of `grid_points` samples.
OptimizeResult optimize_geometry(const CrossSection& cs, double volume_um3, double thickness_nm, double length_lo,
                                 double length_hi, Polarization pol, const AbsorptionOptions& opt = {},
                                 int grid_points = 9, double tol = 1e-3);

/// Same search on an arbitrary objective (absorbed fraction vs length).
OptimizeResult optimize_length(const std::function<double(double)>& absorbed_at, double length_lo, double length_hi,
                               int grid_points = 9, double tol = 1e-3);

/// Stable key of everything that determines a modal solve.
std::string modal_cache_key(const CrossSection& loaded, Polarization pol, const GridConfig& grid,
                            const ModeSolveOptions& solver);

}  // namespace evtes
