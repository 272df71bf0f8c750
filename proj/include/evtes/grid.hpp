#pragma once

#include <array>
#include <optional>
#include <vector>

#include "evtes/materials.hpp"

namespace evtes {

enum class EdgeKind { PML, Dirichlet, Neumann };

/// Termination of one side of the computational window. A PML is a graded
/// complex coordinate stretch s = 1 + (stretch + i strength) (d/L)^2 ending
/// in a Dirichlet wall.
struct EdgeCondition {
  EdgeKind kind = EdgeKind::PML;
  double pml_um = 2.0;
  double strength = 3.0;
  double stretch = 2.0;
};

/// Round-trip power attenuation (dB) of a normally incident plane wave in a
/// medium of index `n` crossing the layer twice.
double pml_round_trip_db(const EdgeCondition& e, double wavelength_um, double n);

enum Side { kLeft = 0, kRight = 1, kBottom = 2, kTop = 3 };

struct GridConfig {
  double dx_um = 0.25;
  double dx_outer_um = 0.25;
  double inner_half_width_um = 10.0;
  double dy_um = 0.05;
  double dy_far_um = 0.2;
  double near_core_margin_um = 4.0;
  double dy_metal_um = 0.002;
  double metal_margin_um = 0.2;
  // Refinement straddling the top surface, where the field decays steeply into the cover.
  double dy_surface_um = 0.01;
  double surface_below_um = 0.3;
  double surface_above_um = 1.0;
  double substrate_depth_um = 3.0;  // window extends this far into the substrate
  double cover_height_um = 4.0;
  /// Explicit vertical limits; override substrate_depth / cover_height.
  std::optional<double> y_min_um, y_max_um;
  /// Lateral half-width; defaults to half the cross-section window.
  std::optional<double> half_width_um;
  std::array<EdgeCondition, 4> edges{};

  /// Every spacing divided by `factor` (grid-convergence studies).
  GridConfig refined(double factor) const;
  void validate() const;
};

/// Cell-centered tensor grid with per-cell complex stretch factors.
struct Grid2D {
  std::vector<double> x_edges, y_edges;
  std::vector<double> x, y;      // cell centers
  std::vector<cplx> sx, sy;      // coordinate stretch (1 outside absorbers)
  std::array<EdgeCondition, 4> edges{};
  double wavelength_um = 1.55;

  std::size_t nx() const { return x.size(); }
  std::size_t ny() const { return y.size(); }
  std::size_t size() const { return nx() * ny(); }
  std::size_t index(std::size_t i, std::size_t j) const { return i * ny() + j; }
  double dx(std::size_t i) const { return x_edges[i + 1] - x_edges[i]; }
  double dy(std::size_t j) const { return y_edges[j + 1] - y_edges[j]; }
  double area(std::size_t i, std::size_t j) const { return dx(i) * dy(j); }
  bool in_absorber(std::size_t i, std::size_t j) const { return sx[i] != cplx{1.0} || sy[j] != cplx{1.0}; }

  bool same_as(const Grid2D& o) const;
  void validate() const;
};

/// Grid aligned to every film interface and overlay edge, refined near the
/// core and through the metal. Throws if the overlay or the core reaches into
/// an absorbing layer.
Grid2D make_grid(const CrossSection& cs, const GridConfig& cfg = {});

}  // namespace evtes
