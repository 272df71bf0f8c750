#pragma once

#include <string>

namespace evtes {

/// Absorber strip dimensions. The strip is centered on the channel and
/// its length runs along the propagation direction.
struct DetectorGeometry {
  double length_um = 25.0;
  double width_um = 25.0;
  double thickness_nm = 40.0;
  std::string material = "tungsten";

  double volume_um3() const { return length_um * width_um * thickness_nm * 1e-3; }

  /// Throws std::invalid_argument unless every dimension is positive.
  void validate() const;

  /// Width that keeps `volume_um3` fixed at the given length and thickness.
  static DetectorGeometry at_fixed_volume(double volume_um3, double thickness_nm, double length_um,
                                          const std::string& material = "tungsten");
};

}  // namespace evtes
