#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evtes/materials.hpp"

namespace evtes {

enum class Polarization { TE, TM };

std::string_view to_string(Polarization p);
Polarization parse_polarization(std::string_view text);

struct SlabLayer {
  ComplexIndex index;
  double thickness_um = 0.0;
};

/// Planar multilayer. The first and last layers are semi-infinite (their
/// thickness is ignored). For TE the continuous quantities are u and u';
/// for TM they are u and u'/eps (u is the transverse magnetic field).
struct SlabStack {
  std::vector<SlabLayer> layers;
  double wavelength_um = 1.55;
  Polarization polarization = Polarization::TE;
  /// Coordinate of the bottom of the first finite layer.
  double origin_um = 0.0;

  void validate() const;
};

/// Rectangle in the complex n_eff plane.
struct SearchBox {
  double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;

  bool empty() const { return !(re_hi > re_lo) || !(im_hi > im_lo); }
  bool contains(cplx z, double pad = 0.0) const {
    return z.real() >= re_lo - pad && z.real() <= re_hi + pad && z.imag() >= im_lo - pad && z.imag() <= im_hi + pad;
  }
};

class SlabSolverError : public std::runtime_error {
 public:
  SlabSolverError(const std::string& what, SearchBox box) : std::runtime_error(what), box_(box) {}
  const SearchBox& box() const { return box_; }

 private:
  SearchBox box_;
};

struct SlabMode {
  cplx n_eff;
  std::vector<double> y_um;
  std::vector<cplx> field;
  int order = 0;
  /// Re(n_eff) within 1e-6 of the lower edge of the guiding range.
  bool near_cutoff = false;
};

/// Transfer-matrix characteristic function; zero exactly at guided or leaky
/// modes. Semi-infinite layers with Re(n) above Re(n_eff) radiate (outgoing
/// branch), the others decay.
cplx slab_dispersion(const SlabStack& stack, cplx n_eff);

/// Guiding range between the second-highest and highest positive Re(eps),
/// padded in the imaginary direction to cover lossy layers.
SearchBox default_search_box(const SlabStack& stack);

/// Number of zeros of slab_dispersion inside `box` (argument principle).
int count_slab_zeros(const SlabStack& stack, const SearchBox& box);

/// Modes sorted by descending Re(n_eff), at most `max_modes`.
std::vector<SlabMode> find_slab_modes(const SlabStack& stack, int max_modes);
std::vector<SlabMode> find_slab_modes(const SlabStack& stack, int max_modes, const SearchBox& box);

/// Newton refinement from `guess`, followed by field sampling.
SlabMode refine_slab_mode(const SlabStack& stack, cplx guess);

/// Vertical stack of `cs` at lateral position `x_um`, including the channel
/// perturbation and the overlay when it covers `x_um`.
SlabStack vertical_stack(const CrossSection& cs, double x_um, Polarization pol);

/// Power-flux weight of the principal field: 1 for TE, |Re(1/eps)| for TM.
double power_weight(Polarization pol, cplx eps);

}  // namespace evtes
