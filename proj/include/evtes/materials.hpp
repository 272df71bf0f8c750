#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evtes/detector_geometry.hpp"
#include "evtes/ini.hpp"

namespace evtes {

using cplx = std::complex<double>;

/// n + i k. Absorbing media have k >= 0.
struct ComplexIndex {
  double n_real = 1.0;
  double n_imag = 0.0;

  cplx value() const { return {n_real, n_imag}; }
  cplx permittivity() const { return value() * value(); }
  bool operator==(const ComplexIndex&) const = default;
};

struct Material {
  std::string name;
  ComplexIndex index;
  double wavelength_um = 1.55;
};

/// Named optical constants, each valid at one wavelength only.
class MaterialLibrary {
 public:
  void add(Material m);
  bool contains(const std::string& name) const { return materials_.count(name) != 0; }
  const Material& get(const std::string& name) const;

  /// Index of `name` at `wavelength_um`; no interpolation, so any other
  /// wavelength than the stored one is an error.
  ComplexIndex index(const std::string& name, double wavelength_um) const;

  /// Override the index of an existing entry (sensitivity sweeps, config).
  void set_index(const std::string& name, ComplexIndex index);

  std::vector<std::string> names() const;

  /// Reads every `[material.<name>]` section; other sections are ignored.
  /// Entries may be absolute (`n`, `k`) or `relative_to=<base> contrast=<c>`
  /// meaning n = n_base * (1 + c).
  static MaterialLibrary from_ini(const IniDocument& doc);

  /// The constants shipped in data/materials.ini (compiled in).
  static const MaterialLibrary& builtin();

 private:
  std::map<std::string, Material> materials_;
};

/// Text of data/materials.ini as compiled into the library.
const std::string& builtin_materials_text();

struct Layer {
  std::string material;
  ComplexIndex index;
  double thickness_um = 0.0;  // ignored for the semi-infinite substrate and cover
};

/// Gaussian UV-written channel: dn(x) = contrast * n_core * exp(-x^2 / 2 sigma^2)
/// inside the core film only. `fwhm_um` is the full width at half maximum of dn.
struct ChannelProfile {
  double contrast = 0.0;
  double fwhm_um = 6.0;
  std::size_t core_film = 0;

  double sigma_um() const;
};

struct DetectorOverlay {
  std::string material;
  ComplexIndex index;
  double thickness_nm = 0.0;
  double width_um = 0.0;
  double offset_um = 0.0;

  double thickness_um() const { return thickness_nm * 1e-3; }
};

/// Layered waveguide cross-section.
///
/// Vertical coordinate y is zero at the top of the film stack and increases
/// towards the cover; films are listed from the substrate upward. The overlay
/// occupies 0 <= y < thickness directly on the topmost film.
struct CrossSection {
  double wavelength_um = 1.55;
  Layer substrate;
  std::vector<Layer> films;
  Layer cover;
  std::optional<ChannelProfile> channel;
  std::optional<DetectorOverlay> overlay;
  double window_width_um = 50.0;

  double stack_height_um() const;
  /// y of the bottom of film `i`.
  double film_bottom_um(std::size_t i) const;
  const Layer& core() const;

  /// Local complex index including channel and overlay.
  cplx index_at(double x_um, double y_um) const;

  /// Same stack without overlay or channel perturbation.
  CrossSection bare() const;

  void validate() const;

  IniDocument to_ini() const;
  static CrossSection from_ini(const IniDocument& doc);
};

/// Silicon substrate, 17 um oxide, 5.5 um doped core (0.6 % contrast), air
/// cover; 0.3 % Gaussian channel with 6 um FWHM; no overlay.
CrossSection default_device(const MaterialLibrary& lib = MaterialLibrary::builtin());

/// Adds a strip of `g`'s material centered on the channel.
CrossSection with_detector(const CrossSection& cs, const DetectorGeometry& g,
                           const MaterialLibrary& lib = MaterialLibrary::builtin());

/// Inserts a thin film (e.g. the amorphous-silicon stress-relief layer) on
/// top of the stack. The channel stays in the original core film.
CrossSection with_buffer_layer(const CrossSection& cs, const std::string& material, double thickness_nm,
                               const MaterialLibrary& lib = MaterialLibrary::builtin());

/// Power attenuation coefficient in cm^-1 for an effective-index imaginary part.
double alpha_from_neff(double n_imag, double wavelength_um);

}  // namespace evtes
