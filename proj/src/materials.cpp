#include "evtes/materials.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace evtes {

namespace {

constexpr double kWavelengthMatchTol = 1e-9;

ComplexIndex parse_index(const IniSection& s) {
  return {s.get_double("n"), s.get_double("k", 0.0)};
}

void write_layer(IniSection& s, const Layer& l, bool with_thickness) {
  s.set("material", l.material);
  s.set("n", format_double(l.index.n_real));
  s.set("k", format_double(l.index.n_imag));
  if (with_thickness) s.set("thickness_um", format_double(l.thickness_um));
}

Layer read_layer(const IniSection& s, bool with_thickness) {
  Layer l;
  l.material = s.get_string("material");
  l.index = parse_index(s);
  if (with_thickness) l.thickness_um = s.get_double("thickness_um");
  s.reject_unknown();
  return l;
}

}  // namespace

void DetectorGeometry::validate() const {
  if (!(length_um > 0.0) || !(width_um > 0.0) || !(thickness_nm > 0.0))
    throw std::invalid_argument("detector geometry: degenerate dimensions (length " + format_double(length_um) +
                                " um, width " + format_double(width_um) + " um, thickness " +
                                format_double(thickness_nm) + " nm)");
}

DetectorGeometry DetectorGeometry::at_fixed_volume(double volume_um3, double thickness_nm, double length_um,
                                                   const std::string& material) {
  if (!(volume_um3 > 0.0) || !(thickness_nm > 0.0) || !(length_um > 0.0))
    throw std::invalid_argument("at_fixed_volume: volume, thickness and length must be positive");
  DetectorGeometry g;
  g.length_um = length_um;
  g.thickness_nm = thickness_nm;
  g.width_um = volume_um3 / (length_um * thickness_nm * 1e-3);
  g.material = material;
  return g;
}

void MaterialLibrary::add(Material m) {
  if (m.name.empty()) throw std::invalid_argument("material without a name");
  if (!(m.wavelength_um > 0.0)) throw std::invalid_argument("material '" + m.name + "': wavelength must be > 0");
  if (!(m.index.n_real > 0.0)) throw std::invalid_argument("material '" + m.name + "': n must be > 0");
  if (m.index.n_imag < 0.0) throw std::invalid_argument("material '" + m.name + "': k must be >= 0");
  materials_[m.name] = std::move(m);
}

const Material& MaterialLibrary::get(const std::string& name) const {
  auto it = materials_.find(name);
  if (it == materials_.end()) throw std::out_of_range("unknown material '" + name + "'");
  return it->second;
}

ComplexIndex MaterialLibrary::index(const std::string& name, double wavelength_um) const {
  const auto& m = get(name);
  if (std::abs(m.wavelength_um - wavelength_um) > kWavelengthMatchTol)
    throw std::out_of_range("material '" + name + "' is tabulated at " + format_double(m.wavelength_um) +
                            " um only, requested " + format_double(wavelength_um) + " um");
  return m.index;
}

void MaterialLibrary::set_index(const std::string& name, ComplexIndex index) {
  auto m = get(name);
  m.index = index;
  add(std::move(m));
}

std::vector<std::string> MaterialLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : materials_) out.push_back(k);
  return out;
}

MaterialLibrary MaterialLibrary::from_ini(const IniDocument& doc) {
  constexpr std::string_view prefix = "material.";
  MaterialLibrary lib;
  // Relative entries may reference materials defined later in the file.
  std::vector<const IniSection*> relative;
  for (const auto& s : doc.sections()) {
    if (s.name().rfind(prefix, 0) != 0) continue;
    if (s.has("relative_to")) {
      relative.push_back(&s);
      continue;
    }
    Material m{s.name().substr(prefix.size()), parse_index(s), s.get_double("wavelength_um")};
    s.reject_unknown();
    lib.add(std::move(m));
  }
  for (const auto* s : relative) {
    const auto& base = lib.get(s->get_string("relative_to"));
    const double contrast = s->get_double("contrast");
    const double wl = s->get_double("wavelength_um", base.wavelength_um);
    s->reject_unknown();
    Material m{s->name().substr(prefix.size()),
               {base.index.n_real * (1.0 + contrast), base.index.n_imag * (1.0 + contrast)},
               wl};
    lib.add(std::move(m));
  }
  return lib;
}

const MaterialLibrary& MaterialLibrary::builtin() {
  static const MaterialLibrary lib = from_ini(IniDocument::parse(builtin_materials_text(), "materials.ini"));
  return lib;
}

double ChannelProfile::sigma_um() const { return fwhm_um / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

double CrossSection::stack_height_um() const {
  double h = 0.0;
  for (const auto& f : films) h += f.thickness_um;
  return h;
}

double CrossSection::film_bottom_um(std::size_t i) const {
  double y = -stack_height_um();
  for (std::size_t k = 0; k < i; ++k) y += films.at(k).thickness_um;
  return y;
}

const Layer& CrossSection::core() const {
  if (!channel) throw std::logic_error("cross-section has no channel profile");
  return films.at(channel->core_film);
}

cplx CrossSection::index_at(double x_um, double y_um) const {
  if (y_um >= 0.0) {
    if (overlay && y_um < overlay->thickness_um() && std::abs(x_um - overlay->offset_um) < 0.5 * overlay->width_um)
      return overlay->index.value();
    return cover.index.value();
  }
  double bottom = -stack_height_um();
  if (y_um < bottom) return substrate.index.value();
  for (std::size_t i = 0; i < films.size(); ++i) {
    const double top = bottom + films[i].thickness_um;
    if (y_um < top || i + 1 == films.size()) {
      cplx n = films[i].index.value();
      if (channel && channel->core_film == i && channel->contrast > 0.0) {
        const double s = channel->sigma_um();
        n += channel->contrast * films[i].index.n_real * std::exp(-x_um * x_um / (2.0 * s * s));
      }
      return n;
    }
    bottom = top;
  }
  return cover.index.value();
}

CrossSection CrossSection::bare() const {
  CrossSection out = *this;
  out.overlay.reset();
  return out;
}

void CrossSection::validate() const {
  if (!(wavelength_um > 0.0)) throw std::invalid_argument("cross-section: wavelength must be > 0");
  if (films.empty()) throw std::invalid_argument("cross-section: no films");
  for (const auto& f : films)
    if (!(f.thickness_um > 0.0)) throw std::invalid_argument("cross-section: film '" + f.material + "' has thickness <= 0");
  if (channel) {
    if (channel->contrast < 0.0 || channel->contrast > 0.05)
      throw std::invalid_argument("cross-section: channel contrast outside [0, 0.05]");
    if (!(channel->fwhm_um > 0.0)) throw std::invalid_argument("cross-section: channel width must be > 0");
    if (channel->core_film >= films.size()) throw std::invalid_argument("cross-section: channel core film out of range");
  }
  if (overlay) {
    if (!(overlay->thickness_nm > 0.0) || !(overlay->width_um > 0.0))
      throw std::invalid_argument("cross-section: degenerate detector overlay");
    if (overlay->width_um + 2.0 * std::abs(overlay->offset_um) > window_width_um)
      throw std::invalid_argument("cross-section: detector overlay exceeds the computational window");
  }
}

IniDocument CrossSection::to_ini() const {
  IniDocument doc;
  auto& top = doc.ensure("cross_section");
  top.set("wavelength_um", format_double(wavelength_um));
  top.set("window_width_um", format_double(window_width_um));
  top.set("film_count", std::to_string(films.size()));
  write_layer(doc.ensure("substrate"), substrate, false);
  for (std::size_t i = 0; i < films.size(); ++i) write_layer(doc.ensure("film." + std::to_string(i)), films[i], true);
  write_layer(doc.ensure("cover"), cover, false);
  if (channel) {
    auto& s = doc.ensure("channel");
    s.set("contrast", format_double(channel->contrast));
    s.set("fwhm_um", format_double(channel->fwhm_um));
    s.set("core_film", std::to_string(channel->core_film));
  }
  if (overlay) {
    auto& s = doc.ensure("overlay");
    s.set("material", overlay->material);
    s.set("n", format_double(overlay->index.n_real));
    s.set("k", format_double(overlay->index.n_imag));
    s.set("thickness_nm", format_double(overlay->thickness_nm));
    s.set("width_um", format_double(overlay->width_um));
    s.set("offset_um", format_double(overlay->offset_um));
  }
  return doc;
}

CrossSection CrossSection::from_ini(const IniDocument& doc) {
  auto need = [&](const std::string& name) -> const IniSection& {
    const auto* s = doc.find(name);
    if (!s) throw ConfigError("cross-section: missing section [" + name + "]");
    return *s;
  };
  CrossSection cs;
  const auto& top = need("cross_section");
  cs.wavelength_um = top.get_double("wavelength_um");
  cs.window_width_um = top.get_double("window_width_um");
  const auto n_films = static_cast<std::size_t>(top.get_int("film_count"));
  top.reject_unknown();
  cs.substrate = read_layer(need("substrate"), false);
  for (std::size_t i = 0; i < n_films; ++i) cs.films.push_back(read_layer(need("film." + std::to_string(i)), true));
  cs.cover = read_layer(need("cover"), false);
  if (const auto* s = doc.find("channel")) {
    ChannelProfile ch;
    ch.contrast = s->get_double("contrast");
    ch.fwhm_um = s->get_double("fwhm_um");
    ch.core_film = static_cast<std::size_t>(s->get_int("core_film"));
    s->reject_unknown();
    cs.channel = ch;
  }
  if (const auto* s = doc.find("overlay")) {
    DetectorOverlay ov;
    ov.material = s->get_string("material");
    ov.index = parse_index(*s);
    ov.thickness_nm = s->get_double("thickness_nm");
    ov.width_um = s->get_double("width_um");
    ov.offset_um = s->get_double("offset_um");
    s->reject_unknown();
    cs.overlay = ov;
  }
  cs.validate();
  return cs;
}

CrossSection default_device(const MaterialLibrary& lib) {
  const auto doc = IniDocument::parse(builtin_materials_text(), "materials.ini");
  const auto* dev = doc.find("device");
  if (!dev) throw ConfigError("materials.ini: missing [device] section");
  const double wl = lib.get(dev->get_string("core")).wavelength_um;
  auto layer = [&](const std::string& name, double t) { return Layer{name, lib.index(name, wl), t}; };

  CrossSection cs;
  cs.wavelength_um = wl;
  cs.substrate = layer(dev->get_string("substrate"), 0.0);
  cs.films.push_back(layer(dev->get_string("cladding"), dev->get_double("cladding_um")));
  cs.films.push_back(layer(dev->get_string("core"), dev->get_double("core_um")));
  cs.cover = layer(dev->get_string("cover"), 0.0);
  cs.channel = ChannelProfile{dev->get_double("channel_contrast"), dev->get_double("channel_fwhm_um"), 1};
  cs.window_width_um = dev->get_double("window_um");
  cs.validate();
  return cs;
}

CrossSection with_detector(const CrossSection& cs, const DetectorGeometry& g, const MaterialLibrary& lib) {
  g.validate();
  if (g.width_um > cs.window_width_um)
    throw std::invalid_argument("with_detector: overlay width " + format_double(g.width_um) +
                                " um exceeds the computational window of " + format_double(cs.window_width_um) + " um");
  CrossSection out = cs;
  out.overlay = DetectorOverlay{g.material, lib.index(g.material, cs.wavelength_um), g.thickness_nm, g.width_um, 0.0};
  out.validate();
  return out;
}

CrossSection with_buffer_layer(const CrossSection& cs, const std::string& material, double thickness_nm,
                               const MaterialLibrary& lib) {
  if (!(thickness_nm > 0.0)) throw std::invalid_argument("with_buffer_layer: thickness must be > 0");
  CrossSection out = cs;
  out.films.push_back(Layer{material, lib.index(material, cs.wavelength_um), thickness_nm * 1e-3});
  out.validate();
  return out;
}

double alpha_from_neff(double n_imag, double wavelength_um) {
  if (!(wavelength_um > 0.0)) throw std::invalid_argument("alpha_from_neff: wavelength must be > 0");
  return 4.0 * std::numbers::pi * n_imag / (wavelength_um * 1e-4);
}

}  // namespace evtes
