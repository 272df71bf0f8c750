#include "evtes/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "evtes/rng.hpp"

namespace evtes {

namespace {

bool open_unit(double v) { return std::isfinite(v) && v > 0.0 && v < 1.0; }

void check_measured(const Measured& q, const char* name, bool unit_interval) {
  if (unit_interval && !open_unit(q.value)) throw std::invalid_argument(std::string(name) + " must lie in (0, 1)");
  if (!(std::isfinite(q.u) && q.u >= 0.0)) throw std::invalid_argument(std::string(name) + " uncertainty must be >= 0");
  if (!(std::isfinite(q.coverage) && q.coverage > 0.0))
    throw std::invalid_argument(std::string(name) + " coverage factor must be positive");
}

// Perturbable inputs, in the order they are sampled.
enum Input { kSwitch, kPowerIn, kPowerOut, kTab, kTba, kEtaA, kEtaB, kInputs };

struct Triple {
  double eta_tes, eta_A, eta_B, K;
};

// Extraction with every input shifted by d (absolute shifts; the two power
// terms are relative).
Triple evaluate(const CalibrationMeasurement& m, const std::array<double, kInputs>& d, double r_int) {
  const double s_in = (m.eta_switch.value + d[kSwitch]) / m.eta_switch.value * (1.0 + d[kPowerIn]);
  const double T = m.gamma * 0.5 * ((m.T_AB.value + d[kTab]) + (m.T_BA.value + d[kTba])) * (1.0 + d[kPowerOut]) / s_in;
  const double pa = (m.eta_prime_A.value + d[kEtaA]) / s_in;
  const double pb = (m.eta_prime_B.value + d[kEtaB]) / s_in;
  Triple t{};
  t.K = pa * pb / (T * (1.0 - r_int));
  if (!(std::isfinite(t.K) && t.K > 0.0) || !(T > 0.0))
    throw InconsistentMeasurementError("calibration inputs give K <= 0");
  t.eta_tes = eta_tes_from_K(t.K);
  if (!(t.eta_tes > 0.0 && t.eta_tes < 1.0)) throw InconsistentMeasurementError("extracted detector efficiency outside (0, 1)");
  t.eta_A = pa / ((1.0 - r_int) * t.eta_tes);
  t.eta_B = pb / ((1.0 - r_int) * t.eta_tes);
  // Small slack so exact round trips at efficiencies near 1 survive rounding.
  if (t.eta_A > 1.0 + 1e-9 || t.eta_B > 1.0 + 1e-9)
    throw InconsistentMeasurementError(
        fmt::format("extracted coupling efficiency above 1 (eta_A = {:.4g}, eta_B = {:.4g}): system efficiency "
                    "exceeds what the transmission allows",
                    t.eta_A, t.eta_B));
  return t;
}

std::array<double, kInputs> sigmas(const CalibrationMeasurement& m) {
  return {m.eta_switch.sigma(), m.rel_power.sigma(), m.rel_power.sigma(), m.T_AB.sigma(),
          m.T_BA.sigma(),       m.eta_prime_A.sigma(), m.eta_prime_B.sigma()};
}

void systematic(const CalibrationMeasurement& m, const std::vector<double>& r_values, CalibrationResult& out) {
  const std::array<double, kInputs> zero{};
  for (double r : r_values) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("systematic r_int values must lie in [0, 1)");
    const auto t = evaluate(m, zero, r);
    out.eta_tes.u_syst = std::max(out.eta_tes.u_syst, std::abs(t.eta_tes - out.eta_tes.value));
    out.eta_A.u_syst = std::max(out.eta_A.u_syst, std::abs(t.eta_A - out.eta_A.value));
    out.eta_B.u_syst = std::max(out.eta_B.u_syst, std::abs(t.eta_B - out.eta_B.value));
  }
}

}  // namespace

void CalibrationMeasurement::validate() const {
  if (!(std::isfinite(P_pm_W) && P_pm_W >= 0.0)) throw std::invalid_argument("P_pm must be >= 0");
  check_measured(eta_switch, "eta_switch", true);
  check_measured(T_AB, "T_AB", true);
  check_measured(T_BA, "T_BA", true);
  check_measured(eta_prime_A, "eta_prime_A", true);
  check_measured(eta_prime_B, "eta_prime_B", true);
  check_measured(rel_power, "relative power uncertainty", false);
  if (!(r_fiber >= 0.0 && r_fiber < 1.0)) throw std::invalid_argument("r_fiber must lie in [0, 1)");
  if (!(r_int >= 0.0 && r_int < 1.0)) throw std::invalid_argument("r_int must lie in [0, 1)");
  if (!(std::isfinite(gamma) && gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
}

double corrected_input_power(double P_pm_W, double eta_switch, double r_fiber) {
  if (!(r_fiber < 1.0)) throw std::invalid_argument("r_fiber must be below 1");
  return P_pm_W * eta_switch / (1.0 - r_fiber);
}

double forward_transmission(double eta_A, double eta_B, double eta_tes, double r_int) {
  return eta_A * (1.0 - r_int) * (1.0 - eta_tes) * eta_B;
}

double system_efficiency(double eta_X, double eta_tes, double r_int) { return eta_X * (1.0 - r_int) * eta_tes; }

double eta_tes_from_K(double K) {
  if (!(std::isfinite(K) && K > 0.0)) throw InconsistentMeasurementError("K must be positive");
  // 0.5 (sqrt(K(K+4)) - K), written without the cancellation at large K.
  return 2.0 * K / (std::sqrt(K * (K + 4.0)) + K);
}

CalibrationResult extract_efficiencies(const CalibrationMeasurement& m) {
  m.validate();
  const auto t = evaluate(m, {}, m.r_int);
  CalibrationResult out;
  out.eta_tes.value = t.eta_tes;
  out.eta_A.value = t.eta_A;
  out.eta_B.value = t.eta_B;
  out.K = t.K;
  out.r_int = m.r_int;
  out.transmission = m.transmission();
  out.method = UncertaintyMethod::Linear;
  out.throughput_asymmetric =
      !throughput_check(m.T_AB.value, m.T_BA.value, std::hypot(m.T_AB.sigma(), m.T_BA.sigma()));

  // First-order propagation by central differences.
  const auto sig = sigmas(m);
  double va = 0, vb = 0, vt = 0;
  for (int i = 0; i < kInputs; ++i) {
    if (sig[i] == 0.0) continue;
    const double h = 1e-4 * sig[i];
    std::array<double, kInputs> up{}, dn{};
    up[i] = h, dn[i] = -h;
    const auto a = evaluate(m, up, m.r_int), b = evaluate(m, dn, m.r_int);
    auto sq = [&](double hi, double lo) { return std::pow((hi - lo) / (2.0 * h) * sig[i], 2); };
    vt += sq(a.eta_tes, b.eta_tes), va += sq(a.eta_A, b.eta_A), vb += sq(a.eta_B, b.eta_B);
  }
  out.eta_tes.u_stat = std::sqrt(vt);
  out.eta_A.u_stat = std::sqrt(va);
  out.eta_B.u_stat = std::sqrt(vb);
  return out;
}

CalibrationResult propagate_uncertainty(const CalibrationMeasurement& m, const UncertaintyOptions& opt) {
  if (opt.samples < 10000) throw std::invalid_argument("Monte-Carlo propagation needs at least 10^4 samples");
  auto out = extract_efficiencies(m);
  out.eta_tes.u_stat = out.eta_A.u_stat = out.eta_B.u_stat = 0.0;
  out.method = UncertaintyMethod::MonteCarlo;
  out.samples = opt.samples;
  const auto sig = sigmas(m);

  std::vector<Triple> good;
  good.reserve(opt.samples);
  std::size_t bad = 0;
  std::string first_reason;
  for (std::size_t i = 0; i < opt.samples; ++i) {
    Stream rng(opt.seed, i);
    std::normal_distribution<double> z;
    std::array<double, kInputs> d{};
    for (int k = 0; k < kInputs; ++k) d[k] = sig[k] * z(rng);
    try {
      good.push_back(evaluate(m, d, m.r_int));
    } catch (const InconsistentMeasurementError& e) {
      if (bad++ == 0) first_reason = e.what();
    }
  }
  out.inconsistent_fraction = double(bad) / double(opt.samples);
  if (out.inconsistent_fraction > 0.01)
    throw InconsistentMeasurementError(fmt::format(
        "{} of {} Monte-Carlo samples ({:.2f} %) were inconsistent; first failure: {}", bad, opt.samples,
        100.0 * out.inconsistent_fraction, first_reason));

  auto stdev = [&](double Triple::*f) {
    double mean = 0.0;
    for (const auto& t : good) mean += t.*f;
    mean /= double(good.size());
    double v = 0.0;
    for (const auto& t : good) v += (t.*f - mean) * (t.*f - mean);
    return std::sqrt(v / double(good.size() - 1));
  };
  out.eta_tes.u_stat = stdev(&Triple::eta_tes);
  out.eta_A.u_stat = stdev(&Triple::eta_A);
  out.eta_B.u_stat = stdev(&Triple::eta_B);
  systematic(m, opt.systematic_r_int, out);
  return out;
}

bool throughput_check(double T_AB, double T_BA, double tol) { return std::abs(T_AB - T_BA) <= tol; }

double polarization_efficiency(double measured_mean, double input_mean) {
  if (!(input_mean > 0.0)) throw std::invalid_argument("input mean photon number must be positive");
  if (!(measured_mean >= 0.0 && measured_mean <= input_mean))
    throw std::invalid_argument("measured mean must lie in [0, input mean]");
  return measured_mean / input_mean;
}

std::string format_efficiency_table(const std::vector<CalibrationResult>& rows) {
  std::ostringstream os;
  os << fmt::format("{:<10}{:<16}{:<16}{:<16}\n", "r_int", "eta_A", "eta_B", "eta_TES");
  auto pct = [](const Estimate& e, int digits) {
    return fmt::format("{:.{}f} +/- {:.{}f} %", 100.0 * e.value, digits, 100.0 * e.u_stat, digits);
  };
  for (const auto& r : rows)
    os << fmt::format("{:<10}{:<16}{:<16}{:<16}\n", fmt::format("{:.2f} %", 100.0 * r.r_int), pct(r.eta_A, 1),
                      pct(r.eta_B, 1), pct(r.eta_tes, 1));
  return os.str();
}

std::string calibration_csv(const CalibrationResult& r) {
  std::ostringstream os;
  os << "quantity,value,u_stat,u_syst\n";
  auto row = [&](const char* name, const Estimate& e) {
    os << name << ',' << format_double(e.value) << ',' << format_double(e.u_stat) << ',' << format_double(e.u_syst)
       << '\n';
  };
  row("eta_tes", r.eta_tes);
  row("eta_A", r.eta_A);
  row("eta_B", r.eta_B);
  os << "K," << format_double(r.K) << ",0,0\n";
  os << "T," << format_double(r.transmission) << ",0,0\n";
  os << "r_int," << format_double(r.r_int) << ",0,0\n";
  return os.str();
}

namespace {

Measured read_measured(const IniSection& s, const std::string& key, const Measured& fallback) {
  Measured q;
  q.value = s.get_double(key, fallback.value);
  q.u = s.get_double(key + "_u", fallback.u);
  q.coverage = s.get_double(key + "_k", fallback.coverage);
  return q;
}

void write_measured(IniSection& s, const std::string& key, const Measured& q) {
  s.set(key, format_double(q.value));
  s.set(key + "_u", format_double(q.u));
  s.set(key + "_k", format_double(q.coverage));
}

}  // namespace

CalibrationMeasurement CalibrationMeasurement::from_ini(const IniDocument& doc) {
  const auto* s = doc.find("measurement");
  if (!s) throw ConfigError("calibration file has no [measurement] section");
  for (const auto& sec : doc.sections())
    if (sec.name() != "measurement") throw ConfigError("unknown section [" + sec.name() + "] in calibration file");
  const CalibrationMeasurement d;
  CalibrationMeasurement m;
  m.P_pm_W = s->get_double("P_pm", d.P_pm_W);
  m.eta_switch = read_measured(*s, "eta_switch", d.eta_switch);
  m.r_fiber = s->get_double("r_fiber", d.r_fiber);
  m.gamma = s->get_double("gamma", d.gamma);
  m.T_AB = read_measured(*s, "T_AB", d.T_AB);
  m.T_BA = read_measured(*s, "T_BA", d.T_BA);
  m.eta_prime_A = read_measured(*s, "eta_prime_A", d.eta_prime_A);
  m.eta_prime_B = read_measured(*s, "eta_prime_B", d.eta_prime_B);
  m.r_int = s->get_double("r_int", d.r_int);
  m.rel_power.u = s->get_double("rel_power_uncertainty", d.rel_power.u);
  m.rel_power.coverage = s->get_double("rel_power_uncertainty_k", d.rel_power.coverage);
  s->reject_unknown();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[measurement]: ") + e.what());
  }
  return m;
}

IniDocument CalibrationMeasurement::to_ini() const {
  IniDocument doc;
  auto& s = doc.ensure("measurement");
  s.set("P_pm", format_double(P_pm_W));
  write_measured(s, "eta_switch", eta_switch);
  s.set("r_fiber", format_double(r_fiber));
  s.set("gamma", format_double(gamma));
  write_measured(s, "T_AB", T_AB);
  write_measured(s, "T_BA", T_BA);
  write_measured(s, "eta_prime_A", eta_prime_A);
  write_measured(s, "eta_prime_B", eta_prime_B);
  s.set("r_int", format_double(r_int));
  s.set("rel_power_uncertainty", format_double(rel_power.u));
  s.set("rel_power_uncertainty_k", format_double(rel_power.coverage));
  return doc;
}

}  // namespace evtes
