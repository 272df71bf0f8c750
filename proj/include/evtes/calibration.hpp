#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtes/ini.hpp"

namespace evtes {

/// A quoted value with its uncertainty at coverage factor k (u/k is 1 sigma).
struct Measured {
  double value = 0.0;
  double u = 0.0;
  double coverage = 1.0;
  double sigma() const { return u / coverage; }
};

struct CalibrationMeasurement {
  double P_pm_W = 1e-3;
  Measured eta_switch{0.917, 0.010};
  double r_fiber = 0.036;
  double gamma = 0.9995;  // power meter 2 correction, applied to transmissions
  Measured T_AB{0.1774, 0.004};
  Measured T_BA{0.1765, 0.004};
  Measured eta_prime_A{0.029, 0.002};
  Measured eta_prime_B{0.035, 0.002};
  double r_int = 0.0003;
  Measured rel_power{0.0, 0.005, 2.0};  // relative power-meter uncertainty (value unused)

  void validate() const;
  /// Gamma-corrected mean of the two directions.
  double transmission() const { return gamma * 0.5 * (T_AB.value + T_BA.value); }

  static CalibrationMeasurement from_ini(const IniDocument& doc);
  IniDocument to_ini() const;
};

class InconsistentMeasurementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Estimate {
  double value = 0.0;
  double u_stat = 0.0;
  double u_syst = 0.0;
};

enum class UncertaintyMethod { Linear, MonteCarlo };

struct CalibrationResult {
  Estimate eta_tes, eta_A, eta_B;
  double K = 0.0;
  double r_int = 0.0;
  double transmission = 0.0;
  UncertaintyMethod method = UncertaintyMethod::Linear;
  std::size_t samples = 0;
  double inconsistent_fraction = 0.0;
  bool throughput_asymmetric = false;
};

double corrected_input_power(double P_pm_W, double eta_switch, double r_fiber);
double forward_transmission(double eta_A, double eta_B, double eta_tes, double r_int);
double system_efficiency(double eta_X, double eta_tes, double r_int);

/// Closed-form root in (0,1) of eta^2 + K eta - K = 0.
double eta_tes_from_K(double K);

/// Central values only (u = 0, method Linear).
CalibrationResult extract_efficiencies(const CalibrationMeasurement& m);

struct UncertaintyOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  std::vector<double> systematic_r_int{0.0003, 0.01};
};

/// Monte-Carlo propagation of the stated input uncertainties. The input power
/// enters every efficiency and transmission as one common factor.
CalibrationResult propagate_uncertainty(const CalibrationMeasurement& m, const UncertaintyOptions& opt = {});

/// True when |T_AB - T_BA| stays within tol.
bool throughput_check(double T_AB, double T_BA, double tol);

/// Per-polarization absorption efficiency implied by a measured mean photon
/// number at a known input mean.
double polarization_efficiency(double measured_mean, double input_mean);

/// Efficiency table: one row per r_int.
std::string format_efficiency_table(const std::vector<CalibrationResult>& rows);
/// CSV with header quantity,value,u_stat,u_syst.
std::string calibration_csv(const CalibrationResult& r);

}  // namespace evtes
