#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "evtes/rng.hpp"
#include "evtes/slab.hpp"

namespace evtes {

struct SourceConfig {
  double mean_photons = 28.5;
  double repetition_hz = 35e3;
  std::uint64_t pulse_count = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DetectorResponse {
  double efficiency_tm = 0.986 / 28.5;
  double efficiency_te = 0.086 / 28.5;
  double wavelength_um = 1.55;
  double noise_sigma = 0.1;              // one-photon height units, scaled by sqrt(max(1, n))
  double substrate_event_rate = 0.0;     // mean parasitic substrate events per pulse
  double substrate_collection = 0.7;     // mean collected energy fraction of such an event
  double half_energy_event_rate = 0.0;   // per pulse
  double scatter_efficiency = 5.6e-5;    // off-waveguide reference detector
  double reference_substrate_rate = 0.02; // substrate events per pulse at the reference detector

  double photon_energy_J() const;
  double efficiency(Polarization pol) const { return pol == Polarization::TM ? efficiency_tm : efficiency_te; }
  void validate() const;
};

/// Two-exponential pulse template sampled on [0, window).
struct PulseShape {
  double dt_us = 0.1;
  double window_us = 50.0;
  double onset_us = 5.0;
  double tau_rise_us = 0.5;
  double tau_decay_us = 10.0;
  double saturation = 40.0;  // height units; samples at or above are clipped readout

  void validate() const;
  /// Unit-peak template; its maximum is exactly one photon's height.
  std::vector<double> unit_template() const;
};

class SaturatedTraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PulseRecord {
  std::vector<double> trace;  // empty unless requested
  int true_absorbed = 0;
  double extracted_height = 0.0;  // clamped at 0
  int assigned_n = 0;
  int substrate_events = 0;
  bool half_energy_event = false;
};

/// Photon number classes 0..5 plus an overflow class for n >= 6.
inline constexpr int kOverflowClass = 6;

struct PulseHeightHistogram {
  double bin_width = 0.02;
  double bin_low = -0.5;
  std::vector<std::uint64_t> counts;
  std::array<std::uint64_t, kOverflowClass + 1> class_counts{};
  std::vector<double> peak_centers;  // mean height per populated class, increasing
  std::vector<double> peak_weights;  // class fractions
  std::uint64_t total() const;
  double bin_edge(std::size_t i) const { return bin_low + bin_width * static_cast<double>(i); }
};

struct MeanEstimate {
  double mean = 0.0;
  double uncertainty = 0.0;
  /// One-sided 95 % upper bound, reported when no photon was seen.
  std::optional<double> upper_bound;
  bool low_statistics = false;  // fewer than 100 pulses
};

/// Absorbed photons per pulse: Poisson(<n>) thinned binomially by `efficiency`.
int sample_absorbed(const SourceConfig& src, double efficiency, std::uint64_t pulse_index);
std::vector<int> sample_absorbed_run(const SourceConfig& src, double efficiency);

/// Height = n + N(0, sigma sqrt(max(1,n))) + substrate partial energies + 0.5
/// for a half-energy event; the trace is height times the unit template.
PulseRecord synthesize_pulse(int n_absorbed, const DetectorResponse& resp, const PulseShape& shape,
                             std::uint64_t seed, std::uint64_t pulse_index, bool keep_trace = true);

/// Matched-filter amplitude against the unit template.
double extract_height(const std::vector<double>& trace, const PulseShape& shape);

/// Decay constant from a log-linear fit to the pulse tail.
double fit_decay_time(const std::vector<double>& trace, const PulseShape& shape);

/// Midpoint thresholds: n = round(height), clamped at 0.
int assign_photon_number(double height);
PulseHeightHistogram build_histogram(const std::vector<double>& heights, double bin_width = 0.02,
                                     double max_height = 8.0);

/// Censored-Poisson maximum likelihood mean from the class counts.
MeanEstimate estimate_mean_n(const std::array<std::uint64_t, kOverflowClass + 1>& class_counts);
MeanEstimate estimate_mean_n(const PulseHeightHistogram& h);

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Goodness of fit of class counts to Poisson(mean); classes expecting fewer
/// than 5 counts are pooled into the overflow tail.
ChiSquare chi_square_poisson(const std::array<std::uint64_t, kOverflowClass + 1>& class_counts, double mean,
                             int fitted_parameters = 0);

struct RunOptions {
  std::size_t keep_traces = 0;  // first N pulses keep their traces
  unsigned threads = 1;
};

struct RunResult {
  std::vector<PulseRecord> records;  // one per pulse, traces only for the first keep_traces
  PulseHeightHistogram histogram;
  MeanEstimate estimate;
  std::uint64_t saturated = 0;           // traces clipped by the readout
  double misassigned_fraction = 0.0;      // assigned_n != true_absorbed among true n <= 5
  double tail_statistic = 0.0;
  double half_energy_statistic = 0.0;
  bool tail_detected = false;
  bool half_energy_detected = false;
};

RunResult simulate_run(const SourceConfig& src, const DetectorResponse& resp, const PulseShape& shape,
                       double efficiency, const RunOptions& opt = {});

/// Off-waveguide detector: scatter efficiency, elevated substrate events.
RunResult simulate_reference_detector(const SourceConfig& src, const DetectorResponse& resp,
                                      const PulseShape& shape, const RunOptions& opt = {});

/// Fraction of pulses in classes >= 1 whose height sits more than 3 sigma
/// below the class peak (pure Gaussian noise gives ~0.00135).
double tail_statistic(const std::vector<double>& heights, double noise_sigma);
/// Fraction of pulses within 1.5 sigma of height 0.5.
double half_energy_statistic(const std::vector<double>& heights, double noise_sigma);

}  // namespace evtes
