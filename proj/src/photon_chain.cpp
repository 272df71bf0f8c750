#include "evtes/photon_chain.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/tools/roots.hpp>

#include "parallel.hpp"

namespace evtes {

using detail::parallel_for;

namespace {

constexpr double kPlanck = 6.62607015e-34;
constexpr double kLightSpeed = 2.99792458e8;

enum Substream : std::uint64_t { kPhotons = 0, kNoise = 1, kParasitic = 2 };

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }


}  // namespace

void SourceConfig::validate() const {
  if (!(std::isfinite(mean_photons) && mean_photons >= 0.0))
    throw std::invalid_argument("mean photon number must be finite and non-negative");
  if (!finite_positive(repetition_hz)) throw std::invalid_argument("repetition rate must be positive");
}

double DetectorResponse::photon_energy_J() const { return kPlanck * kLightSpeed / (wavelength_um * 1e-6); }

void DetectorResponse::validate() const {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
  };
  prob(efficiency_tm, "TM efficiency");
  prob(efficiency_te, "TE efficiency");
  prob(scatter_efficiency, "scatter efficiency");
  prob(substrate_collection, "substrate collection");
  if (!finite_positive(wavelength_um)) throw std::invalid_argument("wavelength must be positive");
  if (!(std::isfinite(noise_sigma) && noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  for (double r : {substrate_event_rate, half_energy_event_rate, reference_substrate_rate})
    if (!(std::isfinite(r) && r >= 0.0)) throw std::invalid_argument("event rates must be >= 0");
  if (half_energy_event_rate > 1.0) throw std::invalid_argument("half-energy rate is a per-pulse probability");
}

void PulseShape::validate() const {
  if (!finite_positive(dt_us) || !finite_positive(window_us) || !finite_positive(tau_rise_us) ||
      !finite_positive(tau_decay_us) || !finite_positive(saturation))
    throw std::invalid_argument("pulse shape parameters must be positive");
  if (tau_rise_us >= tau_decay_us) throw std::invalid_argument("rise time must be shorter than decay time");
  if (!(onset_us >= 0.0 && onset_us < window_us)) throw std::invalid_argument("onset must lie inside the window");
}

std::vector<double> PulseShape::unit_template() const {
  validate();
  const auto n = static_cast<std::size_t>(std::llround(window_us / dt_us));
  // Continuous peak of exp(-t/td) - exp(-t/tr).
  const double tp = tau_rise_us * tau_decay_us / (tau_decay_us - tau_rise_us) * std::log(tau_decay_us / tau_rise_us);
  const double peak = std::exp(-tp / tau_decay_us) - std::exp(-tp / tau_rise_us);
  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt_us - onset_us;
    if (t > 0.0) p[i] = (std::exp(-t / tau_decay_us) - std::exp(-t / tau_rise_us)) / peak;
  }
  return p;
}

std::uint64_t PulseHeightHistogram::total() const {
  std::uint64_t s = 0;
  for (auto c : class_counts) s += c;
  return s;
}

int sample_absorbed(const SourceConfig& src, double efficiency, std::uint64_t pulse_index) {
  Stream rng(src.seed, pulse_index, kPhotons);
  if (src.mean_photons <= 0.0 || efficiency <= 0.0) return 0;
  const int emitted = std::poisson_distribution<int>(src.mean_photons)(rng);
  if (emitted == 0) return 0;
  if (efficiency >= 1.0) return emitted;
  return std::binomial_distribution<int>(emitted, efficiency)(rng);
}

std::vector<int> sample_absorbed_run(const SourceConfig& src, double efficiency) {
  src.validate();
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw std::invalid_argument("efficiency must lie in [0, 1]");
  std::vector<int> out(src.pulse_count);
  for (std::uint64_t i = 0; i < src.pulse_count; ++i) out[i] = sample_absorbed(src, efficiency, i);
  return out;
}

namespace {

PulseRecord synthesize(int n, const DetectorResponse& resp, const std::vector<double>& tmpl, std::uint64_t seed,
                       std::uint64_t index, bool keep_trace, double& height) {
  PulseRecord rec;
  rec.true_absorbed = n;
  Stream noise(seed, index, kNoise);
  height = static_cast<double>(n);
  if (resp.noise_sigma > 0.0)
    height += std::normal_distribution<double>(0.0, resp.noise_sigma * std::sqrt(std::max(1.0, double(n))))(noise);

  Stream par(seed, index, kParasitic);
  if (resp.substrate_event_rate > 0.0) {
    rec.substrate_events = std::poisson_distribution<int>(resp.substrate_event_rate)(par);
    const double mean_deficit = 1.0 - resp.substrate_collection;
    for (int k = 0; k < rec.substrate_events; ++k) {
      double deficit = 1.0;
      if (mean_deficit > 0.0) deficit = std::exponential_distribution<double>(1.0 / mean_deficit)(par);
      height += std::max(0.0, 1.0 - deficit);
    }
  }
  if (resp.half_energy_event_rate > 0.0 && par.uniform() < resp.half_energy_event_rate) {
    rec.half_energy_event = true;
    height += 0.5;
  }
  if (keep_trace) {
    rec.trace.resize(tmpl.size());
    for (std::size_t i = 0; i < tmpl.size(); ++i) rec.trace[i] = height * tmpl[i];
  }
  return rec;
}

double matched_filter(const std::vector<double>& trace, const std::vector<double>& tmpl, double saturation) {
  if (trace.size() != tmpl.size()) throw std::invalid_argument("trace length does not match the pulse window");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (!std::isfinite(trace[i])) throw SaturatedTraceError("trace contains non-finite samples");
    if (trace[i] >= saturation) throw SaturatedTraceError("trace saturates the readout");
    num += trace[i] * tmpl[i];
    den += tmpl[i] * tmpl[i];
  }
  return num / den;
}

}  // namespace

PulseRecord synthesize_pulse(int n_absorbed, const DetectorResponse& resp, const PulseShape& shape,
                             std::uint64_t seed, std::uint64_t pulse_index, bool keep_trace) {
  if (n_absorbed < 0) throw std::invalid_argument("absorbed photon number must be >= 0");
  const auto tmpl = shape.unit_template();
  double height = 0.0;
  auto rec = synthesize(n_absorbed, resp, tmpl, seed, pulse_index, true, height);
  rec.extracted_height = std::max(0.0, matched_filter(rec.trace, tmpl, shape.saturation));
  rec.assigned_n = assign_photon_number(rec.extracted_height);
  if (!keep_trace) rec.trace.clear();
  return rec;
}

double extract_height(const std::vector<double>& trace, const PulseShape& shape) {
  return matched_filter(trace, shape.unit_template(), shape.saturation);
}

double fit_decay_time(const std::vector<double>& trace, const PulseShape& shape) {
  shape.validate();
  double peak = 0.0;
  for (double v : trace) {
    if (!std::isfinite(v)) throw SaturatedTraceError("trace contains non-finite samples");
    peak = std::max(peak, v);
  }
  if (peak <= 0.0) throw std::invalid_argument("trace has no positive pulse");
  // Tail well past the rise, above 5 % of the peak.
  const double start = shape.onset_us + 10.0 * shape.tau_rise_us;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double t = static_cast<double>(i) * shape.dt_us;
    if (t < start || trace[i] < 0.05 * peak) continue;
    const double y = std::log(trace[i]);
    sx += t, sy += y, sxx += t * t, sxy += t * y;
    ++m;
  }
  if (m < 3) throw std::invalid_argument("too few tail samples for a decay fit");
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  if (!(slope < 0.0)) throw std::invalid_argument("tail does not decay");
  return -1.0 / slope;
}

int assign_photon_number(double height) {
  if (!std::isfinite(height)) throw std::invalid_argument("pulse height is not finite");
  if (height < 0.5) return 0;
  return static_cast<int>(std::floor(height + 0.5));
}

PulseHeightHistogram build_histogram(const std::vector<double>& heights, double bin_width, double max_height) {
  if (!finite_positive(bin_width)) throw std::invalid_argument("bin width must be positive");
  PulseHeightHistogram h;
  h.bin_width = bin_width;
  h.bin_low = -0.5;
  const auto nbins = static_cast<std::size_t>(std::ceil((max_height - h.bin_low) / bin_width));
  h.counts.assign(std::max<std::size_t>(nbins, 1), 0);
  std::array<double, kOverflowClass + 1> sums{};
  for (double v : heights) {
    const double b = std::floor((v - h.bin_low) / bin_width);
    const auto idx = static_cast<std::size_t>(std::clamp(b, 0.0, double(h.counts.size() - 1)));
    ++h.counts[idx];
    const int cls = std::min(assign_photon_number(v), kOverflowClass);
    ++h.class_counts[cls];
    sums[cls] += v;
  }
  const double total = static_cast<double>(heights.size());
  for (int k = 0; k <= kOverflowClass; ++k) {
    if (h.class_counts[k] == 0) continue;
    h.peak_centers.push_back(sums[k] / double(h.class_counts[k]));
    h.peak_weights.push_back(double(h.class_counts[k]) / total);
  }
  return h;
}

MeanEstimate estimate_mean_n(const std::array<std::uint64_t, kOverflowClass + 1>& c) {
  MeanEstimate est;
  double total = 0.0, photons = 0.0;
  for (int k = 0; k <= kOverflowClass; ++k) {
    total += double(c[k]);
    if (k < kOverflowClass) photons += double(k) * double(c[k]);
  }
  if (total == 0.0) throw std::invalid_argument("no pulses to estimate from");
  est.low_statistics = total < 100.0;
  const double over = double(c[kOverflowClass]);
  if (photons == 0.0 && over == 0.0) {
    est.mean = 0.0;
    est.upper_bound = -std::log(0.05) / total;
    return est;
  }
  if (over == total) throw std::invalid_argument("all pulses in the overflow class; mean is unbounded");
  if (over == 0.0) {
    est.mean = photons / total;
  } else {
    // Score of the censored likelihood: sum c_k (k/mu - 1) + c_over p(K-1; mu) / P(N >= K; mu).
    auto score = [&](double mu) {
      boost::math::poisson_distribution<double> pd(mu);
      const double q = cdf(complement(pd, kOverflowClass - 1));
      const double tail = q > 0.0 ? pdf(pd, kOverflowClass - 1) / q : (kOverflowClass - mu) / mu;
      return photons / mu - (total - over) + over * tail;
    };
    double lo = 1e-9, hi = std::max(1.0, 2.0 * (photons + kOverflowClass * over) / total);
    while (score(hi) > 0.0) hi *= 2.0;
    boost::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(score, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    est.mean = 0.5 * (r.first + r.second);
  }
  est.uncertainty = std::sqrt(est.mean / total);
  return est;
}

MeanEstimate estimate_mean_n(const PulseHeightHistogram& h) { return estimate_mean_n(h.class_counts); }

ChiSquare chi_square_poisson(const std::array<std::uint64_t, kOverflowClass + 1>& c, double mean,
                             int fitted_parameters) {
  if (!(std::isfinite(mean) && mean > 0.0)) throw std::invalid_argument("Poisson mean must be positive");
  double total = 0.0;
  for (auto v : c) total += double(v);
  if (total == 0.0) throw std::invalid_argument("no counts");
  boost::math::poisson_distribution<double> pd(mean);
  std::vector<double> obs, expd;
  for (int k = 0; k < kOverflowClass; ++k) {
    obs.push_back(double(c[k]));
    expd.push_back(total * pdf(pd, k));
  }
  obs.push_back(double(c[kOverflowClass]));
  expd.push_back(total * cdf(complement(pd, kOverflowClass - 1)));
  // Pool sparse classes from the top into the tail.
  while (expd.size() > 2 && expd.back() < 5.0) {
    const double o = obs.back(), e = expd.back();
    obs.pop_back(), expd.pop_back();
    obs.back() += o, expd.back() += e;
  }
  ChiSquare out;
  for (std::size_t k = 0; k < obs.size(); ++k) out.statistic += (obs[k] - expd[k]) * (obs[k] - expd[k]) / expd[k];
  out.dof = static_cast<int>(obs.size()) - 1 - fitted_parameters;
  if (out.dof < 1) throw std::invalid_argument("too few populated classes for a chi-square test");
  out.p_value = cdf(complement(boost::math::chi_squared_distribution<double>(out.dof), out.statistic));
  return out;
}

double tail_statistic(const std::vector<double>& heights, double sigma) {
  std::uint64_t in_class = 0, low = 0;
  for (double v : heights) {
    const int k = assign_photon_number(v);
    if (k < 1) continue;
    ++in_class;
    if (v < k - 3.0 * sigma * std::sqrt(double(k))) ++low;
  }
  return in_class ? double(low) / double(in_class) : 0.0;
}

double half_energy_statistic(const std::vector<double>& heights, double sigma) {
  if (heights.empty()) return 0.0;
  std::uint64_t near = 0;
  for (double v : heights)
    if (std::abs(v - 0.5) < 1.5 * sigma) ++near;
  return double(near) / double(heights.size());
}

namespace {

// Gaussian noise alone gives about 0.00135 and 2.5e-4 at sigma = 0.1.
constexpr double kTailThreshold = 0.003;
constexpr double kHalfEnergyThreshold = 0.002;

RunResult run_with(const SourceConfig& src, const DetectorResponse& resp, const PulseShape& shape, double efficiency,
                   double substrate_rate, const RunOptions& opt) {
  src.validate();
  resp.validate();
  shape.validate();
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw std::invalid_argument("efficiency must lie in [0, 1]");
  DetectorResponse r = resp;
  r.substrate_event_rate = substrate_rate;
  const auto tmpl = shape.unit_template();

  RunResult out;
  out.records.resize(src.pulse_count);
  std::vector<double> heights(src.pulse_count);
  std::atomic<std::uint64_t> saturated{0};
  parallel_for(src.pulse_count, opt.threads, [&](std::size_t i) {
    const int n = sample_absorbed(src, efficiency, i);
    double h = 0.0;
    auto rec = synthesize(n, r, tmpl, src.seed, i, true, h);
    try {
      rec.extracted_height = std::max(0.0, matched_filter(rec.trace, tmpl, shape.saturation));
    } catch (const SaturatedTraceError&) {
      rec.extracted_height = std::max(shape.saturation, double(kOverflowClass));  // lands in the overflow class
      saturated.fetch_add(1, std::memory_order_relaxed);
    }
    rec.assigned_n = assign_photon_number(rec.extracted_height);
    if (i >= opt.keep_traces) std::vector<double>().swap(rec.trace);
    heights[i] = rec.extracted_height;
    out.records[i] = std::move(rec);
  });

  out.saturated = saturated.load();
  out.histogram = build_histogram(heights);
  out.estimate = estimate_mean_n(out.histogram);
  std::uint64_t eligible = 0, wrong = 0;
  for (const auto& rec : out.records) {
    if (rec.true_absorbed > 5) continue;
    ++eligible;
    if (rec.assigned_n != rec.true_absorbed) ++wrong;
  }
  out.misassigned_fraction = eligible ? double(wrong) / double(eligible) : 0.0;
  out.tail_statistic = tail_statistic(heights, resp.noise_sigma);
  out.half_energy_statistic = half_energy_statistic(heights, resp.noise_sigma);
  out.tail_detected = out.tail_statistic > kTailThreshold;
  out.half_energy_detected = out.half_energy_statistic > kHalfEnergyThreshold;
  return out;
}

}  // namespace

RunResult simulate_run(const SourceConfig& src, const DetectorResponse& resp, const PulseShape& shape,
                       double efficiency, const RunOptions& opt) {
  return run_with(src, resp, shape, efficiency, resp.substrate_event_rate, opt);
}

RunResult simulate_reference_detector(const SourceConfig& src, const DetectorResponse& resp,
                                      const PulseShape& shape, const RunOptions& opt) {
  return run_with(src, resp, shape, resp.scatter_efficiency, resp.reference_substrate_rate, opt);
}

}  // namespace evtes
