#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Guided modes of the symmetric slab n_clad / n_core (thickness d) / n_clad,
// by bracketing each branch of the classic even/odd transcendental equations
// written in the phase form  kappa d = m pi + 2 atan(r gamma / kappa).
// r = 1 for TE and (n_core/n_clad)^2 for TM. Descending n_eff.
inline std::vector<double> symmetric_slab(double n_clad, double n_core, double d_um, double wl_um, bool tm) {
  const double k0 = 2.0 * std::numbers::pi / wl_um;
  const double r = tm ? (n_core * n_core) / (n_clad * n_clad) : 1.0;
  auto phase = [&](double n, int m) {
    const double kappa = k0 * std::sqrt(n_core * n_core - n * n);
    const double gamma = k0 * std::sqrt(n * n - n_clad * n_clad);
    return kappa * d_um - m * std::numbers::pi - 2.0 * std::atan(r * gamma / kappa);
  };
  std::vector<double> out;
  const double eps = 1e-15;
  for (int m = 0;; ++m) {
    const double lo = n_clad * (1 + eps), hi = n_core * (1 - eps);
    auto f = [&](double n) { return phase(n, m); };
    if (f(lo) <= 0) break;  // below cutoff
    out.push_back(bisect(f, lo, hi));
  }
  return out;
}

// TE modes of the asymmetric slab n_sub / n_core (d) / n_cov with
// n_sub >= n_cov:  kappa d = m pi + atan(g_sub / kappa) + atan(g_cov / kappa).
inline std::vector<double> asymmetric_slab_te(double n_sub, double n_core, double n_cov, double d_um, double wl_um) {
  const double k0 = 2.0 * std::numbers::pi / wl_um;
  std::vector<double> out;
  for (int m = 0;; ++m) {
    auto f = [&](double n) {
      const double kappa = k0 * std::sqrt(n_core * n_core - n * n);
      const double gs = k0 * std::sqrt(n * n - n_sub * n_sub);
      const double gc = k0 * std::sqrt(n * n - n_cov * n_cov);
      return kappa * d_um - m * std::numbers::pi - std::atan(gs / kappa) - std::atan(gc / kappa);
    };
    const double lo = n_sub * (1 + 1e-15), hi = n_core * (1 - 1e-15);
    if (f(lo) <= 0) break;
    out.push_back(bisect(f, lo, hi));
  }
  return out;
}

// Fraction of TE power inside the core for the even symmetric-slab mode n.
inline double symmetric_core_fraction_te(double n_clad, double n_core, double d_um, double wl_um, double n) {
  const double k0 = 2.0 * std::numbers::pi / wl_um;
  const double kappa = k0 * std::sqrt(n_core * n_core - n * n);
  const double gamma = k0 * std::sqrt(n * n - n_clad * n_clad);
  const double core = d_um / 2.0 + std::sin(kappa * d_um) / (2.0 * kappa);
  const double c = std::cos(kappa * d_um / 2.0);
  const double clad = c * c / gamma;
  return core / (core + clad);
}

inline double poisson_pmf(int k, double mu) {
  double p = std::exp(-mu);
  for (int i = 1; i <= k; ++i) p *= mu / i;
  return p;
}

}  // namespace oracle
