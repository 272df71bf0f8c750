#include <doctest.h>

#include <cmath>
#include <random>

#include "evtes/calibration.hpp"

using namespace evtes;

namespace {

// Root in (0,1) of eta^2 + K eta - K = 0 by Newton from eta = 1.
double quadratic_root(double K) {
  double x = 1.0;
  for (int i = 0; i < 100; ++i) x -= (x * x + K * x - K) / (2.0 * x + K);
  return x;
}

CalibrationMeasurement synthetic(double eta_A, double eta_B, double eta_tes, double r_int) {
  CalibrationMeasurement m;
  m.gamma = 1.0;
  const double T = forward_transmission(eta_A, eta_B, eta_tes, r_int);
  m.T_AB = {T, 0.0};
  m.T_BA = {T, 0.0};
  m.eta_prime_A = {system_efficiency(eta_A, eta_tes, r_int), 0.0};
  m.eta_prime_B = {system_efficiency(eta_B, eta_tes, r_int), 0.0};
  m.eta_switch.u = 0.0;
  m.rel_power.u = 0.0;
  m.r_int = r_int;
  return m;
}

CalibrationMeasurement table_inputs(double r_int) {
  CalibrationMeasurement m;
  m.gamma = 1.0;
  m.T_AB = m.T_BA = {0.177, 0.004};
  m.eta_prime_A = {0.029, 0.002};
  m.eta_prime_B = {0.035, 0.002};
  m.r_int = r_int;
  return m;
}

}  // namespace

TEST_CASE("power correction and forward model") {
  CHECK(corrected_input_power(1e-3, 0.917, 0.036) == doctest::Approx(0.9512e-3).epsilon(1e-4));
  CHECK(corrected_input_power(2.5, 1.0, 0.0) == 2.5);
  CHECK(corrected_input_power(0.0, 0.9, 0.1) == 0.0);
  CHECK_THROWS(corrected_input_power(1.0, 0.9, 1.0));

  CHECK(forward_transmission(1, 1, 0.5, 0) == 0.5);
  CHECK(std::abs(forward_transmission(0.398, 0.479, 0.072, 0.0003) - 0.1769) < 0.001);
  CHECK(forward_transmission(0.4, 0.5, 1.0, 0.01) == 0.0);

  CHECK(system_efficiency(0.398, 0.072, 0.0003) == doctest::Approx(0.02865).epsilon(1e-3));
  CHECK(system_efficiency(0.479, 0.072, 0.0003) == doctest::Approx(0.03448).epsilon(1e-3));
  CHECK(system_efficiency(1, 1, 0) == 1.0);
}

TEST_CASE("closed-form detector efficiency") {
  for (double K : {1e-6, 1e-3, 0.0057, 0.5, 2.0, 50.0, 1e6}) {
    CHECK(eta_tes_from_K(K) == doctest::Approx(quadratic_root(K)).epsilon(1e-14));
    CHECK(eta_tes_from_K(K) == doctest::Approx(0.5 * (std::sqrt(K * (K + 4)) - K)).epsilon(1e-9));
  }
  CHECK(eta_tes_from_K(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  double prev = 0.0;
  for (double K = 1e-4; K < 100; K *= 1.3) {
    const double e = eta_tes_from_K(K);
    CHECK(e > prev);
    CHECK(e < 1.0);
    prev = e;
  }
  CHECK_THROWS_AS(eta_tes_from_K(0.0), InconsistentMeasurementError);
  CHECK_THROWS_AS(eta_tes_from_K(-1.0), InconsistentMeasurementError);
}

TEST_CASE("efficiency extraction on the measured inputs") {
  const auto a = extract_efficiencies(table_inputs(0.0003));
  CHECK(std::abs(a.eta_tes.value - 0.072) <= 0.002);
  CHECK(std::abs(a.eta_A.value - 0.398) <= 0.01);
  CHECK(std::abs(a.eta_B.value - 0.479) <= 0.01);
  const auto b = extract_efficiencies(table_inputs(0.01));
  CHECK(std::abs(b.eta_tes.value - 0.073) <= 0.002);
  CHECK(std::abs(b.eta_tes.value - a.eta_tes.value) < 0.002);
  CHECK(a.K == doctest::Approx(0.029 * 0.035 / (0.177 * (1 - 0.0003))));
}

TEST_CASE("symmetric synthetic round trip is exact") {
  const auto r = extract_efficiencies(synthetic(1.0 - 1e-16, 1.0 - 1e-16, 0.5, 0.0));
  CHECK(r.K == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.eta_tes.value == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.eta_A.value == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("round trip over random inputs") {
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0), ut(0.001, 0.999);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double a = u(g), b = u(g), t = ut(g), r = u(g);
    if (a == 0.0 || b == 0.0) continue;
    const auto res = extract_efficiencies(synthetic(a, b, t, r));
    worst = std::max({worst, std::abs(res.eta_tes.value / t - 1), std::abs(res.eta_A.value / a - 1),
                      std::abs(res.eta_B.value / b - 1)});
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("Monte-Carlo uncertainty propagation") {
  SUBCASE("measured inputs") {
    const auto r = propagate_uncertainty(table_inputs(0.0003));
    CHECK(r.method == UncertaintyMethod::MonteCarlo);
    CHECK(r.eta_tes.u_stat >= 0.003);
    CHECK(r.eta_tes.u_stat <= 0.006);
    CHECK(r.eta_tes.u_syst < 0.002);
    CHECK(r.inconsistent_fraction == 0.0);
    // First-order propagation agrees with the sampled spread.
    CHECK(r.eta_tes.u_stat == doctest::Approx(extract_efficiencies(table_inputs(0.0003)).eta_tes.u_stat).epsilon(0.05));
  }
  SUBCASE("zero input uncertainty") {
    auto m = synthetic(0.4, 0.48, 0.072, 0.0003);
    const auto r = propagate_uncertainty(m);
    CHECK(r.eta_tes.u_stat < 1e-12);
    CHECK(r.eta_A.u_stat < 1e-12);
  }
  SUBCASE("doubling every sigma doubles the output") {
    auto m = table_inputs(0.0003);
    const double u1 = propagate_uncertainty(m).eta_tes.u_stat;
    for (auto* q : {&m.T_AB, &m.T_BA, &m.eta_prime_A, &m.eta_prime_B, &m.eta_switch, &m.rel_power}) q->u *= 2;
    const double u2 = propagate_uncertainty(m).eta_tes.u_stat;
    CHECK(u2 / u1 == doctest::Approx(2.0).epsilon(0.1));
  }
  SUBCASE("coverage factor halves 2-sigma quotes") {
    auto m = table_inputs(0.0003);
    const double u1 = propagate_uncertainty(m).eta_tes.u_stat;
    for (auto* q : {&m.T_AB, &m.T_BA, &m.eta_prime_A, &m.eta_prime_B, &m.eta_switch, &m.rel_power}) q->coverage *= 2;
    CHECK(propagate_uncertainty(m).eta_tes.u_stat == doctest::Approx(u1 / 2).epsilon(0.1));
  }
  SUBCASE("deterministic under a fixed seed") {
    CHECK(propagate_uncertainty(table_inputs(0.0003)).eta_tes.u_stat ==
          propagate_uncertainty(table_inputs(0.0003)).eta_tes.u_stat);
  }
  SUBCASE("too few samples") {
    UncertaintyOptions o;
    o.samples = 100;
    CHECK_THROWS_AS(propagate_uncertainty(table_inputs(0.0003), o), std::invalid_argument);
  }
  SUBCASE("too many inconsistent samples are an error") {
    auto m = table_inputs(0.0003);
    m.eta_prime_A = {0.16, 0.002};  // central eta_A = 0.98, samples often exceed 1
    CHECK_NOTHROW(extract_efficiencies(m));
    CHECK_THROWS_AS(propagate_uncertainty(m), InconsistentMeasurementError);
  }
}

TEST_CASE("inconsistent and invalid measurements") {
  auto m = table_inputs(0.0003);
  m.eta_prime_A = {0.3, 0.002};  // above the transmission
  CHECK_THROWS_AS(extract_efficiencies(m), InconsistentMeasurementError);
  m = table_inputs(0.0003);
  m.T_AB.value = 1.2;
  CHECK_THROWS_AS(extract_efficiencies(m), std::invalid_argument);
  m = table_inputs(0.0003);
  m.eta_prime_B.u = -0.1;
  CHECK_THROWS_AS(extract_efficiencies(m), std::invalid_argument);
}

TEST_CASE("throughput symmetry check") {
  CHECK(throughput_check(0.1774, 0.1765, 0.005));
  CHECK_FALSE(throughput_check(0.20, 0.10, 0.005));
  CHECK(throughput_check(0.3, 0.3, 0.0));
  auto m = table_inputs(0.0003);
  m.T_AB.value = 0.25;
  m.eta_prime_A.value = 0.02;
  CHECK(extract_efficiencies(m).throughput_asymmetric);
}

TEST_CASE("measurement file round trip and reports") {
  CalibrationMeasurement m;
  const auto back = CalibrationMeasurement::from_ini(IniDocument::parse(m.to_ini().to_string()));
  CHECK(back.T_AB.value == m.T_AB.value);
  CHECK(back.rel_power.coverage == 2.0);
  CHECK(back.eta_prime_B.u == m.eta_prime_B.u);
  CHECK_THROWS_AS(CalibrationMeasurement::from_ini(IniDocument::parse("[measurement]\nT_AB = 0.1\nbogus = 1\n")),
                  ConfigError);
  CHECK_THROWS_AS(CalibrationMeasurement::from_ini(IniDocument::parse("[other]\n")), ConfigError);
  CHECK_THROWS_AS(CalibrationMeasurement::from_ini(IniDocument::parse("[measurement]\neta_prime_A = 1.5\n")),
                  ConfigError);

  const auto r = propagate_uncertainty(m);
  const auto csv = calibration_csv(r);
  CHECK(csv.rfind("quantity,value,u_stat,u_syst\n", 0) == 0);
  CHECK(csv.find("eta_tes,") != std::string::npos);
  auto m2 = m;
  m2.r_int = 0.01;
  const auto table = format_efficiency_table({r, propagate_uncertainty(m2)});
  CHECK(table.find("0.03 %") != std::string::npos);
  CHECK(table.find("1.00 %") != std::string::npos);
  CHECK(polarization_efficiency(0.986, 28.5) == doctest::Approx(0.0346).epsilon(1e-3));
  CHECK_THROWS(polarization_efficiency(30.0, 28.5));
}
