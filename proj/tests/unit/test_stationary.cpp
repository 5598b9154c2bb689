#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "bpl/errors.hpp"
#include "bpl/stationary.hpp"
#include "doctest.h"

using namespace bpl;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
const double kB1 = -1.0 - 0.5 * std::log(kTwoPi);  // B(1) for the exp pack, D = 1

double periodic_quad(const std::function<double(double)>& f, int n = 1 << 14) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f((i + 0.5) / n);
  return s / n;
}

double sup_diff(const DensityField& a, const DensityField& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

DensityField random_smooth(std::mt19937_64& rng, const TorusGrid& g) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a[3], b[3];
  for (int k = 0; k < 3; ++k) {
    a[k] = 0.3 * u(rng) / (k + 1);
    b[k] = 0.3 * u(rng) / (k + 1);
  }
  return density_from_function(g, [=](double x) {
    double s = 1.0;
    for (int k = 0; k < 3; ++k) s += a[k] * std::cos(kTwoPi * (k + 1) * x) + b[k] * std::sin(kTwoPi * (k + 1) * x);
    return s;
  });
}

const KineticsPack& exp_pack() {
  static const KineticsPack p = KineticsPack::exponential(1);
  return p;
}

}  // namespace

TEST_CASE("energy_E: closed forms and a quadrature oracle") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 256);
  CHECK(energy_E(uniform_density(g), Potential::zero(), pack) == doctest::Approx(kB1).epsilon(1e-14));
  CHECK(kB1 == doctest::Approx(-1.9189385).epsilon(1e-7));

  // V enters linearly: E(ρ; V) − E(ρ; 0) = ∫Vρ.
  const double eps = 0.4;
  const auto rho = density_from_function(g, [=](double x) { return 1.0 + eps * std::cos(kTwoPi * x); });
  const auto V = Potential::cosine(0.7, 2);
  double pot = 0.0;
  for (int i = 0; i < g.n(); ++i) pot += V.value(g.center(i)) * rho[i] * g.h();
  CHECK(energy_E(rho, V, pack) - energy_E(rho, Potential::zero(), pack) == doctest::Approx(pot).epsilon(1e-13));

  // ½∫|(√ρ)'|² + ∫Vρ + ∫B(ρ) for ρ = 1 + ε cos, V = 0.5 cos.
  const auto V1 = Potential::cosine(0.5);
  const double C = std::sqrt(kTwoPi);
  const double exact = periodic_quad([=](double x) {
    const double r = 1.0 + eps * std::cos(kTwoPi * x), dr = -eps * kTwoPi * std::sin(kTwoPi * x);
    return dr * dr / (8.0 * r) + 0.5 * std::cos(kTwoPi * x) * r + r * std::log(r / C) - r;
  });
  CHECK(std::abs(energy_E(rho, V1, pack) - exact) <= 1e-5);
}

TEST_CASE("minimize_E: V = 0 gives the uniform state") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 256);
  std::mt19937_64 rng(3);
  StationaryOptions opt;
  opt.initial = random_smooth(rng, g);
  const auto r = minimize_E(Potential::zero(), pack, g, opt);
  CHECK(r.iterations > 0);
  CHECK(sup_diff(r.rho_s, uniform_density(g)) <= 1e-8);
  CHECK(std::abs(r.eta_s + 0.5 * std::log(kTwoPi)) <= 1e-8);
  CHECK(r.energy == doctest::Approx(kB1).epsilon(1e-10));
}

TEST_CASE("minimize_E: cosine potential") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 256);
  const auto V = Potential::cosine(0.5);
  const auto r = minimize_E(V, pack, g);
  CHECK(r.residual_norm <= 1e-6);
  CHECK(r.energy < energy_E(uniform_density(g), V, pack));
  // Mass collects at the minimum of V (x = ½) and leaves its maximum (x = 0).
  CHECK(r.rho_s[g.n() / 2] > 1.0);
  CHECK(r.rho_s[0] < 1.0);
  CHECK(std::abs(r.rho_s.mass() - 1.0) <= 1e-13);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2; ++trial) {
    StationaryOptions opt;
    opt.initial = random_smooth(rng, g);
    const auto s = minimize_E(V, pack, g, opt);
    CHECK(sup_diff(s.rho_s, r.rho_s) <= 1e-6);
    CHECK(s.energy_trace.size() == std::size_t(s.iterations) + 1);
    for (std::size_t i = 1; i < s.energy_trace.size(); ++i) CHECK(s.energy_trace[i] <= s.energy_trace[i - 1]);
    CHECK(s.v_moment_max <= s.v_moment_bound);
  }
}

TEST_CASE("minimize_E: iterate moment bound on a stiff potential") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 128);
  std::mt19937_64 rng(5);
  StationaryOptions opt;
  opt.initial = random_smooth(rng, g);
  const auto r = minimize_E(Potential::cosine(3.0, 2), pack, g, opt);
  CHECK(r.residual_norm <= 1e-6);
  CHECK(r.v_moment_max <= r.v_moment_bound);
  for (std::size_t i = 1; i < r.energy_trace.size(); ++i) CHECK(r.energy_trace[i] <= r.energy_trace[i - 1]);
}

TEST_CASE("minimize_E: 2D grid reproduces the 1D minimizer") {
  // V depends on the first axis only, so the 2D minimizer is the 1D one extended constantly.
  const auto& pack = exp_pack();
  const auto V = Potential::cosine(0.5);
  TorusGrid g1(1, 32), g2(2, 32);
  const auto r1 = minimize_E(V, pack, g1);
  std::mt19937_64 rng(8);
  std::vector<double> init(g2.cells());
  std::uniform_real_distribution<double> u(0.9, 1.1);
  for (double& x : init) x = u(rng);
  StationaryOptions opt;
  opt.initial = normalize(init, g2);
  const auto r2 = minimize_E(V, pack, g2, opt);
  double d = 0.0;
  for (int a = 0; a < 32; ++a)
    for (int b = 0; b < 32; ++b) d = std::max(d, std::abs(r2.rho_s[a * 32 + b] - r1.rho_s[a]));
  CHECK(d <= 1e-6);
  CHECK(r2.energy == doctest::Approx(r1.energy).epsilon(1e-8));
}

TEST_CASE("minimize_E: errors") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 64);
  StationaryOptions opt;
  std::vector<double> bad(64, 1.0);
  bad[10] = 0.0;
  bad[11] = 2.0;
  opt.initial = DensityField(g, bad);
  CHECK_THROWS_AS(minimize_E(Potential::cosine(0.5), pack, g, opt), Error);
  try {
    minimize_E(Potential::cosine(0.5), pack, g, opt);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonpositiveDensity);
  }
  StationaryOptions few;
  few.max_iterations = 1;
  few.tol = 1e-14;
  std::mt19937_64 rng(2);
  few.initial = random_smooth(rng, g);
  try {
    minimize_E(Potential::cosine(0.5), pack, g, few);
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoConvergence);
  }
}

TEST_CASE("el_residual") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 256);
  const auto uni = el_residual(uniform_density(g), Potential::zero(), pack);
  for (double r : uni.field) CHECK(std::abs(r) <= 1e-9);
  CHECK(uni.eta == doctest::Approx(-0.5 * std::log(kTwoPi)).epsilon(1e-14));

  const auto V = Potential::cosine(0.5);
  const auto s = minimize_E(V, pack, g);
  const auto el = el_residual(s.rho_s, V, pack);
  CHECK(el.dual_norm <= 1e-6);
  CHECK(std::abs(el.eta - el.eta_weak) <= 1e-8);
  CHECK(el.eta == doctest::Approx(el.l0sq / 2 + el.l1).epsilon(1e-15));

  std::vector<double> p(g.cells());
  for (int i = 0; i < g.n(); ++i) p[i] = s.rho_s[i] * (1.0 + 0.01 * std::cos(kTwoPi * g.center(i)));
  const auto pert = el_residual(normalize(p, g), V, pack);
  CHECK(pert.dual_norm > el.dual_norm + 1e-4);
}

TEST_CASE("fixed_point_solve: uniform and cross-method agreement") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 256);
  const auto u = fixed_point_solve(Potential::zero(), pack, g);
  CHECK(sup_diff(u.rho_s, uniform_density(g)) == 0.0);
  CHECK(u.eta_s == doctest::Approx(pack.b_of(1.0)).epsilon(1e-14));

  const auto V = Potential::cosine(0.5);
  const auto m = minimize_E(V, pack, g);
  for (double w : {0.3, 1.0}) {
    StationaryOptions opt;
    opt.omega = w;
    const auto f = fixed_point_solve(V, pack, g, opt);
    MESSAGE("self-consistent, omega = " << w << ": " << f.iterations << " iterations");
    CHECK(f.last_change <= 1e-9);
    CHECK(sup_diff(f.rho_s, m.rho_s) <= 1e-5);
    // The multiplier from the eigenproblem against the one from the residual of the other solver.
    CHECK(std::abs(f.eta_s - m.eta_s) <= 1e-8);
  }
}

TEST_CASE("fixed_point_solve: the explicit update is stiff") {
  // Mode λ of DᵀD is multiplied by 1 − ω(1 + λ/4) near the fixed point, so the explicit update
  // needs ω ≲ 8/λ_max. Both ω = 0.3 and ω = 1 blow up at n = 256.
  const auto& pack = exp_pack();
  const auto V = Potential::cosine(0.5);
  TorusGrid g(1, 256);
  for (double w : {0.3, 1.0}) {
    StationaryOptions opt;
    opt.scheme = FixedPointScheme::Explicit;
    opt.omega = w;
    opt.max_iterations = 200;
    CHECK_THROWS_AS(fixed_point_solve(V, pack, g, opt), Error);
  }

  // Below the stability limit it reaches the same fixed point.
  TorusGrid small(1, 16);
  StationaryOptions opt;
  opt.scheme = FixedPointScheme::Explicit;
  opt.omega = 0.01;
  const auto f = fixed_point_solve(V, pack, small, opt);
  MESSAGE("explicit, n = 16, omega = 0.01: " << f.iterations << " iterations");
  const auto m = minimize_E(V, pack, small);
  CHECK(sup_diff(f.rho_s, m.rho_s) <= 1e-6);
}

TEST_CASE("legendre_check") {
  const auto& pack = exp_pack();
  TorusGrid g(1, 256);
  const auto z = minimize_E(Potential::zero(), pack, g);
  const auto rz = legendre_check(z, Potential::zero(), pack);
  CHECK(rz.passed);
  CHECK(rz.g_star == doctest::Approx(-kB1).epsilon(1e-12));
  CHECK(rz.min_energy == doctest::Approx(kB1).epsilon(1e-12));

  const auto V = Potential::cosine(0.5);
  const auto s = minimize_E(V, pack, g);
  const auto rs = legendre_check(s, V, pack);
  CHECK(rs.passed);
  CHECK(rs.candidates >= 22);
  CHECK(std::abs(rs.g_star + rs.min_energy) <= 1e-8);

  StationaryOptions loose;
  loose.tol = 1e-2;
  const auto t = minimize_E(V, pack, g, loose);
  CHECK(t.residual_norm > 1e-6);
  const auto rt = evaluate_legendre(t, V, pack);
  CHECK_FALSE(rt.passed);
  try {
    legendre_check(t, V, pack);
    FAIL("expected PropertyViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PropertyViolation);
  }
}
