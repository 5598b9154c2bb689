// Acceptance suite: one PASS/FAIL line per criterion, written to stdout and to acceptance_report.txt.
// Exits 0 once every criterion has been evaluated; the verdicts are in the report, not the exit code.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bpl/diagnostics.hpp"
#include "bpl/errors.hpp"
#include "bpl/flow.hpp"
#include "bpl/kinetics_pack.hpp"
#include "bpl/prox.hpp"
#include "bpl/stationary.hpp"
#include "bpl/transport.hpp"
#include "oracles.hpp"
#include "test_packs.hpp"

using namespace bpl;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

struct Verdict {
  bool pass = true;
  std::string detail;

  // Records one sub-check; the first failing one is named in the detail.
  void expect(bool ok, const std::string& what) {
    if (!ok && pass) failed = what;
    pass = pass && ok;
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
  std::string failed;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double sup_diff(const DensityField& a, const DensityField& b) {
  double d = 0.0;
  for (int i = 0; i < a.grid().n(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

DensityField cosine(const TorusGrid& g, double eps) {
  return density_from_function(g, [=](double x) { return 1.0 + eps * std::cos(kTwoPi * x); });
}

// Bump on a floor plus a shifted sine: positive, with mass spread unevenly.
DensityField random_density(std::mt19937_64& rng, const TorusGrid& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double c = u(rng), floor = 0.05 * u(rng), amp = u(rng), w = 0.03 + 0.1 * u(rng), ph = u(rng);
  return density_from_function(g, [=](double x) {
    const double d = std::remainder(x - c, 1.0);
    return floor + std::exp(-0.5 * d * d / (w * w)) + amp * (1.0 + std::sin(kTwoPi * (x + ph)));
  });
}

// Three low modes with decaying random amplitudes around 1.
DensityField random_smooth(std::mt19937_64& rng, const TorusGrid& g) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a[3], b[3];
  for (int k = 0; k < 3; ++k) {
    a[k] = 0.25 * u(rng) / (k + 1);
    b[k] = 0.25 * u(rng) / (k + 1);
  }
  return density_from_function(g, [=](double x) {
    double s = 1.0;
    for (int k = 0; k < 3; ++k) s += a[k] * std::cos(kTwoPi * (k + 1) * x) + b[k] * std::sin(kTwoPi * (k + 1) * x);
    return s;
  });
}

Verdict kinetics() {
  Verdict v;
  const auto lattice = ValidationLattice::standard();
  for (const auto& pack : {KineticsPack::exponential(1), testing::fermi_dirac_pack()}) {
    const auto rep = evaluate_pack(pack, lattice);
    std::string first;
    for (const auto& c : rep.checks)
      if (!c.passed && first.empty()) first = c.name + " at " + fmt(c.witness);
    v.expect(rep.all_passed(), pack.name() + ": " + first);
    double worst = 0.0;
    for (int i = 0; i <= 600; ++i) {
      const double s = std::pow(10.0, -3.0 + 6.0 * i / 600);
      worst = std::max(worst, std::abs(pack.a_of(-pack.b_of(s)) - s) / s);
    }
    v.expect(worst <= 1e-9, pack.name() + " round trip " + fmt(worst));
    v.note(pack.name() + ": " + std::to_string(rep.checks.size()) + " checks, round trip " + fmt(worst));
  }
  return v;
}

Verdict stationary() {
  Verdict v;
  const auto pack = KineticsPack::exponential(1);
  const TorusGrid g(1, 256);

  const auto z = minimize_E(Potential::zero(), pack, g);
  const double uni = sup_diff(z.rho_s, uniform_density(g));
  const double eta = std::abs(z.eta_s + 0.5 * std::log(kTwoPi));
  v.expect(uni <= 1e-8, "V = 0 not uniform");
  v.expect(eta <= 1e-8, "V = 0 eta");
  v.expect(evaluate_legendre(z, Potential::zero(), pack).passed, "V = 0 Legendre");
  v.note("V=0: uniform " + fmt(uni) + ", eta " + fmt(eta));

  const auto V = Potential::cosine(0.5);
  const auto m = minimize_E(V, pack, g);
  const auto f = fixed_point_solve(V, pack, g);
  const double residual = el_residual(m.rho_s, V, pack).dual_norm;
  const double agree = sup_diff(m.rho_s, f.rho_s);
  const auto leg = evaluate_legendre(m, V, pack);
  v.expect(residual <= 1e-6, "EL residual");
  v.expect(agree <= 1e-5, "minimize/fixed-point agreement");
  v.expect(leg.passed, "Legendre (" + leg.best_candidate + ")");
  v.note("V=0.5cos: residual " + fmt(residual) + ", agreement " + fmt(agree) + ", Legendre excess " +
         fmt(leg.worst_excess));
  return v;
}

Verdict transport() {
  Verdict v;
  std::mt19937_64 rng(5);
  const TorusGrid g(1, 64);
  const double ts[] = {0.0, 0.25, 0.5, 1.0};
  double tri = -1e300, speed = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto a = random_density(rng, g), b = random_density(rng, g), c = random_density(rng, g);
    for (auto mode : {TransportMode::Interval, TransportMode::Torus}) {
      const double ab = w2_1d(a, b, mode).distance, bc = w2_1d(b, c, mode).distance;
      const double ac = w2_1d(a, c, mode).distance;
      tri = std::max(tri, ac - ab - bc);
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
          const auto qi = ts[i] == 0.0 ? PiecewiseQuantile::from_density(a) : geodesic_quantile(a, b, ts[i], mode);
          const auto qj = ts[j] == 1.0 ? PiecewiseQuantile::from_density(b) : geodesic_quantile(a, b, ts[j], mode);
          const double d = w2_quantile(qi, qj, mode).distance;
          speed = std::max(speed, std::abs(d - (ts[j] - ts[i]) * ab) / ab);
        }
    }
  }
  v.expect(tri <= 1e-8, "triangle inequality");
  v.expect(speed <= 1e-6, "geodesic constant speed");

  const TorusGrid g32(1, 32);
  double lp = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto a = random_density(rng, g32), b = random_density(rng, g32);
    lp = std::max(lp, std::abs(w2_1d(a, b, TransportMode::Torus).distance - testing::lp_circle_distance(a, b)));
  }
  v.expect(lp <= 2.0 * g32.h(), "torus vs LP");

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  double gap = 0.0, margin = 1e300;
  bool diagonal = true;
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<double> pos;
    for (int i = 0; i < 5; ++i) pos.push_back(u(rng));
    std::vector<PhaseAtom> mu;
    double s = 0.0;
    for (int a = 0; a < 12; ++a) {
      mu.push_back({{pos[a % 5]}, {nd(rng)}, u(rng) + 0.05});
      s += mu.back().w;
    }
    for (auto& a : mu) a.w /= s;
    WeightedPoints eta;
    double se = 0.0;
    for (int j = 0; j < 3; ++j) {
      eta.points.push_back({u(rng)});
      eta.weights.push_back(u(rng) + 0.1);
      se += eta.weights.back();
    }
    for (double& w : eta.weights) w /= se;
    const auto base = w2_discrete(position_marginal(mu), eta);
    const auto lp_plan = lift_plan(mu, base.plan);
    const auto chk = verify_lift(mu, lp_plan, base.plan);
    diagonal = diagonal && chk.supported_on_diagonal;
    gap = std::max(gap, std::abs(chk.w2_lift - base.distance));
    // Competitors: any m with position marginal η, velocities drawn at random.
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<PhaseAtom> m;
      for (int j = 0; j < 3; ++j) {
        const int k = 1 + int(u(rng) * 4);
        std::vector<double> split(k);
        double tot = 0.0;
        for (double& x : split) tot += (x = u(rng) + 0.01);
        for (int q = 0; q < k; ++q) m.push_back({eta.points[j], {2.0 * nd(rng)}, eta.weights[j] * split[q] / tot});
      }
      margin = std::min(margin, w2_discrete(phase_points(mu), phase_points(m)).distance - base.distance);
    }
  }
  v.expect(diagonal && gap <= 1e-10, "lift equality");
  v.expect(margin >= -1e-10, "lift lower bound");
  v.note("triangle excess " + fmt(tri) + ", speed " + fmt(speed) + ", LP gap " + fmt(lp) + " (2h " +
         fmt(2.0 * g32.h()) + "), lift gap " + fmt(gap) + ", lift margin " + fmt(margin));
  return v;
}

double drift_error(const TorusGrid& g, double tau, const std::vector<double>& rhs) {
  const auto rho = cosine(g, 0.5);
  const auto r = prox(rho, tau);
  double e = 0.0;
  for (int i = 0; i < g.n(); ++i) {
    const double d = (r.rho_tau[i] - rho[i]) / tau - rhs[i];
    e += d * d * g.h();
  }
  return std::sqrt(e);
}

Verdict moreau_yosida() {
  Verdict v;
  const TorusGrid g(1, 64);
  std::mt19937_64 rng(2024);
  double env_err = 0.0, slope_err = 0.0;
  int violations = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const auto a = random_smooth(rng, g), b = random_smooth(rng, g);
    for (double tau : {0.01, 0.1, 1.0}) {
      if (!evaluate_envelope(a, b, tau).all_passed()) ++violations;
      const auto r = prox(a, tau);
      // Both identities recomputed from the paired particles.
      const auto& P = r.source_particles.q;
      const auto& q = r.particles.q;
      const double m = double(P.size());
      double w2 = 0.0, slope = 0.0;
      for (std::size_t k = 0; k < P.size(); ++k) {
        w2 += (P[k] - q[k]) * (P[k] - q[k]) / m;
        slope += r.grad_particles[k] * r.grad_particles[k] / m;
      }
      const double env = particle_fisher(r.particles) + w2 / (2.0 * tau);
      env_err = std::max(env_err, std::abs(env - r.envelope) / std::abs(r.envelope));
      slope_err = std::max(slope_err, std::abs(slope * tau * tau - w2) / w2);
    }
  }
  v.expect(env_err <= 1e-8, "envelope identity");
  v.expect(slope_err <= 1e-8, "slope identity");
  v.expect(violations == 0, "envelope property checks");

  // d/ds φ_τ((id + s∇U)_# ρ) at s = 0 against ∫⟨∇φ_τ, ∇U⟩ dρ.
  const auto rho = cosine(g, 0.5);
  double fd_err = 0.0;
  for (double tau : {1e-2, 1e-1}) {
    const auto r = prox(rho, tau);
    const auto& P = r.source_particles;
    auto dU = [](double x) { return std::sin(kTwoPi * x + 0.3); };
    double pairing = 0.0;
    for (std::size_t k = 0; k < P.m(); ++k) pairing += r.grad_particles[k] * dU(P.q[k]) / double(P.m());
    auto env = [&](double s) {
      Quantile1D Ps = P;
      for (auto& x : Ps.q) x += s * dU(x);
      return prox_particles(Ps, tau).envelope;
    };
    const double s = 1e-4;
    fd_err = std::max(fd_err, std::abs((env(s) - env(-s)) / (2.0 * s) - pairing) / std::abs(pairing));
  }
  v.expect(fd_err <= 1e-3, "gradient vs finite differences");

  const TorusGrid fine(1, 256);
  const auto rhs = testing::drift_rhs_oracle(fine, 0.5);
  const double ratio = drift_error(fine, 5e-5, rhs) / drift_error(fine, 1e-4, rhs);
  const double ratio_small = drift_error(fine, 5e-7, rhs) / drift_error(fine, 1e-6, rhs);
  v.expect(ratio >= 0.3 && ratio <= 0.7, "JKO order ratio " + fmt(ratio) + " at tau = 1e-4");
  v.note("envelope " + fmt(env_err) + ", slope " + fmt(slope_err) + ", property violations " +
         std::to_string(violations) + "/60, FD " + fmt(fd_err) + ", JKO ratio " + fmt(ratio) +
         " at tau=1e-4 (" + fmt(ratio_small) + " at tau=1e-6)");
  return v;
}

Verdict flow() {
  Verdict v;
  {
    FlowConfig c;
    c.n_x = c.n_v = 64;
    auto mu = initial_state(c);
    const auto next = step(mu, c.dt, c.tau, Potential::zero());
    double d = 0.0;
    for (std::size_t i = 0; i < mu.values().size(); ++i) d = std::max(d, std::abs(next.values()[i] - mu.values()[i]));
    v.expect(d <= 1e-14, "stationarity");
    v.note("stationary change " + fmt(d));
  }
  {
    // f(t, x, v) = f₀(x − vt, v) with V = 0 and no proximal force.
    double prev = 0.0;
    bool ok = true;
    std::string errs;
    for (int nx : {32, 64, 128}) {
      FlowConfig c;
      c.n_x = nx;
      c.n_v = 32;
      c.v_max = 8.0;
      c.bohm_enabled = false;
      c.initial.amplitude = 0.2;
      c.dt = 1e-3;
      auto mu = initial_state(c);
      const auto f0 = mu.values();
      const int steps = int(std::lround(c.t_end / c.dt));
      for (int k = 0; k < steps; ++k) mu = step(mu, c.dt, c.tau, c.potential, false);
      const auto& vb = mu.vbox();
      const auto gv = gaussian_profile(vb, 1.0);
      double err = 0.0;
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < c.n_v; ++j) {
          const double x = (i + 0.5) / nx - vb.center(j) * c.t_end;
          err += std::abs(mu.values()[std::size_t(i) * c.n_v + j] - (1.0 + 0.2 * std::cos(kTwoPi * x)) * gv[j]);
        }
      err *= mu.cell_volume();
      const double h = 1.0 / nx;
      ok = ok && err <= c.dt * c.dt + h * h && (prev == 0.0 || err < prev);
      errs += (errs.empty() ? "" : "/") + fmt(err);
      prev = err;
    }
    v.expect(ok, "free transport");
    v.note("free transport L1 " + errs);
  }
  FlowConfig c;
  c.n_x = c.n_v = 128;
  c.tau = 0.1;
  c.t_end = 0.25;
  c.initial.amplitude = 0.3;
  c.potential = Potential::cosine(0.5);
  double h_end[3], drift = 0.0, mass = 0.0;
  bool jensen = true;
  int idx = 0;
  for (double dt : {1e-3, 5e-4, 2.5e-4}) {
    c.dt = dt;
    c.record_every = int(std::lround(0.025 / dt));
    const auto tr = run(c);
    h_end[idx++] = tr.records.back().H_tau;
    if (dt == 5e-4) drift = tr.max_drift;
    for (const auto& r : tr.records) {
      mass = std::max(mass, std::abs(r.mass - 1.0));
      jensen = jensen && r.mean_kinetic <= tr.H_full0 + c.potential.sup_norm();
    }
  }
  const double ratio = (h_end[0] - h_end[1]) / (h_end[1] - h_end[2]);
  v.expect(drift <= 1e-3, "drift");
  v.expect(ratio >= 3.0 && ratio <= 5.0, "Richardson ratio " + fmt(ratio));
  v.expect(mass <= 1e-6, "mass");
  v.expect(jensen, "Jensen");
  v.note("drift " + fmt(drift) + " (dt=5e-4), Richardson ratio " + fmt(ratio) + ", mass " + fmt(mass));
  return v;
}

Verdict diagnostics() {
  Verdict v;
  FlowConfig base;
  base.initial.amplitude = 0.5;
  base.potential = Potential::cosine(0.5);
  base.record_every = 25;
  const auto rep = evaluate_tau_sweep(base, {0.3, 0.1, 0.03});
  bool identities = true, zero_tau = true;
  double worst_identity = 0.0, worst_zero = 0.0;
  for (const auto& m : rep.members) {
    const auto tr = check_trace(m.trace);
    identities = identities && tr.identities_hold && tr.energy_holds;
    zero_tau = zero_tau && tr.zero_tau_holds;
    for (const auto& r : tr.records) {
      worst_identity = std::max(worst_identity, r.identity_error);
      if (r.zero_tau.bound_rhs > 0.0) worst_zero = std::max(worst_zero, r.zero_tau.bound_lhs / r.zero_tau.bound_rhs);
    }
  }
  v.expect(identities, "identities");
  v.expect(zero_tau, "zero-tau bound");
  v.expect(rep.bounds_hold, "W2 bound");
  const double e = rep.fitted_exponent;
  v.expect(e >= 0.4 && e <= 0.6, "fitted exponent " + fmt(e));
  std::string sups;
  for (const auto& m : rep.members) sups += (sups.empty() ? "" : "/") + fmt(m.sup_w2);
  v.note("identity error " + fmt(worst_identity) + ", max zero-tau ratio " + fmt(worst_zero) + ", sup W2 " + sups +
         " on tau 0.3/0.1/0.03, exponent " + fmt(e));
  return v;
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  Verdict v;
#ifdef BPL_BINARY
  const fs::path dir = fs::temp_directory_path() / ("bpl_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> configs{
      {"stationary", R"({"mode":"stationary","potential":{"type":"cosine","amplitude":0.5},"grid":{"n":128}})"},
      {"prox", R"({"mode":"prox","grid":{"n":128},"tau":0.05})"},
      {"flow", R"({"mode":"flow","grid":{"n_x":32,"n_v":32,"v_max":8},"dt":1e-3,"t_end":0.05,
                   "potential":{"type":"cosine","amplitude":0.5},"initial":{"amplitude":0.3}})"},
      {"sweep", R"({"mode":"sweep","grid":{"n_x":32,"n_v":32,"v_max":8},"dt":1e-3,"t_end":0.05,
                    "initial":{"amplitude":0.3},"taus":[0.3,0.1,0.03]})"},
      {"validate", R"({"mode":"validate","pack":{"type":"exp","D":1}})"},
      {"liftcheck", R"({"mode":"liftcheck","instances":10})"}};
  int replayed = 0;
  for (const auto& [name, text] : configs) {
    const auto cfg = dir / (name + ".json");
    std::ofstream(cfg) << text;
    const auto out = dir / name;
    const std::string quiet = " > /dev/null 2>&1";
    const int run = shell(std::string(BPL_BINARY) + " run --config " + cfg.string() + " --out " + out.string() +
                          " --seed 7 --threads 2" + quiet);
    const int rep = shell(std::string(BPL_BINARY) + " replay " + (out / "manifest.json").string() + quiet);
    v.expect(run == 0, name + " run exit " + std::to_string(run));
    v.expect(rep == 0, name + " replay exit " + std::to_string(rep));
    if (run == 0 && rep == 0) ++replayed;
  }
  fs::remove_all(dir);
  v.note(std::to_string(replayed) + "/" + std::to_string(configs.size()) + " modes replay exactly");
#else
  v.expect(false, "built without the bpl tool");
#endif
  return v;
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "kinetics", 5.0, kinetics},       {2, "stationary", 30.0, stationary},
      {3, "transport", 60.0, transport},    {4, "moreau-yosida", 180.0, moreau_yosida},
      {5, "flow", 300.0, flow},             {6, "diagnostics", 600.0, diagnostics},
      {7, "determinism", 300.0, determinism}};
  std::ofstream report("acceptance_report.txt");
  int passed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.expect(false, std::string("threw ") + e.what());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.expect(wall <= c.budget_s, "runtime over " + fmt(c.budget_s) + " s");
    std::ostringstream line;
    line << (v.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << v.detail;
    if (!v.pass) line << " [failed: " << v.failed << "]";
    line << " (" << fmt(wall) << " s)";
    std::cout << line.str() << std::endl;
    report << line.str() << "\n";
    passed += v.pass;
  }
  const std::string summary =
      std::to_string(passed) + "/" + std::to_string(criteria.size()) + " acceptance criteria passed";
  std::cout << summary << std::endl;
  report << summary << "\n";
  return 0;
}
