#include "modes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "bpl/density_io.hpp"
#include "bpl/diagnostics.hpp"
#include "bpl/errors.hpp"
#include "bpl/transport.hpp"

namespace bpl::cli {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      os_ << (first ? "" : ",") << h;
      first = false;
    }
    os_ << '\n';
  }
  Csv& row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      os_ << (first ? "" : ",") << num(v);
      first = false;
    }
    os_ << '\n';
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

std::string density_csv(const DensityField& rho) {
  std::ostringstream os;
  write_density_csv(os, rho);
  return os.str();
}

std::string snapshot_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%06d.csv", step);
  return buf;
}

std::string trace_csv(const FlowTrace& tr) {
  Csv csv({"t", "mass", "H_tau", "kinetic", "potE", "phi_tau", "w2_prox", "slope_norm", "min_f", "max_f", "theta_m",
           "step", "fisher_prox", "mean_kinetic", "clamp_mass"});
  for (const auto& r : tr.records)
    csv.row({r.t, r.mass, r.H_tau, r.kinetic, r.potential, r.phi_tau, r.w2_prox, r.slope_norm, r.min_f, r.max_f,
             r.theta_moment, double(r.step), r.fisher_prox, r.mean_kinetic, r.clamp_mass});
  return csv.str();
}

json flow_config_json(const FlowConfig& c) {
  return {{"grid", {{"n_x", c.n_x}, {"n_v", c.n_v}, {"v_max", c.v_max}}},
          {"tau", c.tau},
          {"dt", c.dt},
          {"t_end", c.t_end},
          {"potential", potential_json(c.potential)},
          {"initial",
           {{"amplitude", c.initial.amplitude},
            {"frequency", c.initial.frequency},
            {"sigma", c.initial.sigma},
            {"mean", c.initial.mean}}},
          {"record_every", c.record_every},
          {"bohm_enabled", c.bohm_enabled},
          {"drift_bound", c.drift_bound}};
}

json flow_summary(const FlowTrace& tr) {
  double clamp = 0.0, min_f = 1e300, max_f = 0.0, jensen_slack = 1e300;
  const double cap = tr.H_full0 + tr.config.potential.sup_norm();
  for (const auto& r : tr.records) {
    clamp += r.clamp_mass;
    min_f = std::min(min_f, r.min_f);
    max_f = std::max(max_f, r.max_f);
    jensen_slack = std::min(jensen_slack, cap - r.mean_kinetic);
  }
  const auto& last = tr.records.back();
  return {{"records", tr.records.size()},
          {"H_full0", tr.H_full0},
          {"H_tau0", tr.records.front().H_tau},
          {"H_tau_final", last.H_tau},
          {"max_drift", tr.max_drift},
          {"mass_final", last.mass},
          {"mass_drift", std::abs(last.mass - 1.0)},
          {"clamp_mass_total", clamp},
          {"min_f_bulk", min_f},
          {"max_f_bulk", max_f},
          {"theta_final", last.theta_moment},
          {"jensen_min_slack", jensen_slack}};
}

Outcome stationary_mode(const Node& root) {
  root.only({"mode", "seed", "potential", "pack", "grid", "solver", "legendre", "cross_check"});
  const auto V = read_potential(root.child("potential"));
  const auto pack = read_pack(root.child("pack"));
  const auto grid = read_grid(root.child("grid"));
  const auto solver = root.child("solver");
  const auto opt = read_stationary_options(solver);
  const auto method = solver.text("method", "minimize");
  if (method != "minimize" && method != "fixed_point") solver.bad("method", "expected \"minimize\" or \"fixed_point\"");

  spdlog::info("stationary: {} on n = {}, d = {}", method, grid.n(), grid.d());
  const auto res = method == "minimize" ? minimize_E(V, pack, grid, opt) : fixed_point_solve(V, pack, grid, opt);
  Outcome out;
  out.result = {{"mode", "stationary"},
                {"method", res.method},
                {"eta_s", res.eta_s},
                {"energy", res.energy},
                {"residual_norm", res.residual_norm},
                {"iterations", res.iterations},
                {"l0sq", res.l0sq},
                {"l1", res.l1},
                {"v_moment_max", res.v_moment_max},
                {"v_moment_bound", res.v_moment_bound}};

  if (root.flag("cross_check", false)) {
    auto other_opt = opt;
    const auto other = method == "minimize" ? fixed_point_solve(V, pack, grid, other_opt) : minimize_E(V, pack, grid);
    double diff = 0.0;
    for (std::size_t i = 0; i < res.rho_s.size(); ++i)
      diff = std::max(diff, std::abs(res.rho_s[i] - other.rho_s[i]));
    out.result["cross_check"] = {{"method", other.method}, {"sup_diff", diff}, {"eta_diff", std::abs(res.eta_s - other.eta_s)}};
  }
  if (root.flag("legendre", true)) {
    const auto lg = evaluate_legendre(res, V, pack);
    out.result["legendre"] = {{"passed", lg.passed},         {"min_energy", lg.min_energy},
                              {"g_star", lg.g_star},         {"worst_excess", lg.worst_excess},
                              {"best_candidate", lg.best_candidate}, {"candidates", lg.candidates}};
    if (!lg.passed) {
      out.exit_code = 2;
      out.violation = "Legendre check: candidate " + lg.best_candidate + " exceeds rho_s by " + num(lg.worst_excess);
    }
  }
  Csv trace({"iteration", "energy"});
  for (std::size_t i = 0; i < res.energy_trace.size(); ++i) trace.row({double(i), res.energy_trace[i]});
  out.files = {{"rho_s.csv", density_csv(res.rho_s)}, {"energy_trace.csv", trace.str()}};
  return out;
}

Outcome prox_mode(const Node& root) {
  root.only({"mode", "seed", "grid", "density", "tau", "prox"});
  const auto grid = read_grid(root.child("grid"));
  const auto rho = read_density(root.child("density"), grid);
  const double tau = root.number("tau", 0.1);
  if (!(tau > 0.0)) root.bad("tau", "must be positive");
  const auto opt = read_prox_options(root.child("prox"));

  spdlog::info("prox: tau = {}, n = {}", tau, grid.n());
  const auto p = prox(rho, tau, opt);
  const auto z = evaluate_zero_tau_error(p);
  Outcome out;
  out.result = {{"mode", "prox"},
                {"tau", tau},
                {"envelope", p.envelope},
                {"phi_at_prox", p.phi_at_prox},
                {"phi_at_source", p.phi_at_source},
                {"w2sq", p.w2sq},
                {"grad_norm_sq", p.grad_norm_sq()},
                {"iterations", p.iterations},
                {"gradient_norm", p.gradient_norm},
                {"zero_tau", {{"bound_lhs", z.bound_lhs}, {"bound_rhs", z.bound_rhs}, {"holds", z.holds}}}};
  if (std::isfinite(z.bound_lhs_unrelaxed)) out.result["zero_tau"]["bound_lhs_unrelaxed"] = z.bound_lhs_unrelaxed;
  if (!z.holds) {
    out.exit_code = 2;
    out.violation = "0-error estimate " + num(z.bound_lhs) + " exceeds " + num(z.bound_rhs);
  }

  Csv fields({"x", "rho", "rho_tau", "moreau_grad"});
  for (int i = 0; i < grid.n(); ++i) fields.row({grid.center(i), rho[i], p.rho_tau[i], p.grad[i]});
  Csv particles({"k", "source", "prox", "xi"});
  for (std::size_t k = 0; k < p.particles.m(); ++k)
    particles.row({double(k), p.source_particles.q[k], p.particles.q[k], p.grad_particles[k]});
  out.files = {{"rho_tau.csv", density_csv(p.rho_tau)}, {"prox_fields.csv", fields.str()},
               {"particles.csv", particles.str()}};
  return out;
}

const std::initializer_list<const char*> kFlowKeys = {"mode",  "seed",    "grid",         "tau",        "dt",
                                                      "t_end", "potential", "initial",    "record_every",
                                                      "bohm_enabled", "drift_bound", "bulk_v", "leak_tol",
                                                      "prox",  "snapshots", "taus"};

Outcome flow_mode(const Node& root) {
  root.only(kFlowKeys);
  auto cfg = read_flow(root);
  const bool snaps = root.flag("snapshots", true);
  cfg.keep_snapshots = snaps;
  spdlog::info("flow: {}x{}, tau = {}, dt = {}, t_end = {}", cfg.n_x, cfg.n_v, cfg.tau, cfg.dt, cfg.t_end);
  const auto tr = run(cfg);
  Outcome out;
  out.result = {{"mode", "flow"}};
  out.result.update(flow_summary(tr));
  out.files.emplace_back("trace.csv", trace_csv(tr));
  for (std::size_t r = 0; r < tr.snapshots.size(); ++r) {
    std::ostringstream os;
    write_phase_csv(os, tr.snapshots[r]);
    out.files.emplace_back(snapshot_name(tr.records[r].step), os.str());
  }
  return out;
}

Outcome sweep_mode(const Node& root, int threads) {
  root.only(kFlowKeys);
  const auto base = read_flow(root);
  const auto taus = root.numbers("taus", {0.3, 0.1, 0.03});
  for (std::size_t i = 0; i < taus.size(); ++i)
    if (!(taus[i] > 0.0)) root.bad("taus[" + std::to_string(i) + "]", "must be positive");
  spdlog::info("sweep: {} members, {} threads", taus.size(), threads);
  const auto rep = evaluate_tau_sweep(base, taus, 1e-8, threads);

  Outcome out;
  Csv members({"tau", "sup_w2", "sup_w2_t", "w2_bound", "sup_gap", "zero_tau_integral", "modulus", "modulus_bound",
               "max_drift"});
  json list = json::array();
  for (std::size_t i = 0; i < rep.members.size(); ++i) {
    const auto& m = rep.members[i];
    members.row({m.tau, m.sup_w2, m.sup_w2_witness_t, m.w2_bound, m.sup_gap, m.zero_tau_integral, m.modulus,
                 m.modulus_bound, m.max_drift});
    list.push_back({{"tau", m.tau},
                    {"sup_w2", m.sup_w2},
                    {"sup_gap", m.sup_gap},
                    {"zero_tau_integral", m.zero_tau_integral},
                    {"modulus", m.modulus},
                    {"max_drift", m.max_drift}});
    out.files.emplace_back("trace_tau_" + std::to_string(i) + ".csv", trace_csv(m.trace));
  }
  std::ostringstream pw;
  pw << "tau";
  for (double t : taus) pw << ',' << num(t);
  pw << '\n';
  for (std::size_t i = 0; i < taus.size(); ++i) {
    pw << num(taus[i]);
    for (double d : rep.pairwise[i]) pw << ',' << num(d);
    pw << '\n';
  }
  out.result = {{"mode", "sweep"},
                {"fitted_exponent", rep.fitted_exponent},
                {"fitted_prefactor", rep.fitted_prefactor},
                {"bounds_hold", rep.bounds_hold},
                {"members", list}};
  const json report = {{"taus", taus},
                       {"fitted_exponent", rep.fitted_exponent},
                       {"fitted_prefactor", rep.fitted_prefactor},
                       {"bounds_hold", rep.bounds_hold},
                       {"members_csv", members.str()},
                       {"pairwise_csv", pw.str()}};
  out.files.emplace_back("sweep.csv", members.str());
  out.files.emplace_back("pairwise.csv", pw.str());
  out.files.emplace_back("sweep_report.json", report.dump(2) + "\n");
  if (!rep.bounds_hold) {
    out.exit_code = 2;
    try {
      tau_sweep(base, taus, 1e-8, threads);
    } catch (const Error& e) {
      out.violation = e.what();
    }
  }
  return out;
}

Outcome validate_mode(const Node& root, std::uint64_t seed) {
  root.only({"mode", "seed", "pack", "lattice", "roundtrip_samples"});
  const auto pack = read_pack(root.child("pack"));
  const auto lat = root.child("lattice");
  lat.only({"s_points", "alpha_points"});
  const auto lattice = ValidationLattice::standard(lat.integer("s_points", 33), lat.integer("alpha_points", 41));
  const auto rep = evaluate_pack(pack, lattice);

  // Randomized round trip A(−b(s)) = s, s log-uniform on [1e−3, 1e3].
  const int samples = root.integer("roundtrip_samples", 200);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0.0, worst_s = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double s = std::pow(10.0, u(rng));
    const double err = std::abs(pack.a_of(-pack.b_of(s)) - s) / s;
    if (err > worst) worst = err, worst_s = s;
  }

  Outcome out;
  json checks = json::object();
  for (const auto& c : rep.checks)
    checks[c.name] = {{"passed", c.passed}, {"witness", c.witness}, {"lhs", c.lhs}, {"rhs", c.rhs}};
  const bool roundtrip_ok = worst <= 1e-9;
  out.result = {{"mode", "validate"},
                {"pack", pack.name()},
                {"all_passed", rep.all_passed() && roundtrip_ok},
                {"lambda_bar1", rep.lambda_bar1},
                {"lambda_bar2", rep.lambda_bar2},
                {"lambda1", rep.lambda1},
                {"t1", rep.t1},
                {"inf_b", rep.inf_b},
                {"checks", checks},
                {"roundtrip_max_rel_error", worst},
                {"roundtrip_witness", worst_s}};
  for (const auto& c : rep.checks)
    if (!c.passed && out.violation.empty()) out.violation = c.name + " fails at " + num(c.witness);
  if (!roundtrip_ok && out.violation.empty()) out.violation = "round trip error " + num(worst) + " at s = " + num(worst_s);
  if (!out.violation.empty()) out.exit_code = 2;
  return out;
}

Outcome liftcheck_mode(const Node& root, std::uint64_t seed) {
  root.only({"mode", "seed", "instances", "atoms", "positions", "targets", "trials"});
  const int instances = root.integer("instances", 50), atoms = root.integer("atoms", 12),
            positions = root.integer("positions", 5), targets = root.integer("targets", 3),
            trials = root.integer("trials", 20);
  if (instances < 1) root.bad("instances", "must be at least 1");
  if (positions < 1 || atoms < positions) root.bad("atoms", "need atoms >= positions >= 1");
  if (targets < 1) root.bad("targets", "must be at least 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  double gap = 0.0, marginal = 0.0, margin = 1e300;
  bool diagonal = true;
  for (int inst = 0; inst < instances; ++inst) {
    std::vector<double> pos;
    for (int i = 0; i < positions; ++i) pos.push_back(u(rng));
    std::vector<PhaseAtom> mu;
    double s = 0.0;
    for (int a = 0; a < atoms; ++a) {
      mu.push_back({{pos[a % positions]}, {nd(rng)}, u(rng) + 0.05});
      s += mu.back().w;
    }
    for (auto& a : mu) a.w /= s;
    WeightedPoints eta;
    double se = 0.0;
    for (int j = 0; j < targets; ++j) {
      eta.points.push_back({u(rng)});
      eta.weights.push_back(u(rng) + 0.1);
      se += eta.weights.back();
    }
    for (double& w : eta.weights) w /= se;

    const auto base = w2_discrete(position_marginal(mu), eta);
    const auto lp = lift_plan(mu, base.plan);
    const auto chk = verify_lift(mu, lp, base.plan);
    diagonal = diagonal && chk.supported_on_diagonal;
    marginal = std::max(marginal, chk.marginal_error);
    gap = std::max(gap, std::abs(chk.w2_lift - base.distance));
    for (int t = 0; t < trials; ++t) {
      std::vector<PhaseAtom> m;
      for (int j = 0; j < targets; ++j) {
        const int k = 1 + int(u(rng) * 4);
        std::vector<double> split(k);
        double tot = 0.0;
        for (double& x : split) tot += (x = u(rng) + 0.01);
        for (int q = 0; q < k; ++q) m.push_back({eta.points[j], {2.0 * nd(rng)}, eta.weights[j] * split[q] / tot});
      }
      margin = std::min(margin, w2_discrete(phase_points(mu), phase_points(m)).distance - base.distance);
    }
  }
  Outcome out;
  const bool ok = diagonal && marginal <= 1e-10 && gap <= 1e-10 && margin >= -1e-10;
  out.result = {{"mode", "liftcheck"},
                {"instances", instances},
                {"trials", trials},
                {"all_passed", ok},
                {"supported_on_diagonal", diagonal},
                {"max_marginal_error", marginal},
                {"max_equality_gap", gap},
                {"min_margin", margin}};
  if (!ok) {
    out.exit_code = 2;
    out.violation = "lifting: equality gap " + num(gap) + ", min margin " + num(margin);
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

const std::vector<std::string>& mode_names() {
  static const std::vector<std::string> names{"stationary", "prox", "flow", "sweep", "validate", "liftcheck"};
  return names;
}

Outcome run_mode(const json& config, std::uint64_t seed, int threads) {
  const Node root(config, "");
  const auto mode = root.text("mode", "");
  if (mode.empty()) root.bad("mode", "missing");
  if (mode == "stationary") return stationary_mode(root);
  if (mode == "prox") return prox_mode(root);
  if (mode == "flow") return flow_mode(root);
  if (mode == "sweep") return sweep_mode(root, threads);
  if (mode == "validate") return validate_mode(root, seed);
  if (mode == "liftcheck") return liftcheck_mode(root, seed);
  root.bad("mode", "unknown mode \"" + mode + "\"");
}

json diagnose_directory(const std::string& dir, std::string* violation) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  const auto manifest = parse_config(slurp(base / "manifest.json"), (base / "manifest.json").string());
  if (!manifest.contains("config")) fail(ErrorKind::ConfigError, "manifest.json: missing config");
  const json& config = manifest.at("config");
  if (config.value("mode", "") != "flow") fail(ErrorKind::ConfigError, "diagnose needs the output of a flow run");
  FlowTrace tr;
  tr.config = read_flow(Node(config, ""));

  std::istringstream rows(slurp(base / "trace.csv"));
  std::string line;
  std::getline(rows, line);
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"t", "mass", "H_tau", "step", "clamp_mass"})
    if (!col.count(need)) fail(ErrorKind::ConfigError, std::string("trace.csv: missing column ") + need);

  while (std::getline(rows, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    const int step = int(std::stod(cells.at(col["step"])));
    const auto snap = base / snapshot_name(step);
    if (!fs::exists(snap)) fail(ErrorKind::IoError, "missing snapshot " + snap.string() + " (run with snapshots on)");
    std::ifstream in(snap);
    const auto mu = read_phase_csv(in, tr.config.leak_tol);
    auto [rec, fields] = measure_state(mu, tr.config);
    rec.step = step;
    rec.t = std::stod(cells.at(col["t"]));
    rec.mass = std::stod(cells.at(col["mass"]));
    rec.clamp_mass = std::stod(cells.at(col["clamp_mass"]));
    if (tr.records.empty()) tr.H_full0 = hamiltonian(mu, tr.config.potential);
    tr.records.push_back(rec);
    tr.fields.push_back(std::move(fields));
  }
  if (tr.records.empty()) fail(ErrorKind::ConfigError, "trace.csv: no records");
  const double h0 = tr.records.front().H_tau;
  for (const auto& r : tr.records) tr.max_drift = std::max(tr.max_drift, std::abs(r.H_tau - h0) / std::abs(h0));

  const auto rep = check_trace(tr);
  const auto mom = momentum_residual(tr);
  const auto cont = continuity_residual(tr);

  Csv checks({"t", "identity_error", "energy_error", "fisher_lhs", "fisher_rhs", "jensen_lhs", "jensen_rhs",
              "zero_tau_lhs", "zero_tau_rhs"});
  double worst_identity = 0.0, worst_energy = 0.0, worst_ratio = 0.0;
  for (const auto& c : rep.records) {
    checks.row({c.t, c.identity_error, c.energy_error, c.fisher_bound_lhs, c.fisher_bound_rhs, c.jensen_lhs,
                c.jensen_rhs, c.zero_tau.bound_lhs, c.zero_tau.bound_rhs});
    worst_identity = std::max(worst_identity, c.identity_error);
    worst_energy = std::max(worst_energy, c.energy_error);
    if (c.zero_tau.bound_rhs > 0.0) worst_ratio = std::max(worst_ratio, c.zero_tau.bound_lhs / c.zero_tau.bound_rhs);
  }
  Csv residuals({"t", "momentum", "continuity"});
  for (std::size_t i = 0; i < mom.t.size(); ++i) residuals.row({mom.t[i], mom.norm[i], cont.norm[i]});

  if (violation && !rep.all_passed()) *violation = rep.first_failure;
  return {{"records", tr.records.size()},
          {"all_passed", rep.all_passed()},
          {"identities_hold", rep.identities_hold},
          {"energy_holds", rep.energy_holds},
          {"fisher_bound_holds", rep.fisher_bound_holds},
          {"jensen_holds", rep.jensen_holds},
          {"zero_tau_holds", rep.zero_tau_holds},
          {"first_failure", rep.first_failure},
          {"max_identity_error", worst_identity},
          {"max_energy_error", worst_energy},
          {"max_zero_tau_ratio", worst_ratio},
          {"momentum_residual_max", mom.max},
          {"continuity_residual_max", cont.max},
          {"config", flow_config_json(tr.config)},
          {"record_checks_csv", checks.str()},
          {"residuals_csv", residuals.str()}};
}

}  // namespace bpl::cli
