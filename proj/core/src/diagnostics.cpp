#include "bpl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include "bpl/errors.hpp"
#include "bpl/fisher.hpp"
#include "bpl/fourier.hpp"
#include "bpl/transport.hpp"

namespace bpl {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

double particle_pairing(const Quantile1D& at, const std::vector<double>& weight, const TestFunction& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < at.m(); ++k) s += a.value(at.q[k]) * weight[k];
  return s / double(at.m());
}

// Three-point derivative on a nonuniform mesh at the middle node.
double central(double f0, double f1, double f2, double h1, double h2) {
  return -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2;
}

double grid_pair(const std::vector<double>& f, const TorusGrid& g, const TestFunction& a, bool derivative) {
  double s = 0.0;
  for (int i = 0; i < g.n(); ++i) s += f[i] * (derivative ? a.derivative(g.center(i)) : a.value(g.center(i)));
  return s * g.h();
}

template <class Integrand>
WeakResidualSeries weak_series(const FlowTrace& trace, Integrand&& term) {
  WeakResidualSeries out;
  const auto& rec = trace.records;
  if (rec.size() < 3) return out;
  const auto& grid = trace.fields.front().rho.grid();
  const auto family = fourier_family_for(grid);
  for (std::size_t r = 1; r + 1 < rec.size(); ++r) {
    const double h1 = rec[r].t - rec[r - 1].t, h2 = rec[r + 1].t - rec[r].t;
    std::vector<double> modes;
    double worst = 0.0;
    for (const auto& a : family) {
      const double v = term(r, h1, h2, a, grid);
      modes.push_back(v);
      worst = std::max(worst, std::abs(v));
    }
    out.t.push_back(rec[r].t);
    out.norm.push_back(worst);
    out.modes.push_back(std::move(modes));
    out.max = std::max(out.max, worst);
  }
  return out;
}

}  // namespace

double dual_norm_lower(std::span<const double> xi, const TorusGrid& grid) {
  if (grid.d() != 1) fail(ErrorKind::DimensionError, "dual_norm_lower is 1D");
  if (xi.size() != std::size_t(grid.n())) fail(ErrorKind::InvalidArgument, "field size does not match the grid");
  double avg = 0.0;
  for (double x : xi) avg += x;
  avg *= grid.h();
  if (std::abs(avg) > 1e-8) fail(ErrorKind::NonZeroAverage, "field average " + fmt(avg) + " exceeds 1e-8");
  double best = 0.0;
  for (const auto& a : fourier_family_for(grid)) best = std::max(best, std::abs(pair_with(xi, grid, a)));
  return best;
}

ZeroTauError evaluate_zero_tau_error(const ProxResult& prox, double slack) {
  const auto& rho = prox.rho;
  const auto& grid = rho.grid();
  if (grid.d() != 1) fail(ErrorKind::DimensionError, "zero_tau_error is 1D");
  ZeroTauError out;
  out.bound_rhs = 2.0 * (prox.envelope - prox.phi_at_prox);

  // ρ̄∇φ_τ(ρ̄) on the grid; ξ^τ lives on the prox particles q_k, where t(q_k) = P_k.
  std::vector<double> flux(grid.n());
  for (int i = 0; i < grid.n(); ++i) flux[i] = rho[i] * prox.grad[i];
  const auto& xi = prox.grad_particles;

  double xi_mean = 0.0;
  for (double x : xi) xi_mean += x;
  xi_mean /= double(xi.size());
  double flux_mean = 0.0;
  for (double x : flux) flux_mean += x;
  out.average = flux_mean * grid.h() - xi_mean;

  const auto family = fourier_family_for(grid);
  std::vector<double> xi_pair;
  for (const auto& a : family) {
    xi_pair.push_back(particle_pairing(prox.particles, xi, a));
    const double p = pair_with(flux, grid, a) - xi_pair.back();
    out.pairings.push_back(p);
    out.bound_lhs = std::max(out.bound_lhs, std::abs(p));
  }
  out.holds = out.bound_lhs <= out.bound_rhs + slack;

  if (rho.min() < kGradientFloor) {
    out.bound_lhs_unrelaxed = std::nan("");
    return out;
  }
  const auto fg = fisher_gradient(rho);
  for (int i = 0; i < grid.n(); ++i) flux[i] = rho[i] * fg.field[i];
  for (std::size_t k = 0; k < family.size(); ++k)
    out.bound_lhs_unrelaxed = std::max(out.bound_lhs_unrelaxed, std::abs(pair_with(flux, grid, family[k]) - xi_pair[k]));
  return out;
}

ZeroTauError zero_tau_error(const ProxResult& prox, double slack) {
  auto out = evaluate_zero_tau_error(prox, slack);
  if (!out.holds)
    fail(ErrorKind::PropertyViolation, "0-error lower estimate " + fmt(out.bound_lhs) + " exceeds 2(phi_tau - phi) = " +
                                           fmt(out.bound_rhs) + " at tau = " + fmt(prox.tau));
  return out;
}

WeakResidualSeries momentum_residual(const FlowTrace& trace) {
  const auto& V = trace.config.potential;
  return weak_series(trace, [&](std::size_t r, double h1, double h2, const TestFunction& a, const TorusGrid& g) {
    const auto& f = trace.fields;
    const double dM = central(grid_pair(f[r - 1].momentum, g, a, false), grid_pair(f[r].momentum, g, a, false),
                              grid_pair(f[r + 1].momentum, g, a, false), h1, h2);
    const double flux = grid_pair(f[r].stress, g, a, true);
    double force = 0.0;
    for (int i = 0; i < g.n(); ++i) {
      const double x = g.center(i);
      force += f[r].rho[i] * (V.derivative(x) + f[r].moreau_grad[i]) * a.value(x);
    }
    return dM - flux + force * g.h();
  });
}

WeakResidualSeries continuity_residual(const FlowTrace& trace) {
  return weak_series(trace, [&](std::size_t r, double h1, double h2, const TestFunction& a, const TorusGrid& g) {
    const auto& f = trace.fields;
    auto rho_pair = [&](std::size_t k) { return grid_pair(f[k].rho.values(), g, a, false); };
    return central(rho_pair(r - 1), rho_pair(r), rho_pair(r + 1), h1, h2) - grid_pair(f[r].momentum, g, a, true);
  });
}

TraceReport check_trace(const FlowTrace& trace, double slack) {
  TraceReport rep;
  const auto& cfg = trace.config;
  const double cap = trace.H_full0 + cfg.potential.sup_norm();
  const double h0 = trace.records.empty() ? 0.0 : trace.records.front().H_tau;
  auto note = [&](bool& flag, bool ok, const std::string& what, double t) {
    if (ok || !flag) return;
    flag = false;
    if (rep.first_failure.empty()) rep.first_failure = what + " at t = " + fmt(t);
  };
  for (std::size_t r = 0; r < trace.records.size(); ++r) {
    const auto& rec = trace.records[r];
    RecordCheck c;
    c.t = rec.t;
    if (cfg.bohm_enabled)
      c.identity_error = std::abs(rec.phi_tau - rec.fisher_prox - rec.w2_prox * rec.w2_prox / (2.0 * cfg.tau));
    c.energy_error = std::abs(rec.H_tau - h0) / std::max(std::abs(h0), 1e-300);
    c.fisher_bound_lhs = 0.5 * cfg.tau * rec.slope_norm * rec.slope_norm + rec.fisher_prox;
    c.fisher_bound_rhs = cap;
    c.jensen_lhs = rec.mean_kinetic;
    c.jensen_rhs = cap;
    if (cfg.bohm_enabled) c.zero_tau = evaluate_zero_tau_error(prox(trace.fields[r].rho, cfg.tau, cfg.prox), slack);

    note(rep.identities_hold, c.identity_error <= slack, "Moreau identity error " + fmt(c.identity_error), c.t);
    note(rep.energy_holds, c.energy_error <= cfg.drift_bound, "energy drift " + fmt(c.energy_error), c.t);
    note(rep.fisher_bound_holds, c.fisher_bound_lhs <= c.fisher_bound_rhs + slack,
         "Fisher bound " + fmt(c.fisher_bound_lhs) + " > " + fmt(c.fisher_bound_rhs), c.t);
    note(rep.jensen_holds, c.jensen_lhs <= c.jensen_rhs + slack,
         "Jensen bound " + fmt(c.jensen_lhs) + " > " + fmt(c.jensen_rhs), c.t);
    note(rep.zero_tau_holds, c.zero_tau.holds,
         "0-error estimate " + fmt(c.zero_tau.bound_lhs) + " > " + fmt(c.zero_tau.bound_rhs), c.t);
    rep.records.push_back(std::move(c));
  }
  return rep;
}

TauSweepReport evaluate_tau_sweep(const FlowConfig& base, const std::vector<double>& taus, double slack,
                                  int threads) {
  if (taus.empty()) fail(ErrorKind::InvalidArgument, "empty tau ladder");
  if (!base.bohm_enabled) fail(ErrorKind::InvalidArgument, "tau sweep needs the proximal term on");
  const std::size_t batch = threads > 0 ? std::size_t(threads) : taus.size();
  std::vector<FlowTrace> traces(taus.size());
  for (std::size_t lo = 0; lo < taus.size(); lo += batch) {
    std::vector<std::future<FlowTrace>> jobs;
    for (std::size_t i = lo; i < std::min(lo + batch, taus.size()); ++i) {
      FlowConfig cfg = base;
      cfg.tau = taus[i];
      jobs.push_back(std::async(std::launch::async, [cfg] { return run(cfg); }));
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) traces[lo + k] = jobs[k].get();
  }

  TauSweepReport rep;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    TauSweepMember m;
    m.tau = taus[i];
    m.trace = std::move(traces[i]);
    const auto& tr = m.trace;
    const double cap = tr.H_full0 + base.potential.sup_norm();
    m.w2_bound = std::sqrt(2.0 * m.tau * cap);
    m.modulus_bound = std::sqrt(2.0 * cap);
    m.max_drift = tr.max_drift;

    std::vector<double> est;
    for (std::size_t r = 0; r < tr.records.size(); ++r) {
      const auto& rec = tr.records[r];
      if (rec.w2_prox > m.sup_w2) {
        m.sup_w2 = rec.w2_prox;
        m.sup_w2_witness_t = rec.t;
      }
      m.sup_gap = std::max(m.sup_gap, rec.phi_tau - rec.fisher_prox);
      if (rec.w2_prox * rec.w2_prox > 2.0 * m.tau * cap + slack) rep.bounds_hold = false;
      est.push_back(evaluate_zero_tau_error(prox(tr.fields[r].rho, m.tau, base.prox), slack).bound_lhs);
    }
    for (std::size_t r = 1; r < est.size(); ++r)
      m.zero_tau_integral += 0.5 * (est[r] + est[r - 1]) * (tr.records[r].t - tr.records[r - 1].t);
    for (std::size_t r = 0; r < tr.records.size(); ++r)
      for (std::size_t s = r + 1; s < tr.records.size(); ++s) {
        const double d = w2_1d(tr.fields[r].rho, tr.fields[s].rho, TransportMode::Torus).distance;
        m.modulus = std::max(m.modulus, d / (tr.records[s].t - tr.records[r].t));
      }
    if (m.modulus > m.modulus_bound + slack) rep.bounds_hold = false;
    rep.members.push_back(std::move(m));
  }

  // Least squares of log sup W₂ on log τ, over members with a nonzero gap.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (const auto& m : rep.members) {
    if (!(m.sup_w2 > 0.0)) continue;
    const double x = std::log(m.tau), y = std::log(m.sup_w2);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++cnt;
  }
  if (cnt >= 2) {
    rep.fitted_exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    rep.fitted_prefactor = std::exp((sy - rep.fitted_exponent * sx) / cnt);
  }

  const std::size_t n = rep.members.size();
  rep.pairwise.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = rep.members[i].trace;
      const auto& b = rep.members[j].trace;
      double worst = 0.0;
      for (std::size_t r = 0; r < a.records.size(); ++r)
        for (std::size_t s = 0; s < b.records.size(); ++s)
          if (a.records[r].step == b.records[s].step)
            worst = std::max(worst, w2_1d(a.fields[r].rho, b.fields[s].rho, TransportMode::Torus).distance);
      rep.pairwise[i][j] = rep.pairwise[j][i] = worst;
    }
  return rep;
}

TauSweepReport tau_sweep(const FlowConfig& base, const std::vector<double>& taus, double slack, int threads) {
  auto rep = evaluate_tau_sweep(base, taus, slack, threads);
  for (const auto& m : rep.members) {
    const double cap = m.w2_bound * m.w2_bound;
    for (const auto& rec : m.trace.records)
      if (rec.w2_prox * rec.w2_prox > cap + slack)
        fail(ErrorKind::PropertyViolation, "W2^2 = " + fmt(rec.w2_prox * rec.w2_prox) + " exceeds 2 tau (H0 + |V|) = " +
                                               fmt(cap) + " at tau = " + fmt(m.tau) + ", t = " + fmt(rec.t));
    if (m.modulus > m.modulus_bound + slack)
      fail(ErrorKind::PropertyViolation, "equicontinuity modulus " + fmt(m.modulus) + " exceeds " +
                                             fmt(m.modulus_bound) + " at tau = " + fmt(m.tau));
  }
  return rep;
}

}  // namespace bpl
