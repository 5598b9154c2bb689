#include "bpl/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bpl/errors.hpp"
#include "bpl/fisher.hpp"

namespace bpl {

namespace {

// Prefilter for cubic B-spline interpolation: solves (c_{i−1} + 4c_i + c_{i+1})/6 = f_i,
// cyclically or with c = 0 outside the row. Factors depend only on (n, periodic) and are cached.
class SplineFilter {
 public:
  SplineFilter(int n, bool periodic) : n_(n), periodic_(periodic) {
    // Thomas factors for the tridiagonal part; the periodic case modifies both ends (Sherman–Morrison).
    diag_.assign(n, 2.0 / 3.0);
    if (periodic_) {
      diag_[0] -= gamma_;
      diag_[n - 1] -= kOff * kOff / gamma_;
    }
    cp_.resize(n);
    denom_.resize(n);
    denom_[0] = diag_[0];
    cp_[0] = kOff / denom_[0];
    for (int i = 1; i < n; ++i) {
      denom_[i] = diag_[i] - kOff * cp_[i - 1];
      cp_[i] = kOff / denom_[i];
    }
    if (periodic_) {
      std::vector<double> u(n, 0.0);
      u[0] = gamma_;
      u[n - 1] = kOff;
      z_ = thomas(u);
      z_scale_ = 1.0 + z_[0] + kOff * z_[n - 1] / gamma_;
    }
  }

  std::vector<double> apply(const std::vector<double>& f) const {
    auto x = thomas(f);
    if (periodic_) {
      const double fact = (x[0] + kOff * x[n_ - 1] / gamma_) / z_scale_;
      for (int i = 0; i < n_; ++i) x[i] -= fact * z_[i];
    }
    return x;
  }

  int n() const { return n_; }
  bool periodic() const { return periodic_; }

 private:
  static constexpr double kOff = 1.0 / 6.0;

  std::vector<double> thomas(const std::vector<double>& r) const {
    std::vector<double> x(n_);
    x[0] = r[0] / denom_[0];
    for (int i = 1; i < n_; ++i) x[i] = (r[i] - kOff * x[i - 1]) / denom_[i];
    for (int i = n_ - 2; i >= 0; --i) x[i] -= cp_[i] * x[i + 1];
    return x;
  }

  int n_;
  bool periodic_;
  double gamma_ = -2.0 / 3.0;
  std::vector<double> diag_, cp_, denom_, z_;
  double z_scale_ = 1.0;
};

const SplineFilter& filter_for(int n, bool periodic) {
  thread_local std::vector<SplineFilter> cache;
  for (const auto& f : cache)
    if (f.n() == n && f.periodic() == periodic) return f;
  cache.emplace_back(n, periodic);
  return cache.back();
}

std::vector<double> spline_shift(const std::vector<double>& f, double shift, bool periodic) {
  if (shift == 0.0) return f;
  const int n = int(f.size());
  const auto c = filter_for(n, periodic).apply(f);
  auto coeff = [&](long j) {
    if (periodic) return c[((j % n) + n) % n];
    return j < 0 || j >= n ? 0.0 : c[j];
  };
  std::vector<double> out(n);
  const double fl = std::floor(-shift);
  const long base = long(fl);
  const double t = -shift - fl, t2 = t * t, t3 = t2 * t;
  const double w0 = (1.0 - t) * (1.0 - t) * (1.0 - t) / 6.0, w1 = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
               w2 = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, w3 = t3 / 6.0;
  for (int i = 0; i < n; ++i) {
    const long j = i + base;
    out[i] = w0 * coeff(j - 1) + w1 * coeff(j) + w2 * coeff(j + 1) + w3 * coeff(j + 2);
  }
  return out;
}

double clamp_negative(std::vector<double>& f, double cell_volume) {
  double removed = 0.0;
  for (double& x : f)
    if (x < 0.0) {
      removed -= x;
      x = 0.0;
    }
  return removed * cell_volume;
}

void advect_x(std::vector<double>& f, const TorusGrid& xg, const VelocityBox& vb, double dt) {
  const int nx = xg.n(), nv = vb.n_v();
  std::vector<double> row(nx);
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nx; ++i) row[i] = f[std::size_t(i) * nv + j];
    const auto moved = shift_periodic(row, vb.center(j) * dt / xg.h());
    for (int i = 0; i < nx; ++i) f[std::size_t(i) * nv + j] = moved[i];
  }
}

DensityField marginal_of(const std::vector<double>& f, const TorusGrid& xg, const VelocityBox& vb) {
  const int nx = xg.n(), nv = vb.n_v();
  std::vector<double> rho(nx, 0.0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nv; ++j) rho[i] += f[std::size_t(i) * nv + j] * vb.h_v();
  return normalize(rho, xg);
}

std::vector<double> force_from_marginal(const DensityField& rho, double tau, const Potential& V, bool bohm,
                                        const ProxOptions& opt) {
  const auto& g = rho.grid();
  std::vector<double> a(g.n());
  for (int i = 0; i < g.n(); ++i) a[i] = -V.derivative(g.center(i));
  if (bohm) {
    const auto pr = prox(rho, tau, opt);
    for (int i = 0; i < g.n(); ++i) a[i] -= pr.grad[i];
  }
  return a;
}

void require_1d(const PhaseDensity& mu) {
  if (mu.xgrid().d() != 1) fail(ErrorKind::DimensionError, "the flow integrator runs on the 1D torus only");
}

double potential_energy(const DensityField& rho, const Potential& V) {
  const auto v = V.sample(rho.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * rho[i];
  return s * rho.grid().cell_volume();
}

}  // namespace

void FlowConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) { fail(ErrorKind::ConfigError, field + ": " + why); };
  if (n_x < 8) bad("grid.n_x", "must be at least 8");
  if (n_v < 8) bad("grid.n_v", "must be at least 8");
  if (!(v_max > 0.0)) bad("grid.v_max", "must be positive");
  if (!(dt > 0.0)) bad("dt", "must be positive");
  if (!(t_end >= dt)) bad("t_end", "must be at least dt");
  if (bohm_enabled && !(tau > 0.0)) bad("tau", "must be positive when the proximal force is on");
  if (record_every < 1) bad("record_every", "must be at least 1");
  if (!(drift_bound > 0.0)) bad("drift_bound", "must be positive");
  if (!(initial.sigma > 0.0)) bad("initial.sigma", "must be positive");
  if (!(std::abs(initial.amplitude) < 1.0)) bad("initial.amplitude", "must lie in (-1, 1) for a positive density");
  if (initial.frequency < 1) bad("initial.frequency", "must be at least 1");
}

std::vector<double> shift_periodic(const std::vector<double>& f, double shift) { return spline_shift(f, shift, true); }

std::vector<double> shift_clamped(const std::vector<double>& f, double shift) { return spline_shift(f, shift, false); }

PhaseDensity initial_state(const FlowConfig& c) {
  c.validate();
  TorusGrid xg(1, c.n_x);
  VelocityBox vb(1, c.n_v, c.v_max);
  const auto& in = c.initial;
  const auto rho = density_from_function(
      xg, [&](double x) { return 1.0 + in.amplitude * std::cos(2.0 * M_PI * in.frequency * x); });
  return product(rho, vb, gaussian_profile(vb, in.sigma, in.mean), c.leak_tol);
}

double hamiltonian_tau(const PhaseDensity& mu, double tau, const Potential& V, const ProxOptions& opt) {
  const auto lp = lifted_prox(mu, tau, opt);
  const auto m = moments(mu);
  return m.kinetic + lp.envelope + potential_energy(m.rho, V);
}

double hamiltonian(const PhaseDensity& mu, const Potential& V) {
  const auto m = moments(mu);
  return m.kinetic + fisher(m.rho) + potential_energy(m.rho, V);
}

std::vector<double> force_field(const PhaseDensity& mu, double tau, const Potential& V, bool bohm_enabled,
                                const ProxOptions& opt) {
  require_1d(mu);
  return force_from_marginal(marginal_x(mu), tau, V, bohm_enabled, opt);
}

PhaseDensity step(const PhaseDensity& mu, double dt, double tau, const Potential& V, bool bohm_enabled,
                  StepInfo* info, const ProxOptions& opt) {
  require_1d(mu);
  const auto& xg = mu.xgrid();
  const auto& vb = mu.vbox();
  const int nx = xg.n(), nv = vb.n_v();
  const double vol = mu.cell_volume();
  StepInfo local;
  auto f = mu.values();

  advect_x(f, xg, vb, 0.5 * dt);
  local.clamp_mass += clamp_negative(f, vol);

  // The v-kick leaves the marginal unchanged, so one force evaluation serves the whole kick.
  const auto a = force_from_marginal(marginal_of(f, xg, vb), tau, V, bohm_enabled, opt);
  std::vector<double> col(nv);
  for (int i = 0; i < nx; ++i) {
    std::copy_n(f.begin() + std::ptrdiff_t(i) * nv, nv, col.begin());
    const auto moved = shift_clamped(col, a[i] * dt / vb.h_v());
    std::copy(moved.begin(), moved.end(), f.begin() + std::ptrdiff_t(i) * nv);
  }
  local.clamp_mass += clamp_negative(f, vol);

  advect_x(f, xg, vb, 0.5 * dt);
  local.clamp_mass += clamp_negative(f, vol);

  double mass = 0.0;
  for (double x : f) mass += x;
  mass *= vol;
  if (!(mass > 0.0) || !std::isfinite(mass)) fail(ErrorKind::NoConvergence, "flow step lost all mass");
  local.mass_factor = mass / mu.mass();
  for (double& x : f) x /= mass;
  if (info) *info = local;
  return PhaseDensity(xg, vb, std::move(f), mu.leak_tol());
}

MeasuredState measure_state(const PhaseDensity& mu, const FlowConfig& config) {
  require_1d(mu);
  const auto m = moments(mu);
  const auto& g = m.rho.grid();
  const auto& vb = mu.vbox();
  FlowRecord r;
  r.kinetic = m.kinetic;
  r.potential = potential_energy(m.rho, config.potential);
  RecordFields fl{m.rho, std::vector<double>(g.n()), std::vector<double>(g.n()), std::vector<double>(g.n(), 0.0),
                  m.rho};
  if (config.bohm_enabled) {
    const auto pr = prox(m.rho, config.tau, config.prox);
    r.phi_tau = pr.envelope;
    r.fisher_prox = pr.phi_at_prox;
    r.w2_prox = std::sqrt(pr.w2sq);
    r.slope_norm = std::sqrt(pr.grad_norm_sq());
    fl.moreau_grad = pr.grad;
    fl.rho_tau = pr.rho_tau;
  }
  r.H_tau = r.kinetic + r.phi_tau + r.potential;
  r.min_f = 1e300;
  r.max_f = 0.0;
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < vb.n_v(); ++j) {
      if (std::abs(vb.center(j)) > config.bulk_v) continue;
      const double f = mu.at(i, j);
      r.min_f = std::min(r.min_f, f);
      r.max_f = std::max(r.max_f, f);
    }
  r.theta_moment = superlinear_moment(mu, [](double s) { return s * s; });
  for (int i = 0; i < g.n(); ++i) {
    fl.momentum[i] = m.rho[i] * m.u[i];
    fl.stress[i] = m.rho[i] * m.vv[i];
    r.mean_kinetic += 0.5 * m.rho[i] * m.u[i] * m.u[i] * g.h();
  }
  return {r, std::move(fl)};
}

FlowTrace run(const FlowConfig& config) { return run_from(config, initial_state(config)); }

FlowTrace run_from(const FlowConfig& config, const PhaseDensity& mu0) {
  config.validate();
  require_1d(mu0);
  const auto& V = config.potential;
  FlowTrace trace;
  trace.config = config;
  trace.H_full0 = hamiltonian(mu0, V);

  double cumulative_mass = 1.0, clamp_since = 0.0;
  auto record = [&](const PhaseDensity& mu, int k) {
    auto [r, fl] = measure_state(mu, config);
    r.step = k;
    r.t = k * config.dt;
    r.mass = cumulative_mass;
    r.clamp_mass = clamp_since;
    clamp_since = 0.0;
    trace.records.push_back(r);
    trace.fields.push_back(std::move(fl));
    if (config.keep_snapshots) trace.snapshots.push_back(mu);

    const double h0 = trace.records.front().H_tau;
    const double drift = std::abs(r.H_tau - h0) / std::max(std::abs(h0), 1e-300);
    trace.max_drift = std::max(trace.max_drift, drift);
    if (drift > config.drift_bound)
      fail(ErrorKind::DriftExceeded, "Hamiltonian drift " + std::to_string(drift) + " exceeds " +
                                         std::to_string(config.drift_bound) + " at t = " + std::to_string(r.t));
  };

  const int steps = int(std::llround(config.t_end / config.dt));
  PhaseDensity mu = mu0;
  record(mu, 0);
  for (int k = 1; k <= steps; ++k) {
    StepInfo info;
    mu = step(mu, config.dt, config.tau, V, config.bohm_enabled, &info, config.prox);
    cumulative_mass *= info.mass_factor;
    clamp_since += info.clamp_mass;
    if (k % config.record_every == 0 || k == steps) record(mu, k);
  }
  return trace;
}

}  // namespace bpl
