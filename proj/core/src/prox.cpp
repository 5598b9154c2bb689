#include "bpl/prox.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#include "bpl/errors.hpp"

namespace bpl {

namespace {

constexpr int kMaxRepairs = 8;

// Torus gap Δ_k = q_{k+1} − q_k, with Δ_{m−1} = q_0 + 1 − q_{m−1}.
inline double gap(const std::vector<double>& q, std::size_t k) {
  const std::size_t m = q.size();
  return k + 1 < m ? q[k + 1] - q[k] : q[0] + 1.0 - q[m - 1];
}

double fisher_terms(const std::vector<double>& q) {
  const std::size_t m = q.size();
  const double K = 1.0 / (8.0 * double(m));
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double a = gap(q, k), b = gap(q, (k + 1) % m);
    const double L = std::log(b / a);
    s += K * L * L / (a * b);
  }
  return s;
}

double pairing_cost(const std::vector<double>& P, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) s += (P[k] - q[k]) * (P[k] - q[k]);
  return s / double(q.size());
}

double objective(const std::vector<double>& P, const std::vector<double>& q, double tau) {
  return pairing_cost(P, q) / (2.0 * tau) + fisher_terms(q);
}

// Gradient and Hessian of the objective in q.
void derivatives(const std::vector<double>& P, const std::vector<double>& q, double tau, Eigen::VectorXd& g,
                 Eigen::SparseMatrix<double>& H) {
  const std::size_t m = q.size();
  const double K = 1.0 / (8.0 * double(m));
  const double w = 1.0 / (tau * double(m));
  g.setZero(Eigen::Index(m));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(10 * m);
  for (std::size_t k = 0; k < m; ++k) {
    g[k] += w * (q[k] - P[k]);
    trip.emplace_back(k, k, w);
  }
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i[3] = {k, (k + 1) % m, (k + 2) % m};
    const double a = gap(q, k), b = gap(q, i[1]);
    const double L = std::log(b / a);
    const double fa = -K * (2.0 * L + L * L) / (a * a * b);
    const double fb = K * (2.0 * L - L * L) / (a * b * b);
    const double haa = K * (2.0 + 6.0 * L + 2.0 * L * L) / (a * a * a * b);
    const double hab = -K * (2.0 - L * L) / (a * a * b * b);
    const double hbb = K * (2.0 - 6.0 * L + 2.0 * L * L) / (a * b * b * b);
    static const double ja[3] = {-1.0, 1.0, 0.0}, jb[3] = {0.0, -1.0, 1.0};
    for (int r = 0; r < 3; ++r) {
      g[i[r]] += fa * ja[r] + fb * jb[r];
      for (int c = 0; c < 3; ++c) {
        const double v = haa * ja[r] * ja[c] + hab * (ja[r] * jb[c] + jb[r] * ja[c]) + hbb * jb[r] * jb[c];
        if (v != 0.0) trip.emplace_back(i[r], i[c], v);
      }
    }
  }
  H.resize(Eigen::Index(m), Eigen::Index(m));
  H.setFromTriplets(trip.begin(), trip.end());
}

struct NewtonOutcome {
  int iterations = 0;
  double gradient_norm = 0.0, decrement_sq = 0.0;
};

NewtonOutcome newton(const std::vector<double>& P, std::vector<double>& q, double tau, const ProxOptions& opt) {
  const std::size_t m = q.size();
  Eigen::VectorXd g;
  Eigen::SparseMatrix<double> H, I{Eigen::Index(m), Eigen::Index(m)};
  I.setIdentity();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  NewtonOutcome out;
  double shift = 0.0, prev_dec = std::numeric_limits<double>::infinity();
  int stalls = 0;
  std::vector<double> trial(m);

  for (int it = 0; it <= opt.max_iterations; ++it) {
    derivatives(P, q, tau, g, H);
    out.iterations = it;
    out.gradient_norm = std::sqrt(double(m)) * g.norm();  // Riesz representer in L²(ds) is m·g
    if (out.gradient_norm <= opt.gradient_tol) return out;
    if (it == opt.max_iterations) break;

    // Levenberg–Marquardt shift until the factorization is positive definite.
    const double diag_scale = H.diagonal().cwiseAbs().maxCoeff();
    shift = shift > 0.0 ? shift * 0.1 : 0.0;
    if (shift < 1e-14 * diag_scale) shift = 0.0;
    Eigen::VectorXd p;
    for (;;) {
      ldlt.compute(shift > 0.0 ? Eigen::SparseMatrix<double>(H + shift * I) : H);
      if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
        p = -ldlt.solve(g);
        break;
      }
      shift = shift > 0.0 ? shift * 10.0 : 1e-10 * diag_scale;
      if (shift > 1e12 * diag_scale) fail(ErrorKind::NoConvergence, "prox: Hessian regularization failed");
    }
    out.decrement_sq = -g.dot(p);
    if (shift == 0.0 && out.decrement_sq <= opt.decrement_tol) return out;
    const double f0 = objective(P, q, tau);
    const bool stalled = shift == 0.0 && out.decrement_sq >= 0.25 * prev_dec;
    if (stalled && out.decrement_sq <= opt.stagnation_rel * std::abs(f0)) return out;
    // Near-uniform data make f0 itself tiny; a decrement that keeps cycling at the rounding floor
    // for a few steps is as converged as it gets.
    stalls = stalled && out.decrement_sq < 1e-14 ? stalls + 1 : 0;
    if (stalls >= 3) return out;
    prev_dec = shift == 0.0 ? out.decrement_sq : std::numeric_limits<double>::infinity();

    // Keep every gap positive, then backtrack on the objective.
    double alpha = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double dk = (k + 1 < m ? p[k + 1] : p[0]) - p[k];
      if (dk < 0.0) alpha = std::min(alpha, 0.9 * gap(q, k) / -dk);
    }
    const double slope = g.dot(p);
    bool accepted = false;
    // In the quadratic regime rounding in f dominates the predicted decrease; take the step.
    const bool local = shift == 0.0 && alpha == 1.0 && out.decrement_sq < 1e-14;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < m; ++k) trial[k] = q[k] + alpha * p[k];
      if (local || objective(P, trial, tau) <= f0 + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (out.decrement_sq <= 1e3 * opt.decrement_tol) return out;
      fail(ErrorKind::NoConvergence, "prox: line search stalled at gradient norm " + std::to_string(out.gradient_norm));
    }
    q.swap(trial);
  }
  fail(ErrorKind::NoConvergence, "prox: no convergence after " + std::to_string(opt.max_iterations) +
                                     " iterations (gradient norm " + std::to_string(out.gradient_norm) + ")");
}

}  // namespace

double particle_fisher(const Quantile1D& q) {
  if (q.mode != TransportMode::Torus) fail(ErrorKind::InvalidArgument, "particle_fisher is defined on the torus");
  return fisher_terms(q.q);
}

ParticleProx prox_particles(const Quantile1D& P, double tau, const ProxOptions& opt) {
  if (!(tau > 0.0)) fail(ErrorKind::InvalidArgument, "prox needs tau > 0");
  if (P.mode != TransportMode::Torus || P.m() < 4) fail(ErrorKind::InvalidArgument, "prox needs a torus lattice, m >= 4");
  for (std::size_t k = 0; k < P.m(); ++k)
    if (!(gap(P.q, k) > 0.0)) fail(ErrorKind::PositivityError, "particle lattice has a zero gap (vanishing density)");

  ParticleProx out;
  out.q = P;
  for (;;) {
    auto r = newton(P.q, out.q.q, tau, opt);
    out.iterations += r.iterations;
    out.gradient_norm = r.gradient_norm;
    out.decrement_sq = r.decrement_sq;
    // The pairing k ↔ k must be the optimal rotation for the W₂ term to be exact.
    auto match = match_particles(P, out.q);
    if (match.shift == 0 || match.cost >= pairing_cost(P.q, out.q.q)) break;
    if (++out.repairs > kMaxRepairs) fail(ErrorKind::NoConvergence, "prox: pairing did not settle");
    out.q = rotate(out.q, match.shift);
  }
  out.w2sq = pairing_cost(P.q, out.q.q);
  out.phi = fisher_terms(out.q.q);
  out.envelope = out.phi + out.w2sq / (2.0 * tau);
  return out;
}

double ProxResult::grad_norm_sq() const {
  double s = 0.0;
  for (double v : grad_particles) s += v * v;
  return s / double(grad_particles.size());
}

ProxResult prox(const DensityField& rho, double tau, const ProxOptions& opt) {
  const auto& grid = rho.grid();
  if (grid.d() != 1) fail(ErrorKind::DimensionError, "prox is one-dimensional");
  if (rho.min() < opt.positivity_floor)
    fail(ErrorKind::PositivityError, "prox needs rho >= " + std::to_string(opt.positivity_floor));
  const std::size_t m = opt.lattice_factor * std::size_t(grid.n());
  const SmoothCdf F(rho);
  auto P = smooth_quantiles(F, m);
  auto pp = prox_particles(P, tau, opt);

  std::vector<double> gp(m);
  for (std::size_t k = 0; k < m; ++k) gp[k] = (P.q[k] - pp.q.q[k]) / tau;

  // Grid field: particle displacement interpolated at each cell centre's quantile level.
  std::vector<double> t(grid.n()), grad(grid.n());
  for (int i = 0; i < grid.n(); ++i) {
    const double s = F(grid.center(i));
    grad[i] = (P.value(s) - pp.q.value(s)) / tau;
    t[i] = grid.center(i) - tau * grad[i];
  }
  auto rho_tau = smooth_to_density(pp.q, grid);
  MonotoneMap1D map(rho, rho_tau, std::move(t), TransportMode::Torus, 0.0);
  return ProxResult{rho,        tau,        rho_tau,  std::move(map), P,
                    pp.q,       pp.w2sq,    pp.phi,   particle_fisher(P),
                    pp.envelope, std::move(grad), std::move(gp), pp.iterations, pp.gradient_norm,
                    pp.decrement_sq, pp.repairs};
}

std::vector<double> moreau_gradient(const DensityField& rho, double tau, const ProxOptions& opt) {
  return prox(rho, tau, opt).grad;
}

LiftedProx lifted_prox(const PhaseDensity& mu, double tau, const ProxOptions& opt) {
  const auto rho = marginal_x(mu);
  auto base = prox(rho, tau, opt);
  const auto qa = PiecewiseQuantile::from_density(rho);
  const auto qb = PiecewiseQuantile::from_density(base.rho_tau);
  const auto plan = monotone_cell_plan(rho, base.rho_tau, optimal_cut(qa, qb), TransportMode::Torus);
  auto mu_tau = lift_phase_density(mu, base.rho_tau, plan);
  const std::size_t nv = mu.vbox().cells();
  std::vector<double> fx(mu.values().size()), fv(mu.values().size() * mu.vbox().d(), 0.0);
  for (std::size_t ix = 0; ix < rho.size(); ++ix)
    for (std::size_t iv = 0; iv < nv; ++iv) fx[ix * nv + iv] = base.grad[ix];
  const double env = base.envelope;
  return LiftedProx{std::move(mu_tau), env, std::move(fx), std::move(fv), std::move(base)};
}

// ---- envelope property checks ----

bool EnvelopeReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const EnvelopeCheck& c) { return c.passed; });
}

EnvelopeReport evaluate_envelope(const DensityField& rho0, const DensityField& rho1, double tau, double slack,
                                 const ProxOptions& opt) {
  const std::size_t m = opt.lattice_factor * std::size_t(rho0.grid().n());
  const auto P0 = smooth_quantiles(rho0, m);
  auto P1 = smooth_quantiles(rho1, m);
  const auto match = match_particles(P0, P1);
  P1 = rotate(P1, match.shift);
  const double w2sq = match.cost, w2 = std::sqrt(w2sq);

  Quantile1D U{std::vector<double>(m), TransportMode::Torus};
  for (std::size_t k = 0; k < m; ++k) U.q[k] = (k + 0.5) / double(m);

  const auto e0 = prox_particles(P0, tau, opt).envelope;
  const auto e1 = prox_particles(P1, tau, opt).envelope;
  EnvelopeReport rep;
  for (double t : {0.25, 0.5, 0.75}) {
    Quantile1D Pt{std::vector<double>(m), TransportMode::Torus};
    for (std::size_t k = 0; k < m; ++k) Pt.q[k] = (1.0 - t) * P0.q[k] + t * P1.q[k];
    const double et = prox_particles(Pt, tau, opt).envelope;
    const double rhs = (1.0 - t) * e0 + t * e1 - t * (1.0 - t) * w2sq / (2.0 * tau);
    rep.checks.push_back({"semiconcave_on_geodesic", et >= rhs - slack, t, et, rhs});
  }
  for (int end = 0; end < 2; ++end) {
    const double e = end == 0 ? e0 : e1;
    const double bound = match_particles(end == 0 ? P0 : P1, U).cost / (2.0 * tau);
    rep.checks.push_back({"envelope_nonnegative", e >= -slack, double(end), e, 0.0});
    rep.checks.push_back({"envelope_below_uniform_cost", e <= bound + slack, double(end), e, bound});
  }
  const double lip = w2 * (std::sqrt(2.0 * std::max(e0, 0.0) / tau) + w2 / (2.0 * tau));
  rep.checks.push_back({"local_lipschitz", std::abs(e1 - e0) <= lip + slack, 0.0, std::abs(e1 - e0), lip});
  return rep;
}

EnvelopeReport envelope_checks(const DensityField& rho0, const DensityField& rho1, double tau, double slack,
                               const ProxOptions& opt) {
  auto rep = evaluate_envelope(rho0, rho1, tau, slack, opt);
  for (const auto& c : rep.checks)
    if (!c.passed)
      fail(ErrorKind::PropertyViolation, "envelope check " + c.name + " fails at t = " + std::to_string(c.witness) +
                                             " (" + std::to_string(c.lhs) + " vs " + std::to_string(c.rhs) + ")");
  return rep;
}

}  // namespace bpl
