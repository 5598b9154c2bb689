#pragma once

#include <string>
#include <vector>

#include "bpl/grid_measures.hpp"
#include "bpl/transport.hpp"

namespace bpl {

// Fisher functional of the particle lattice q (torus): with gaps Δ_k = q_{k+1} − q_k,
// Σ_k ln²(Δ_{k+1}/Δ_k) / (8 m Δ_k Δ_{k+1}), the lattice form of (1/8)∫ Q''²/Q'⁴ ds.
double particle_fisher(const Quantile1D& q);

struct ProxOptions {
  std::size_t lattice_factor = 4;   // m = lattice_factor · n
  double gradient_tol = 1e-9;       // L²(ds) norm of the objective gradient
  double decrement_tol = 1e-24;     // squared Newton decrement
  // Also stop once the decrement stagnates below stagnation_rel·|J| (rounding floor of the gradient).
  double stagnation_rel = 1e-15;
  int max_iterations = 5000;
  double positivity_floor = 1e-10;
};

struct ParticleProx {
  Quantile1D q;
  double w2sq = 0.0, phi = 0.0, envelope = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0, decrement_sq = 0.0;
  int repairs = 0;
};
// Minimizes (1/(2τm)) Σ (P_k − q_k)² + particle_fisher(q) over torus lattices q.
ParticleProx prox_particles(const Quantile1D& P, double tau, const ProxOptions& opt = {});

struct ProxResult {
  DensityField rho;
  double tau = 0.0;
  DensityField rho_tau;
  MonotoneMap1D map;            // ρ → ρ^τ, values t(x_i)
  Quantile1D source_particles;  // P_k = Q_ρ((k+½)/m)
  Quantile1D particles;         // q_k, paired with P_k
  double w2sq = 0.0;            // (1/m) Σ (P_k − q_k)²
  double phi_at_prox = 0.0;     // particle_fisher(q)
  double phi_at_source = 0.0;   // particle_fisher(P)
  double envelope = 0.0;        // phi_at_prox + w2sq / (2τ)
  std::vector<double> grad;            // (x_i − t(x_i)) / τ on the grid
  std::vector<double> grad_particles;  // (P_k − q_k) / τ
  int iterations = 0;
  double gradient_norm = 0.0;
  double decrement_sq = 0.0;
  int repairs = 0;  // re-solves after the post-hoc pairing check found a better rotation

  // ‖∇φ_τ‖²_{L²(ρ)} in the particle measure, = w2sq / τ².
  double grad_norm_sq() const;
};

// J_τ(ρ) = argmin_ν W₂²(ρ,ν)/(2τ) + φ(ν) on the 1D torus, solved by damped Newton in quantile coordinates.
ProxResult prox(const DensityField& rho, double tau, const ProxOptions& opt = {});
// (x − t(x))/τ.
std::vector<double> moreau_gradient(const DensityField& rho, double tau, const ProxOptions& opt = {});

struct LiftedProx {
  PhaseDensity mu_tau;
  double envelope = 0.0;
  std::vector<double> force_x;  // moreau gradient per phase cell (constant along v)
  std::vector<double> force_v;  // identically zero
  ProxResult base;
};
LiftedProx lifted_prox(const PhaseDensity& mu, double tau, const ProxOptions& opt = {});

struct EnvelopeCheck {
  std::string name;
  bool passed = true;
  double witness = 0.0;  // t on the geodesic, or 0
  double lhs = 0.0, rhs = 0.0;
};
struct EnvelopeReport {
  std::vector<EnvelopeCheck> checks;
  bool all_passed() const;
};
// Semiconcavity along the geodesic ρ₀ → ρ₁ at t ∈ {¼, ½, ¾}, 0 ≤ φ_τ ≤ W₂²(ρ, uniform)/(2τ) for both
// endpoints, and the local Lipschitz bound. Throws PropertyViolation naming the first failure.
EnvelopeReport envelope_checks(const DensityField& rho0, const DensityField& rho1, double tau, double slack = 1e-6,
                               const ProxOptions& opt = {});
// As above without throwing.
EnvelopeReport evaluate_envelope(const DensityField& rho0, const DensityField& rho1, double tau, double slack = 1e-6,
                                 const ProxOptions& opt = {});

}  // namespace bpl
