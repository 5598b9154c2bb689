#pragma once

#include <vector>

#include "bpl/grid_measures.hpp"
#include "bpl/potential.hpp"
#include "bpl/prox.hpp"

namespace bpl {

// f₀(x, v) = (1 + amplitude·cos(2πkx)) g(v), g a Gaussian of width sigma centred at mean.
struct InitialSpec {
  double amplitude = 0.0;
  int frequency = 1;
  double sigma = 1.0;
  double mean = 0.0;
};

struct FlowConfig {
  int n_x = 128, n_v = 128;
  double v_max = 6.0;
  double tau = 0.1;
  double dt = 5e-4;
  double t_end = 0.25;
  Potential potential;
  InitialSpec initial;
  int record_every = 10;
  bool bohm_enabled = true;
  double drift_bound = 1e-3;  // relative 𝓗_τ drift, DriftExceeded above it
  double bulk_v = 3.0;        // min/max of f are taken over |v| ≤ bulk_v
  bool keep_snapshots = false;
  double leak_tol = kDefaultLeakTol;
  ProxOptions prox;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Per-x fields kept at every record for the weak-form residuals.
struct RecordFields {
  DensityField rho;
  std::vector<double> momentum;     // ∫ v f dv
  std::vector<double> stress;       // ∫ v² f dv
  std::vector<double> moreau_grad;  // (x − t(x))/τ, zeros with the proximal term off
  DensityField rho_tau;
};

struct FlowRecord {
  int step = 0;
  double t = 0.0;
  double mass = 1.0;        // mass without the per-step renormalizations
  double H_tau = 0.0;       // kinetic + φ_τ + potential
  double kinetic = 0.0;     // ½∫|v|² dμ
  double potential = 0.0;   // Σ V ρ h
  double phi_tau = 0.0;     // φ_τ(ρ̄)
  double fisher_prox = 0.0; // φ(ρ^τ)
  double w2_prox = 0.0;     // W₂(ρ̄, ρ^τ)
  double slope_norm = 0.0;  // ‖∇φ_τ‖_{L²(ρ̄)}
  double min_f = 0.0, max_f = 0.0;
  double theta_moment = 0.0;  // ∫ f² dx dv
  double mean_kinetic = 0.0;  // ½∫ ρ̄ |ū|²
  double clamp_mass = 0.0;    // negative mass removed since the previous record
};

struct FlowTrace {
  FlowConfig config;
  std::vector<FlowRecord> records;
  std::vector<RecordFields> fields;
  std::vector<PhaseDensity> snapshots;  // with keep_snapshots
  double H_full0 = 0.0;                 // 𝓗(μ₀) = kinetic + φ(ρ₀) + potential
  double max_drift = 0.0;
};

PhaseDensity initial_state(const FlowConfig& config);

// 𝓗_τ(μ) = ½∫|v|² dμ + φ_τ(ρ) + Σ V ρ h.
double hamiltonian_tau(const PhaseDensity& mu, double tau, const Potential& V, const ProxOptions& opt = {});
// 𝓗(μ) with φ in place of φ_τ.
double hamiltonian(const PhaseDensity& mu, const Potential& V);

// a(x) = −V'(x) − (x − t(x))/τ at cell centres; −V' alone with the proximal term off.
std::vector<double> force_field(const PhaseDensity& mu, double tau, const Potential& V, bool bohm_enabled = true,
                                const ProxOptions& opt = {});

struct StepInfo {
  double clamp_mass = 0.0;    // negative mass clamped to zero
  double mass_factor = 1.0;   // mass before renormalization
};

// One Strang step: x-advection dt/2, v-kick dt with the force at the half-step marginal, x-advection dt/2.
PhaseDensity step(const PhaseDensity& mu, double dt, double tau, const Potential& V, bool bohm_enabled = true,
                  StepInfo* info = nullptr, const ProxOptions& opt = {});

struct MeasuredState {
  FlowRecord record;  // step, t, mass and clamp_mass left at their defaults
  RecordFields fields;
};
// Energies, prox quantities, bulk bounds and moments of one state.
MeasuredState measure_state(const PhaseDensity& mu, const FlowConfig& config);

// Throws DriftExceeded when the relative 𝓗_τ drift passes config.drift_bound.
FlowTrace run(const FlowConfig& config);
// As run(), starting from the given state.
FlowTrace run_from(const FlowConfig& config, const PhaseDensity& mu0);

// Semi-Lagrangian building blocks: f(x − shift) by cubic B-splines, shift in grid units.
std::vector<double> shift_periodic(const std::vector<double>& f, double shift);
// Zero outside the row.
std::vector<double> shift_clamped(const std::vector<double>& f, double shift);

}  // namespace bpl
