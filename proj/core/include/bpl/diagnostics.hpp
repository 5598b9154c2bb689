#pragma once

#include <span>
#include <string>
#include <vector>

#include "bpl/flow.hpp"
#include "bpl/prox.hpp"

namespace bpl {

// Lower estimate of ‖ξ‖₋₁: max over A_k = sin/cos(2πkx)/(2πk), k ≤ n/4, of |Σ ξ A_k h|.
// NonZeroAverage if |Σ ξ h| > 1e-8.
double dual_norm_lower(std::span<const double> xi, const TorusGrid& grid);

struct ZeroTauError {
  std::vector<double> pairings;  // ⟨0⃗^τ, A⟩ over the Fourier family
  double bound_lhs = 0.0;        // max |pairing|
  double bound_rhs = 0.0;        // 2(φ_τ(ρ̄) − φ(ρ^τ))
  double average = 0.0;          // ∫ 0⃗^τ
  // Same estimate with ∇φ(ρ̄) in place of ∇φ_τ(ρ̄); NaN when ρ̄ is too small for fisher_gradient.
  double bound_lhs_unrelaxed = 0.0;
  bool holds = true;
};
// 0⃗^τ = ρ̄ ∇φ_τ(ρ̄) − ρ^τ ξ^τ, with ξ^τ = (T − id)/τ and T the map ρ^τ → ρ̄. The first term uses the
// grid Moreau gradient, the second the prox particles. Throws PropertyViolation if bound_lhs > bound_rhs + slack.
ZeroTauError zero_tau_error(const ProxResult& prox, double slack = 1e-8);
ZeroTauError evaluate_zero_tau_error(const ProxResult& prox, double slack = 1e-8);

struct WeakResidualSeries {
  std::vector<double> t;                   // interior record times
  std::vector<double> norm;                // max over the family, per time
  std::vector<std::vector<double>> modes;  // per time, per test function
  double max = 0.0;
};
// ∂ₜ(ρ̄ū) + ∂ₓ∫v²f dv + ρ̄(V' + ∇φ_τ(ρ̄)) against the Fourier family, ∂ₜ by central differences over records.
WeakResidualSeries momentum_residual(const FlowTrace& trace);
// ∂ₜρ̄ + ∂ₓ(ρ̄ū), same construction.
WeakResidualSeries continuity_residual(const FlowTrace& trace);

struct RecordCheck {
  double t = 0.0;
  double identity_error = 0.0;  // |φ_τ − φ(ρ^τ) − W₂²/(2τ)|
  double energy_error = 0.0;    // |𝓗_τ(t) − 𝓗_τ(0)| / |𝓗_τ(0)|
  double fisher_bound_lhs = 0.0, fisher_bound_rhs = 0.0;  // τ/2‖∇φ_τ‖² + φ(ρ^τ) vs 𝓗(μ₀) + ‖V‖∞
  double jensen_lhs = 0.0, jensen_rhs = 0.0;              // ½∫ρ̄|ū|² vs 𝓗(μ₀) + ‖V‖∞
  ZeroTauError zero_tau;
};
struct TraceReport {
  std::vector<RecordCheck> records;
  bool identities_hold = true;  // slack 1e-8
  bool energy_holds = true;     // within the flow's drift bound
  bool fisher_bound_holds = true;
  bool jensen_holds = true;
  bool zero_tau_holds = true;
  std::string first_failure;
  bool all_passed() const {
    return identities_hold && energy_holds && fisher_bound_holds && jensen_holds && zero_tau_holds;
  }
};
// Evaluates every record (the 0⃗^τ bound re-solves the prox on the recorded marginal).
TraceReport check_trace(const FlowTrace& trace, double slack = 1e-8);

struct TauSweepMember {
  double tau = 0.0;
  double sup_w2 = 0.0;            // sup_t W₂(ρ̄_t, ρ_t^τ)
  double sup_w2_witness_t = 0.0;
  double sup_gap = 0.0;           // sup_t φ_τ(ρ̄) − φ(ρ^τ)
  double zero_tau_integral = 0.0; // ∫ lower-estimate of ‖0⃗^τ‖₋₁ dt (trapezoid over records)
  double w2_bound = 0.0;          // √(2τ(𝓗(μ₀) + ‖V‖∞))
  double modulus = 0.0;           // max W₂(ρ̄_t, ρ̄_s)/|t − s| over record pairs
  double modulus_bound = 0.0;     // √(2(𝓗(μ₀) + ‖V‖∞))
  double max_drift = 0.0;
  FlowTrace trace;
};
struct TauSweepReport {
  std::vector<TauSweepMember> members;
  double fitted_exponent = 0.0;  // slope of log sup_w2 against log τ
  double fitted_prefactor = 0.0;
  // pairwise[i][j] = max over common record times of W₂(ρ̄^{τ_i}_t, ρ̄^{τ_j}_t)
  std::vector<std::vector<double>> pairwise;
  bool bounds_hold = true;
};
// Runs the flow once per τ from the same initial data. Throws PropertyViolation naming (τ, t) when
// W₂² exceeds 2τ(𝓗(μ₀) + ‖V‖∞) + slack or the equicontinuity modulus is broken.
// Members run concurrently, at most `threads` at a time (0: all at once).
TauSweepReport tau_sweep(const FlowConfig& base, const std::vector<double>& taus, double slack = 1e-8,
                         int threads = 0);
TauSweepReport evaluate_tau_sweep(const FlowConfig& base, const std::vector<double>& taus, double slack = 1e-8,
                                  int threads = 0);

}  // namespace bpl
