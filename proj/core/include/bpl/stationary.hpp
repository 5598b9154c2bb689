#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bpl/grid_measures.hpp"
#include "bpl/kinetics_pack.hpp"
#include "bpl/potential.hpp"

namespace bpl {

// E(ρ) = φ(ρ) + Σ (Vρ + B(ρ)) h^d.
double energy_E(const DensityField& rho, const Potential& V, const KineticsPack& pack);

struct ElResidual {
  // R = −½Δρ + |∇√ρ|² + 2(b(ρ)+V)ρ − 2ηρ
  std::vector<double> field;
  double dual_norm = 0.0;  // sup over the Fourier test family of |⟨R, A⟩|
  // Same norm of u(−Δu + 2(b+V)u − 2ηu), which vanishes exactly at discrete critical points; R
  // differs from it by O(h⁴). minimize_E stops on this one.
  double discrete_dual_norm = 0.0;
  double eta = 0.0;        // ½‖∇√ρ‖² + ∫(b(ρ)+V)ρ
  double eta_weak = 0.0;   // ½∫(R + 2ηρ), the multiplier recovered from the residual
  double l0sq = 0.0, l1 = 0.0;
};
ElResidual el_residual(const DensityField& rho, const Potential& V, const KineticsPack& pack);

enum class FixedPointScheme {
  // ρ ← (1−ω)ρ + ω A(V − η − ½Δ√ρ/√ρ), η by bisection for unit mass.
  Explicit,
  // ρ ← (1−ω)ρ + ω u², u the ground state of −½Δ + V + b(ρ) (η its eigenvalue).
  SelfConsistent,
};

struct StationaryOptions {
  double tol = 1e-6;  // discrete residual dual norm (minimize_E)
  int max_iterations = 20000;
  double floor = 1e-14;  // NonpositiveDensity below this
  std::optional<DensityField> initial;
  double omega = 0.3;
  double change_tol = 1e-9;  // sup-change (fixed point)
  FixedPointScheme scheme = FixedPointScheme::SelfConsistent;
};

struct StationaryResult {
  DensityField rho_s;
  double energy = 0.0;
  double eta_s = 0.0;
  double l0sq = 0.0, l1 = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  std::string method{};
  std::vector<double> energy_trace{};  // E at every accepted iterate (minimize_E)
  // ∫Vρ ≤ (E₀ − C_α)/(1−α) along the iterates, α = ½, C_α from ϱ_{∞,α} = A(αV − η_α).
  double v_moment_bound = 0.0;
  double v_moment_max = 0.0;
  double last_change = 0.0;  // fixed point
};

// Preconditioned gradient descent on u = √ρ over the unit sphere with Armijo backtracking.
StationaryResult minimize_E(const Potential& V, const KineticsPack& pack, const TorusGrid& grid,
                            const StationaryOptions& opt = {});
StationaryResult fixed_point_solve(const Potential& V, const KineticsPack& pack, const TorusGrid& grid,
                                   const StationaryOptions& opt = {});

struct LegendreReport {
  double min_energy = 0.0;     // E(ρ_s)
  double g_star = 0.0;         // sup over candidates of ∫(−V)ρ − G(ρ)
  std::string best_candidate;  // name of the maximizer
  double worst_excess = 0.0;   // max over candidates of value − value(ρ_s)
  int candidates = 0;
  bool passed = true;
};
// Sup of the Legendre pairing over ρ_s, uniform, 20 random smooth densities and Fourier line searches
// around ρ_s (modes 1..8). Throws PropertyViolation if a candidate beats ρ_s by more than tol.
LegendreReport legendre_check(const StationaryResult& result, const Potential& V, const KineticsPack& pack,
                              double tol = 1e-8);
LegendreReport evaluate_legendre(const StationaryResult& result, const Potential& V, const KineticsPack& pack,
                                 double tol = 1e-8);

}  // namespace bpl
