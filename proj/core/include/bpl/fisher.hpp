#pragma once

#include <vector>

#include "bpl/grid_measures.hpp"

namespace bpl {

constexpr double kFisherFloor = 1e-10;
constexpr double kGradientFloor = 1e-8;

// φ(ρ) = ½ Σ |D√ρ|² h^d with the fourth-order periodic difference D.
double fisher(const DensityField& rho);

struct FisherEval {
  double value = 0.0;   // ½ Σ |D√ρ|² h^d
  double l_form = 0.0;  // ¼ Σ L(ρ, Dρ) h^d, L(ρ, ξ) = |ξ|²/(2ρ)
  double relative_gap = 0.0;
};
// Both discretizations; cells with ρ < floor use the floored ratio, or 0 when |Dρ| is also below floor.
FisherEval fisher_eval(const DensityField& rho, double floor = kFisherFloor);

struct FisherGradient {
  std::vector<double> field;            // −½ D(Δ√ρ/√ρ), component-interleaved (cell*d + axis)
  std::vector<double> bohm;             // −½ Δ√ρ/√ρ
  std::vector<double> divergence_form;  // (−¼ DΔρ + div(D√ρ ⊗ D√ρ)) / ρ
  double max_gap = 0.0;                 // sup-norm difference of the two forms
};
// Throws PositivityError if min ρ < floor.
FisherGradient fisher_gradient(const DensityField& rho, double floor = kGradientFloor);

}  // namespace bpl
