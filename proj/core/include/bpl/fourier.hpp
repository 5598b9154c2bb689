#pragma once

#include <span>
#include <vector>

#include "bpl/grid_measures.hpp"

namespace bpl {

// Test family A_k = sin(2πkx)/(2πk), cos(2πkx)/(2πk) for k = 1..k_max; each has ‖A_k'‖_∞ = 1.
struct TestFunction {
  int k;
  bool cosine;
  double value(double x) const;
  double derivative(double x) const;
};

std::vector<TestFunction> fourier_family(int k_max);
// Default family for an n-cell grid: k <= n/4.
std::vector<TestFunction> fourier_family_for(const TorusGrid& grid);

// ⟨ξ, A⟩ = Σ ξ_i A(x_i) h for a 1D grid field.
double pair_with(std::span<const double> xi, const TorusGrid& grid, const TestFunction& a);

}  // namespace bpl
