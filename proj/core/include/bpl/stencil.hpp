#pragma once

#include <span>
#include <vector>

#include "bpl/grid_measures.hpp"

namespace bpl {

// Fourth-order periodic central difference (-f[i+2] + 8f[i+1] - 8f[i-1] + f[i-2]) / 12h along one axis.
std::vector<double> diff(std::span<const double> f, const TorusGrid& grid, int axis = 0);
// D∘D, i.e. -DᵀD: the Laplacian consistent with the discrete Dirichlet form ½Σ|Df|²h^d.
std::vector<double> laplacian(std::span<const double> f, const TorusGrid& grid);
// Symbol of DᵀD on mode k of an n-point periodic axis.
double dtd_symbol(int k, int n, double h);

// Real symmetric circulant operator on a 1D periodic grid, applied through a cached kernel.
class Circulant {
 public:
  // symbol[k] for k = 0..n-1 (must satisfy symbol[k] == symbol[n-k]).
  explicit Circulant(std::vector<double> symbol);
  std::vector<double> apply(std::span<const double> f) const;
  int n() const { return int(kernel_.size()); }

 private:
  std::vector<double> kernel_;
};

}  // namespace bpl
