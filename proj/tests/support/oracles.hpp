#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bpl/grid_measures.hpp"
#include "bpl/transport.hpp"

namespace bpl::testing {

// Discrete circle OT between cell masses, solved as an LP on the wrapped cost matrix.
inline double lp_circle_distance(const DensityField& a, const DensityField& b) {
  const int n = a.grid().n();
  std::vector<std::vector<double>> c(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double d = std::abs(a.grid().center(i) - a.grid().center(j));
      d = std::min(d, 1.0 - d);
      c[i][j] = d * d;
    }
  std::vector<double> wa(n), wb(n);
  for (int i = 0; i < n; ++i) {
    wa[i] = a[i] * a.grid().h();
    wb[i] = b[i] * b.grid().h();
  }
  return std::sqrt(solve_transport(c, wa, wb).cost);
}

// ∂ₓ(ρ ∂ₓ(−½ (√ρ)''/√ρ)) for ρ = 1 + a cos(2πx) at the cell centres of `coarse`,
// by 6th-order differences of point samples on an 8× finer grid.
inline std::vector<double> drift_rhs_oracle(const TorusGrid& coarse, double a) {
  const int refine = 8, N = coarse.n() * refine;
  const double H = 1.0 / N, off = 0.5 * coarse.h();
  auto d1 = [&](const std::vector<double>& f) {
    std::vector<double> o(N);
    for (int j = 0; j < N; ++j) {
      auto at = [&](int k) { return f[((j + k) % N + N) % N]; };
      o[j] = (45.0 * (at(1) - at(-1)) - 9.0 * (at(2) - at(-2)) + (at(3) - at(-3))) / (60.0 * H);
    }
    return o;
  };
  std::vector<double> rho(N), u(N);
  for (int j = 0; j < N; ++j) {
    rho[j] = 1.0 + a * std::cos(2.0 * M_PI * (j * H + off));
    u[j] = std::sqrt(rho[j]);
  }
  auto upp = d1(d1(u));
  std::vector<double> bohm(N);
  for (int j = 0; j < N; ++j) bohm[j] = -0.5 * upp[j] / u[j];
  auto field = d1(bohm);
  std::vector<double> flux(N);
  for (int j = 0; j < N; ++j) flux[j] = rho[j] * field[j];
  auto div = d1(flux);
  std::vector<double> out(coarse.n());
  for (int i = 0; i < coarse.n(); ++i) out[i] = div[i * refine];
  return out;
}

}  // namespace bpl::testing
