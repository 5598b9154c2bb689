#include "bpl/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bpl/errors.hpp"
#include "bpl/stencil.hpp"

namespace bpl {

namespace {

std::vector<double> sqrt_of(const DensityField& rho) {
  std::vector<double> u(rho.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sqrt(rho[i]);
  return u;
}

}  // namespace

double fisher(const DensityField& rho) {
  const auto& g = rho.grid();
  const auto u = sqrt_of(rho);
  double s = 0.0;
  for (int a = 0; a < g.d(); ++a)
    for (double du : diff(u, g, a)) s += du * du;
  return 0.5 * s * g.cell_volume();
}

FisherEval fisher_eval(const DensityField& rho, double floor) {
  const auto& g = rho.grid();
  FisherEval out;
  out.value = fisher(rho);
  std::vector<double> grad2(rho.size(), 0.0);
  for (int a = 0; a < g.d(); ++a) {
    auto dr = diff(rho.values(), g, a);
    for (std::size_t i = 0; i < dr.size(); ++i) grad2[i] += dr[i] * dr[i];
  }
  double s = 0.0;
  for (std::size_t i = 0; i < grad2.size(); ++i) {
    if (rho[i] < floor && std::sqrt(grad2[i]) < floor) continue;
    s += grad2[i] / (2.0 * std::max(rho[i], floor));
  }
  out.l_form = 0.25 * s * g.cell_volume();
  const double scale = std::max(std::abs(out.value), std::abs(out.l_form));
  out.relative_gap = scale > 0.0 ? std::abs(out.value - out.l_form) / scale : 0.0;
  return out;
}

FisherGradient fisher_gradient(const DensityField& rho, double floor) {
  const auto& g = rho.grid();
  const int d = g.d();
  if (rho.min() < floor)
    fail(ErrorKind::PositivityError, "fisher_gradient needs rho >= " + std::to_string(floor) + ", min is " +
                                         std::to_string(rho.min()));
  const std::size_t nc = rho.size();
  const auto u = sqrt_of(rho);
  const auto lap_u = laplacian(u, g);

  FisherGradient out;
  out.bohm.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) out.bohm[i] = -0.5 * lap_u[i] / u[i];
  out.field.assign(nc * d, 0.0);
  for (int a = 0; a < d; ++a) {
    auto dq = diff(out.bohm, g, a);
    for (std::size_t i = 0; i < nc; ++i) out.field[i * d + a] = dq[i];
  }

  // ϱ∇φ = −¼∇Δϱ + div(∇√ϱ ⊗ ∇√ϱ).
  const auto lap_rho = laplacian(rho.values(), g);
  std::vector<std::vector<double>> du(d);
  for (int a = 0; a < d; ++a) du[a] = diff(u, g, a);
  out.divergence_form.assign(nc * d, 0.0);
  for (int a = 0; a < d; ++a) {
    auto t = diff(lap_rho, g, a);
    std::vector<double> acc(nc);
    for (std::size_t i = 0; i < nc; ++i) acc[i] = -0.25 * t[i];
    for (int b = 0; b < d; ++b) {
      std::vector<double> tab(nc);
      for (std::size_t i = 0; i < nc; ++i) tab[i] = du[a][i] * du[b][i];
      auto dt = diff(tab, g, b);
      for (std::size_t i = 0; i < nc; ++i) acc[i] += dt[i];
    }
    for (std::size_t i = 0; i < nc; ++i) {
      out.divergence_form[i * d + a] = acc[i] / rho[i];
      out.max_gap = std::max(out.max_gap, std::abs(out.divergence_form[i * d + a] - out.field[i * d + a]));
    }
  }
  return out;
}

}  // namespace bpl
