#include <algorithm>
#include <cmath>
#include <map>

#include "bpl/errors.hpp"
#include "bpl/transport.hpp"

namespace bpl {

namespace {

constexpr double kLiftTol = 1e-10;

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

WeightedPoints position_marginal(const std::vector<PhaseAtom>& mu) {
  std::map<std::vector<double>, double> acc;
  for (const auto& a : mu) acc[a.x] += a.w;
  WeightedPoints out;
  for (auto& [x, w] : acc) {
    out.points.push_back(x);
    out.weights.push_back(w);
  }
  return out;
}

WeightedPoints phase_points(const std::vector<PhaseAtom>& atoms) {
  WeightedPoints out;
  for (const auto& a : atoms) {
    out.points.push_back(concat(a.x, a.v));
    out.weights.push_back(a.w);
  }
  return out;
}

LiftedPlan lift_plan(const std::vector<PhaseAtom>& mu, const DiscretePlan& gamma) {
  const auto rho = position_marginal(mu);
  const auto& src = gamma.source.points;
  const std::size_t n = gamma.target.points.size();

  // Row sums of γ must reproduce the base marginal of μ.
  std::vector<double> row(src.size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) row[i] += gamma.coupling[i][j];
  std::vector<long> index_of(rho.points.size(), -1);
  for (std::size_t r = 0; r < rho.points.size(); ++r) {
    auto it = std::find(src.begin(), src.end(), rho.points[r]);
    if (it == src.end()) fail(ErrorKind::MarginalMismatch, "base plan has no source atom at a position of μ");
    index_of[r] = long(it - src.begin());
    if (std::abs(row[index_of[r]] - rho.weights[r]) > kLiftTol)
      fail(ErrorKind::MarginalMismatch, "first marginal of γ differs from the position marginal of μ");
  }
  for (std::size_t i = 0; i < src.size(); ++i)
    if (row[i] > kLiftTol && std::find(rho.points.begin(), rho.points.end(), src[i]) == rho.points.end())
      fail(ErrorKind::MarginalMismatch, "γ carries mass where μ has none");

  LiftedPlan lp;
  lp.base_source = gamma.source;
  lp.base_target = gamma.target;
  std::map<std::pair<std::vector<double>, std::vector<double>>, double> m_acc;
  for (const auto& a : mu) {
    const std::size_t i = std::find(src.begin(), src.end(), a.x) - src.begin();
    for (std::size_t j = 0; j < n; ++j) {
      const double g = gamma.coupling[i][j];
      if (!(g > 0.0)) continue;
      const double w = a.w * g / row[i];
      lp.g.push_back({a.x, gamma.target.points[j], a.v, w});
      m_acc[{gamma.target.points[j], a.v}] += w;
    }
  }
  for (auto& [key, w] : m_acc) lp.m.push_back({key.first, key.second, w});
  return lp;
}

LiftChecks verify_lift(const std::vector<PhaseAtom>& mu, const LiftedPlan& lp, const DiscretePlan& gamma) {
  LiftChecks out;
  // Each pair stores one velocity for both ends, so G lives on {v = w} by construction;
  // confirm the stored pairs reproduce μ as first marginal.
  std::map<std::pair<std::vector<double>, std::vector<double>>, double> first;
  for (const auto& p : lp.g) first[{p.x, p.v}] += p.w;
  for (const auto& a : mu) {
    auto it = first.find({a.x, a.v});
    double got = it == first.end() ? 0.0 : it->second;
    if (std::abs(got - a.w) > kLiftTol) out.supported_on_diagonal = false;
  }
  // π¹_# m against η.
  std::map<std::vector<double>, double> eta;
  for (const auto& a : lp.m) eta[a.x] += a.w;
  for (std::size_t j = 0; j < gamma.target.points.size(); ++j) {
    double got = eta.count(gamma.target.points[j]) ? eta[gamma.target.points[j]] : 0.0;
    out.marginal_error = std::max(out.marginal_error, std::abs(got - gamma.target.weights[j]));
  }
  double c = 0.0;
  for (std::size_t i = 0; i < gamma.source.points.size(); ++i)
    for (std::size_t j = 0; j < gamma.target.points.size(); ++j)
      c += gamma.coupling[i][j] * sqdist(gamma.source.points[i], gamma.target.points[j]);
  out.w2_base = std::sqrt(c);
  out.w2_lift = w2_discrete(phase_points(mu), phase_points(lp.m)).distance;
  return out;
}

std::vector<PlanEntry> monotone_cell_plan(const DensityField& rho, const DensityField& eta, double alpha,
                                          TransportMode mode) {
  const int n = rho.grid().n();
  if (eta.grid().n() != n) fail(ErrorKind::InvalidArgument, "monotone_cell_plan: grids differ");
  const double h = rho.grid().h();
  auto cumulative = [&](const DensityField& f) {
    std::vector<double> c(n + 1, 0.0);
    for (int i = 0; i < n; ++i) c[i + 1] = c[i] + f[i] * h;
    for (double& x : c) x /= c[n];
    c[n] = 1.0;
    return c;
  };
  const auto A = cumulative(rho), B = cumulative(eta);
  if (mode == TransportMode::Interval) alpha = 0.0;

  // Target cell j covers s ∈ [B_j − α + k, B_{j+1} − α + k] in source-quantile coordinates.
  struct Span {
    double lo, hi;
    std::size_t j;
  };
  std::vector<Span> spans;
  const int kmin = mode == TransportMode::Torus ? -2 : 0, kmax = mode == TransportMode::Torus ? 2 : 0;
  for (int k = kmin; k <= kmax; ++k)
    for (int j = 0; j < n; ++j) {
      double lo = B[j] - alpha + k, hi = B[j + 1] - alpha + k;
      if (hi > lo && hi > 0.0 && lo < 1.0) spans.push_back({lo, hi, std::size_t(j)});
    }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.lo < b.lo; });

  std::vector<PlanEntry> out;
  std::size_t p = 0;
  for (int i = 0; i < n; ++i) {
    if (!(A[i + 1] > A[i])) continue;
    while (p < spans.size() && spans[p].hi <= A[i]) ++p;
    for (std::size_t q = p; q < spans.size() && spans[q].lo < A[i + 1]; ++q) {
      double w = std::min(A[i + 1], spans[q].hi) - std::max(A[i], spans[q].lo);
      if (w > 0.0) out.push_back({std::size_t(i), spans[q].j, w});
    }
  }
  return out;
}

PhaseDensity lift_phase_density(const PhaseDensity& mu, const DensityField& target, const std::vector<PlanEntry>& plan) {
  const auto rho = marginal_x(mu);
  const std::size_t nv = mu.vbox().cells();
  const double hx = mu.xgrid().cell_volume();
  std::vector<double> f(mu.values().size(), 0.0);
  for (const auto& e : plan) {
    if (!(rho[e.i] > 0.0)) fail(ErrorKind::MarginalMismatch, "plan moves mass from an empty cell");
    // Conditional velocity density of slice i, carried unchanged to cell j.
    const double scale = e.w / (hx * rho[e.i]);
    for (std::size_t iv = 0; iv < nv; ++iv) f[e.j * nv + iv] += scale * mu.values()[e.i * nv + iv];
  }
  auto out = normalize_phase(std::move(f), mu.xgrid(), mu.vbox(), mu.leak_tol());
  const auto got = marginal_x(out);
  for (std::size_t j = 0; j < got.size(); ++j)
    if (std::abs(got[j] - target[j]) > 1e-9 * std::max(1.0, target[j]))
      fail(ErrorKind::MarginalMismatch, "lifted density does not have the target marginal");
  return out;
}

}  // namespace bpl
