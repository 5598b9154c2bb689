#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "bpl/grid_measures.hpp"

namespace bpl {

enum class TransportMode { Interval, Torus };

// ---- exact 1D transport between cell-constant densities ------------------------------------

// Piecewise-linear quantile function on [0,1] with jumps allowed between pieces.
// Torus lift: Q(s + k) = Q(s) + k. Evaluation is left-continuous at breaks.
class PiecewiseQuantile {
 public:
  struct Piece {
    double s0, s1, x0, x1;
  };
  explicit PiecewiseQuantile(std::vector<Piece> pieces);
  // Quantile of a cell-constant density (zero-mass cells produce jumps).
  static PiecewiseQuantile from_density(const DensityField& rho);

  double operator()(double s) const;
  // Generalized inverse (lifted in x).
  double cdf(double x) const;
  const std::vector<Piece>& pieces() const { return pieces_; }
  std::vector<double> breaks() const;

 private:
  std::vector<Piece> pieces_;
};

class MonotoneMap1D {
 public:
  MonotoneMap1D(DensityField source, DensityField target, std::vector<double> values, TransportMode mode,
                double cut = 0.0);
  const DensityField& source() const { return source_; }
  const DensityField& target() const { return target_; }
  // t(x_i) per source cell; in torus mode the lifted value (t - x stays small), reduce mod 1 for positions.
  const std::vector<double>& values() const { return values_; }
  TransportMode mode() const { return mode_; }
  double cut() const { return cut_; }

 private:
  DensityField source_, target_;
  std::vector<double> values_;
  TransportMode mode_;
  double cut_;
};

struct W2Result {
  double distance = 0.0;
  double cost = 0.0;  // distance²
  MonotoneMap1D map;
};

// ∫₀¹ |Q_a(s) − Q_b(s + α)|² ds, exact (both sides linear between merged breaks).
double cut_cost(const PiecewiseQuantile& qa, const PiecewiseQuantile& qb, double alpha);
// Golden-section minimizer of cut_cost over α ∈ [−1, 1], tolerance 1e−10.
double optimal_cut(const PiecewiseQuantile& qa, const PiecewiseQuantile& qb);

struct QuantileDistance {
  double distance = 0.0;
  double cut = 0.0;
};
QuantileDistance w2_quantile(const PiecewiseQuantile& qa, const PiecewiseQuantile& qb, TransportMode mode);

W2Result w2_1d(const DensityField& rho, const DensityField& eta, TransportMode mode);
DensityField geodesic(const DensityField& rho, const DensityField& eta, double t, TransportMode mode);
// (1−t)Q_ρ(s) + tQ_η(s + α*) before projection to the grid.
PiecewiseQuantile geodesic_quantile(const DensityField& rho, const DensityField& eta, double t, TransportMode mode);
// Exact cell averages of the density with quantile q.
DensityField quantile_to_density(const PiecewiseQuantile& q, const TorusGrid& grid, TransportMode mode);

// ---- particle (quantile-lattice) representation ------------------------------------------

// q_k = Q((k+½)/m), k = 0..m−1; in torus mode extended as q_{k+m} = q_k + 1.
struct Quantile1D {
  std::vector<double> q;
  TransportMode mode = TransportMode::Torus;

  std::size_t m() const { return q.size(); }
  double s(std::size_t k) const { return (k + 0.5) / double(q.size()); }
  // Periodic lift for any integer index (torus mode).
  double at(long k) const;
  // Lifted CDF of the piecewise-linear interpolant through (q_k, s_k).
  double cdf(double x) const;
  // Linear interpolation of Q at any s (lifted).
  double value(double s) const;
};

Quantile1D quantiles(const DensityField& rho, std::size_t m, TransportMode mode = TransportMode::Torus);

// Real trigonometric interpolant of period 1 through samples at x_j = (j + offset)/N.
class PeriodicTrig {
 public:
  PeriodicTrig() = default;
  PeriodicTrig(const std::vector<double>& samples, double offset);
  double operator()(double x, double* deriv = nullptr) const;

 private:
  std::vector<double> a_, b_;
};

// Smooth periodic CDF reproducing the exact cell masses: F(x) = x + G(x) with G trigonometrically
// interpolated from the cell-edge values, or monotone cubic Hermite (Fritsch–Carlson) when the
// trigonometric reconstruction is not positive.
class SmoothCdf {
 public:
  explicit SmoothCdf(const DensityField& rho);
  double operator()(double x) const;  // lifted: F(x + 1) = F(x) + 1
  double density(double x) const;
  double quantile(double s) const;
  bool spectral() const { return spectral_; }

 private:
  double periodic(double x, double* deriv) const;
  int n_;
  bool spectral_ = true;
  std::vector<double> edge_;   // F at x_j = j/n, j = 0..n
  PeriodicTrig g_;
  std::vector<double> slope_;  // Hermite slopes F'(x_j)
};
// Particle lattice q_k = F⁻¹((k+½)/m) of the smooth reconstruction (torus mode).
Quantile1D smooth_quantiles(const SmoothCdf& cdf, std::size_t m);
Quantile1D smooth_quantiles(const DensityField& rho, std::size_t m);
// Cell averages of the density whose quantile trigonometrically interpolates the torus lattice q;
// falls back to to_density when that interpolant is not monotone.
DensityField smooth_to_density(const Quantile1D& q, const TorusGrid& grid);
// Cell averages of the piecewise-linear CDF through (q_k, s_k).
DensityField to_density(const Quantile1D& q, const TorusGrid& grid);

struct ParticleMatch {
  double cost = 0.0;  // (1/m) Σ (q_{k+shift} − p_k)²
  long shift = 0;
};
// Optimal pairing of two equal-size particle sets (cyclic shifts in torus mode, identity otherwise).
ParticleMatch match_particles(const Quantile1D& p, const Quantile1D& q);
// q re-indexed so that index pairing with p is optimal.
Quantile1D rotate(const Quantile1D& q, long shift);

// ---- discrete transport ---------------------------------------------------------------------

struct WeightedPoints {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
};

struct DiscretePlan {
  WeightedPoints source, target;
  std::vector<std::vector<double>> coupling;  // source.size() x target.size()
};

struct TransportSolution {
  double cost = 0.0;
  std::vector<std::vector<double>> plan;
  int pivots = 0;
};

// Exact transportation simplex (Dantzig entering rule, lexicographic ties, Bland fallback).
TransportSolution solve_transport(const std::vector<std::vector<double>>& cost, const std::vector<double>& supply,
                                  const std::vector<double>& demand);

struct DiscreteW2 {
  double distance = 0.0;
  DiscretePlan plan;
};
DiscreteW2 w2_discrete(const WeightedPoints& mu, const WeightedPoints& nu);

// Conditional mean of the opposite side given each support point of `base`.
enum class PlanSide { Source, Target };
std::vector<std::vector<double>> barycentric_projection(const DiscretePlan& plan, PlanSide base);

struct MonotonicityWitness {
  bool ok = true;
  std::size_t a = 0, b = 0, c = 0;  // support indices (flattened i*n + j)
  double excess = 0.0;
};
// Checks Σ|x_k − y_k|² ≤ Σ|x_k − y_σ(k)|² for all triples of support pairs and permutations σ.
MonotonicityWitness check_cyclical_monotonicity(const DiscretePlan& plan, double tol = 1e-12);

// Sparse triples (i, j, weight).
struct PlanEntry {
  std::size_t i, j;
  double w;
};
void write_plan_csv(std::ostream& os, const std::vector<PlanEntry>& entries);
std::vector<PlanEntry> plan_entries(const DiscretePlan& plan, double threshold = 0.0);

// Monotone (cut α) coupling of two cell masses on the circle: γ_ij = |I_i ∩ (J_j + α)|.
std::vector<PlanEntry> monotone_cell_plan(const DensityField& rho, const DensityField& eta, double alpha,
                                          TransportMode mode);

// ---- lifted plans -----------------------------------------------------------------------------

struct PhaseAtom {
  std::vector<double> x, v;
  double w;
};

struct LiftedPlan {
  // G^{μ,γ}: pairs ((x, v), (y, v)) with weights.
  struct Pair {
    std::vector<double> x, y, v;
    double w;
  };
  std::vector<Pair> g;
  std::vector<PhaseAtom> m;  // m^{μ,γ}
  WeightedPoints base_source, base_target;
};

// Base marginal of discrete phase atoms (merging equal positions).
WeightedPoints position_marginal(const std::vector<PhaseAtom>& mu);
// γ on base points must have first marginal equal to π¹_# μ within 1e−10.
LiftedPlan lift_plan(const std::vector<PhaseAtom>& mu, const DiscretePlan& gamma);
WeightedPoints phase_points(const std::vector<PhaseAtom>& atoms);

struct LiftChecks {
  bool supported_on_diagonal = true;  // velocity coordinates equal on every atom of G
  double marginal_error = 0.0;        // max |π¹_# m − η|
  double w2_base = 0.0;               // W₂(ϱ, η) under γ
  double w2_lift = 0.0;               // W₂(μ, m) from the exact solver
};
// Recomputes both distances with w2_discrete; w2_base is the cost of γ itself.
LiftChecks verify_lift(const std::vector<PhaseAtom>& mu, const LiftedPlan& lp, const DiscretePlan& gamma);

// Grid version: f^τ(y_j, v) = Σ_i f(x_i, v) γ_ij / ρ_i, velocities unchanged.
PhaseDensity lift_phase_density(const PhaseDensity& mu, const DensityField& target, const std::vector<PlanEntry>& plan);

}  // namespace bpl
