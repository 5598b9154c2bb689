#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace bpl {

namespace detail {
class PackModel;
}

// The function system F → A(α) = ∫ F(|v|²/2 + α) dv → b = −A⁻¹ → B = ∫₀ b.
class KineticsPack {
 public:
  enum class Kind { Exponential, Tabulated, Custom };

  // F(t) = e^{-t}; A = C e^{-α}, C = (2π)^{D/2}.
  static KineticsPack exponential(int D);
  // F sampled at strictly increasing t with strictly decreasing positive values;
  // log F is interpolated piecewise linearly and extrapolated linearly at both ends.
  static KineticsPack tabulated(int D, std::vector<std::pair<double, double>> f_samples);
  // Arbitrary callables, used to exercise the validator (no F).
  static KineticsPack custom(int D, std::function<double(double)> a, std::function<double(double)> b,
                             std::function<double(double)> big_b, std::string name = "custom");

  Kind kind() const;
  int dimension() const;
  std::string name() const;
  // The exponential example's constant; NaN for other kinds.
  double c() const;

  double f(double t) const;
  double a_of(double alpha) const;
  double b_of(double s) const;
  double big_b_of(double s) const;
  // Closed-form Legendre transform B*(y) where available (exp pack); NaN otherwise.
  double legendre_b_star(double y) const;

 private:
  explicit KineticsPack(std::shared_ptr<const detail::PackModel> m) : model_(std::move(m)) {}
  std::shared_ptr<const detail::PackModel> model_;
};

// |S^{D-1}| = 2π^{D/2}/Γ(D/2).
double sphere_area(int D);

struct PackCheck {
  std::string name;
  bool passed = true;
  double witness = 0.0;  // s (or α) of the worst case
  double lhs = 0.0;      // at the witness
  double rhs = 0.0;
};

struct ValidationReport {
  double lambda_bar1 = 0.0;
  double lambda_bar2 = 0.0;
  double lambda1 = 0.0;
  double t1 = 0.0;
  double lambda_bar1_reference = 0.0;  // 4/|S^{D-1}|^{1/D}, informational
  bool matches_reference = false;
  double inf_b = 0.0;
  std::vector<PackCheck> checks;
  bool all_passed() const;
  const PackCheck* find(const std::string& name) const;
};

struct ValidationLattice {
  std::vector<double> s;
  std::vector<double> alpha;
  // Log-spaced s over [1e-4, 1e4] and a uniform α lattice over [-10, 10].
  static ValidationLattice standard(int s_points = 33, int alpha_points = 41);
};

// Evaluates every check and reports; never throws on a failed inequality.
ValidationReport evaluate_pack(const KineticsPack& pack, const ValidationLattice& lattice);
// As evaluate_pack, but throws PropertyViolation naming the first failed check and its witness.
ValidationReport validate_pack(const KineticsPack& pack, const ValidationLattice& lattice);

}  // namespace bpl
