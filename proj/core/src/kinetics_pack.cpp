#include "bpl/kinetics_pack.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "bpl/errors.hpp"

namespace bpl {

namespace detail {

class PackModel {
 public:
  virtual ~PackModel() = default;
  virtual KineticsPack::Kind kind() const = 0;
  virtual std::string name() const = 0;
  virtual double f(double t) const = 0;
  virtual double a_of(double alpha) const = 0;
  virtual double b_of(double s) const = 0;
  virtual double big_b_of(double s) const = 0;
  virtual double c() const { return std::numeric_limits<double>::quiet_NaN(); }
  virtual double b_star(double) const { return std::numeric_limits<double>::quiet_NaN(); }
  int D = 1;
};

}  // namespace detail

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kQuadRelTol = 1e-10;

void require_positive(double s) {
  if (!(s > 0.0)) fail(ErrorKind::DomainError, "b(s) requires s > 0, got " + std::to_string(s));
}

class ExpPack final : public detail::PackModel {
 public:
  explicit ExpPack(int d) : c_(std::pow(2.0 * std::numbers::pi, 0.5 * d)) { D = d; }
  KineticsPack::Kind kind() const override { return KineticsPack::Kind::Exponential; }
  std::string name() const override { return "exp"; }
  double f(double t) const override { return std::exp(-t); }
  double a_of(double alpha) const override { return c_ * std::exp(-alpha); }
  double b_of(double s) const override {
    require_positive(s);
    return std::log(s / c_);
  }
  double big_b_of(double s) const override {
    if (s < 0.0) fail(ErrorKind::DomainError, "B(s) requires s >= 0");
    if (s == 0.0) return 0.0;
    return s * std::log(s / c_) - s;
  }
  double c() const override { return c_; }
  double b_star(double y) const override { return c_ * std::exp(y); }

 private:
  double c_;
};

// e^{x²} erfc(x) for x >= 0.
double erfcx(double x) {
  if (x < 20.0) return std::exp(x * x) * std::erfc(x);
  double y = 1.0 / (2.0 * x * x), term = 1.0, sum = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) * y;
    sum += term;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

// ∫_{r0}^∞ r^{D-1} e^{-κ(r² - r0²)/2} dr.
double gaussian_tail(int D, double r0, double kappa) {
  const double one = std::sqrt(std::numbers::pi / (2.0 * kappa)) * erfcx(r0 * std::sqrt(0.5 * kappa));
  if (D == 1) return one;
  if (D == 2) return 1.0 / kappa;
  return r0 / kappa + one / kappa;
}

// expm1(z)/z, continuous at 0.
double phi1(double z) { return std::abs(z) < 1e-8 ? 1.0 + 0.5 * z : std::expm1(z) / z; }

class TabulatedPack final : public detail::PackModel {
 public:
  TabulatedPack(int d, std::vector<std::pair<double, double>> samples) {
    D = d;
    if (samples.size() < 2) fail(ErrorKind::InvalidArgument, "tabulated pack needs at least two F samples");
    for (std::size_t k = 0; k < samples.size(); ++k) {
      auto [t, fv] = samples[k];
      if (!std::isfinite(t) || !(fv > 0.0) || !std::isfinite(fv))
        fail(ErrorKind::InvalidArgument, "F sample " + std::to_string(k) + " must be finite and positive");
      if (k > 0 && !(t > t_.back())) fail(ErrorKind::InvalidArgument, "F sample abscissae must increase strictly");
      if (k > 0 && !(fv < std::exp(lf_.back())))
        fail(ErrorKind::InvalidArgument, "F samples must decrease strictly (sample " + std::to_string(k) + ")");
      t_.push_back(t);
      lf_.push_back(std::log(fv));
    }
    const std::size_t n = t_.size();
    slope_.resize(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      slope_[k] = (lf_[k + 1] - lf_[k]) / (t_[k + 1] - t_[k]);
      if (!(slope_[k] < 0.0)) fail(ErrorKind::InvalidArgument, "log F must decrease strictly between samples");
    }
    // tail_[k] = ∫_{t_k}^∞ F.
    tail_.assign(n, 0.0);
    tail_[n - 1] = std::exp(lf_[n - 1]) / -slope_[n - 2];
    for (std::size_t k = n - 1; k-- > 0;) {
      double dt = t_[k + 1] - t_[k];
      tail_[k] = tail_[k + 1] + std::exp(lf_[k]) * dt * phi1(slope_[k] * dt);
    }
  }

  KineticsPack::Kind kind() const override { return KineticsPack::Kind::Tabulated; }
  std::string name() const override { return "tabulated"; }

  double f(double t) const override {
    std::size_t k = segment(t);
    std::size_t anchor = t >= t_.back() ? t_.size() - 1 : k;
    return std::exp(lf_[anchor] + slope_[k] * (t - t_[anchor]));
  }

  // G(t) = ∫_t^∞ F, exact for the piecewise log-linear F.
  double tail(double t) const {
    const std::size_t n = t_.size();
    if (t >= t_[n - 1]) return f(t) / -slope_[n - 2];
    std::size_t k = segment(t);
    double right = t < t_[0] ? t_[0] : t_[k + 1];
    double rest = t < t_[0] ? tail_[0] : tail_[k + 1];
    double w = right - t;
    return f(t) * w * phi1(slope_[k] * w) + rest;
  }

  double a_of(double alpha) const override {
    return radial_integral([this](double t) { return f(t); }, alpha);
  }

  double b_of(double s) const override {
    require_positive(s);
    const double ls = std::log(s);
    auto g = [&](double alpha) { return std::log(a_of(alpha)) - ls; };
    // Bracket the root of the decreasing function g.
    double lo = 0.0, hi = 0.0, step = 1.0;
    double glo = g(0.0);
    if (glo == 0.0) return 0.0;
    if (glo > 0.0) {
      hi = lo + step;
      double ghi = g(hi);
      while (ghi > 0.0) {
        lo = hi;
        glo = ghi;
        step *= 2.0;
        hi = lo + step;
        ghi = g(hi);
        if (step > 1e12) fail(ErrorKind::DomainError, "cannot bracket A^{-1}(s)");
      }
    } else {
      hi = 0.0;
      lo = -step;
      glo = g(lo);
      while (glo < 0.0) {
        hi = lo;
        step *= 2.0;
        lo = hi - step;
        glo = g(lo);
        if (step > 1e12) fail(ErrorKind::DomainError, "cannot bracket A^{-1}(s)");
      }
    }
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12 * std::max(1.0, std::abs(a)); };
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, tol, iters);
    return -0.5 * (a + b);
  }

  double big_b_of(double s) const override {
    if (s < 0.0) fail(ErrorKind::DomainError, "B(s) requires s >= 0");
    if (s == 0.0) return 0.0;
    double y = b_of(s);
    // B(s) = s b(s) − ∫_{−b(s)}^∞ A(α) dα, and ∫_a^∞ A = ∫ G(|v|²/2 + a) dv.
    double tail_int = radial_integral([this](double t) { return tail(t); }, -y);
    return s * y - tail_int;
  }

 private:
  std::size_t segment(double t) const {
    if (t <= t_.front()) return 0;
    if (t >= t_.back()) return slope_.size() - 1;
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    return std::size_t(it - t_.begin()) - 1;
  }

  // |S^{D-1}| ∫_0^∞ r^{D-1} h(r²/2 + α) dr, split at the images of the sample knots.
  // Each piece is parametrized from its left end so that t = r²/2 + α carries no cancellation.
  template <class H>
  double radial_integral(H h, double alpha) const {
    using boost::math::quadrature::gauss_kronrod;
    struct Cut {
      double r, t;
    };
    std::vector<Cut> cuts{{0.0, alpha}};
    auto push = [&](double t) {
      const Cut& last = cuts.back();
      if (!(t > last.t)) return;
      double r = std::sqrt(2.0 * (t - alpha));
      cuts.push_back({r, t});
    };
    if (alpha < t_.front())
      for (double r = 0.5; 0.5 * r * r + alpha < t_.front(); r *= 2.0) push(alpha + 0.5 * r * r);
    for (double tk : t_)
      if (tk > alpha) push(tk);
    const int D = this->D;
    double total = 0.0, err_total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double r0 = cuts[k].r, t0 = cuts[k].t;
      // r1 - r0 = 2 (t1 - t0) / (r0 + r1)
      const double w = 2.0 * (cuts[k + 1].t - t0) / (r0 + cuts[k + 1].r);
      auto piece = [&](double y) {
        double r = r0 + y;
        return (D == 1 ? 1.0 : std::pow(r, D - 1)) * h(t0 + 0.5 * y * (2.0 * r0 + y));
      };
      // Boost's error estimate has an absolute floor near machine epsilon, so integrate an O(1) rescaling.
      const double scale = piece(0.5 * w);
      if (!(scale > 0.0)) continue;
      auto unit = [&](double u) { return piece(u * w) / scale; };
      double err = 0.0;
      total += scale * w * gauss_kronrod<double, 15>::integrate(unit, 0.0, 1.0, 12, 1e-12, &err);
      err_total += scale * w * err;
    }
    // Beyond the last knot F is Gaussian in r; integrate that tail in closed form.
    const double kappa = -slope_.back(), tn = t_.back();
    double head = std::max(alpha, tn);
    double rn = cuts.back().r;
    total += h(head) * gaussian_tail(D, rn, kappa);
    if (!(err_total <= kQuadRelTol * std::abs(total)) || !std::isfinite(total)) {
      std::ostringstream os;
      os << "radial quadrature at alpha=" << alpha << " has error " << err_total << " for value " << total;
      fail(ErrorKind::QuadratureFail, os.str());
    }
    return sphere_area(D) * total;
  }

  std::vector<double> t_, lf_, slope_, tail_;
};

class CustomPack final : public detail::PackModel {
 public:
  CustomPack(int d, std::function<double(double)> a, std::function<double(double)> b, std::function<double(double)> bb,
             std::string name)
      : a_(std::move(a)), b_(std::move(b)), bb_(std::move(bb)), name_(std::move(name)) {
    D = d;
  }
  KineticsPack::Kind kind() const override { return KineticsPack::Kind::Custom; }
  std::string name() const override { return name_; }
  double f(double) const override { return kNaN; }
  double a_of(double alpha) const override { return a_(alpha); }
  double b_of(double s) const override {
    require_positive(s);
    return b_(s);
  }
  double big_b_of(double s) const override {
    if (s < 0.0) fail(ErrorKind::DomainError, "B(s) requires s >= 0");
    return s == 0.0 ? 0.0 : bb_(s);
  }

 private:
  std::function<double(double)> a_, b_, bb_;
  std::string name_;
};

void check_dimension(int D) {
  if (D < 1 || D > 3) fail(ErrorKind::DimensionError, "pack dimension D must be 1, 2 or 3");
}

}  // namespace

double sphere_area(int D) { return 2.0 * std::pow(std::numbers::pi, 0.5 * D) / std::tgamma(0.5 * D); }

KineticsPack KineticsPack::exponential(int D) {
  check_dimension(D);
  return KineticsPack(std::make_shared<ExpPack>(D));
}

KineticsPack KineticsPack::tabulated(int D, std::vector<std::pair<double, double>> f_samples) {
  check_dimension(D);
  return KineticsPack(std::make_shared<TabulatedPack>(D, std::move(f_samples)));
}

KineticsPack KineticsPack::custom(int D, std::function<double(double)> a, std::function<double(double)> b,
                                  std::function<double(double)> big_b, std::string name) {
  check_dimension(D);
  return KineticsPack(std::make_shared<CustomPack>(D, std::move(a), std::move(b), std::move(big_b), std::move(name)));
}

KineticsPack::Kind KineticsPack::kind() const { return model_->kind(); }
int KineticsPack::dimension() const { return model_->D; }
std::string KineticsPack::name() const { return model_->name(); }
double KineticsPack::c() const { return model_->c(); }
double KineticsPack::f(double t) const { return model_->f(t); }
double KineticsPack::a_of(double alpha) const { return model_->a_of(alpha); }
double KineticsPack::b_of(double s) const { return model_->b_of(s); }
double KineticsPack::big_b_of(double s) const { return model_->big_b_of(s); }
double KineticsPack::legendre_b_star(double y) const { return model_->b_star(y); }

// ---- validation ---------------------------------------------------------------------------

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const PackCheck& c) { return c.passed; });
}

const PackCheck* ValidationReport::find(const std::string& name) const {
  for (auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ValidationLattice ValidationLattice::standard(int s_points, int alpha_points) {
  ValidationLattice l;
  for (int i = 0; i < s_points; ++i) l.s.push_back(std::pow(10.0, -4.0 + 8.0 * i / (s_points - 1)));
  for (int j = 0; j < alpha_points; ++j) l.alpha.push_back(-10.0 + 20.0 * j / (alpha_points - 1));
  return l;
}

namespace {

// Tracks the worst (largest lhs - rhs) instance of an inequality lhs <= rhs + slack.
struct Inequality {
  PackCheck check;
  double worst = -std::numeric_limits<double>::infinity();
  explicit Inequality(std::string name) { check.name = std::move(name); }
  void observe(double at, double lhs, double rhs, double slack) {
    double excess = lhs - rhs - slack;
    if (excess > worst) {
      worst = excess;
      check.witness = at;
      check.lhs = lhs;
      check.rhs = rhs;
    }
    if (excess > 0.0 || std::isnan(lhs) || std::isnan(rhs)) check.passed = false;
  }
};

double scale_slack(double a, double b) { return 1e-10 * (1.0 + std::abs(a) + std::abs(b)); }

}  // namespace

ValidationReport evaluate_pack(const KineticsPack& pack, const ValidationLattice& lattice) {
  const int D = pack.dimension();
  const double inv_d = 1.0 / D;
  auto s = lattice.s;
  std::sort(s.begin(), s.end());
  if (s.size() < 3 || s.front() > 1e-4 || s.back() < 1e4)
    fail(ErrorKind::InvalidArgument, "validation lattice must cover [1e-4, 1e4]");
  const std::size_t n = s.size();
  std::vector<double> b(n), bb(n);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = pack.b_of(s[i]);
    bb[i] = pack.big_b_of(s[i]);
  }

  ValidationReport rep;
  std::vector<PackCheck> checks;

  // Fitted constants.
  std::size_t i1 = n;
  for (std::size_t i = 0; i < n; ++i)
    if (s[i] > 1.0 && b[i] > 0.0) {
      i1 = i;
      break;
    }
  {
    PackCheck c{"T1_exists", i1 < n, i1 < n ? s[i1] : s.back(), 0.0, 0.0};
    checks.push_back(c);
  }
  if (i1 < n) {
    rep.t1 = s[i1];
    rep.lambda_bar2 = b[i1];
    for (std::size_t i = i1; i < n; ++i) rep.lambda_bar1 = std::max(rep.lambda_bar1, b[i] / std::pow(s[i], inv_d));
    rep.lambda1 = std::max(rep.lambda_bar1, rep.lambda_bar2);
  }
  rep.lambda_bar1_reference = 4.0 / std::pow(sphere_area(D), inv_d);
  rep.matches_reference = rep.lambda_bar1 <= rep.lambda_bar1_reference;

  Inequality b_growth("b_upper_bound");
  Inequality b_mono("b_nondecreasing");
  Inequality b_deriv("b_is_derivative_of_B");
  Inequality convex("B_convex");
  Inequality b_upper("B_upper_bound");
  Inequality b_abs("B_abs_growth");
  Inequality neg_part("s_bminus_le_Bminus");
  Inequality neg_part_v("s_bminus_le_Vs_minus_finf");
  Inequality inf_b("inf_B_finite");
  Inequality b_floor("B_plus_Vs_ge_finf");
  for (std::size_t i = 0; i < n; ++i) {
    double rhs = rep.lambda_bar1 * std::pow(s[i], inv_d) + rep.lambda_bar2;
    b_growth.observe(s[i], b[i], rhs, scale_slack(b[i], rhs));
    if (i + 1 < n) b_mono.observe(s[i], b[i], b[i + 1], 0.0);
    double growth = std::pow(s[i], 1.0 + inv_d) + s[i];
    b_upper.observe(s[i], bb[i], rep.lambda1 * growth, scale_slack(bb[i], growth));
    double bminus = std::max(0.0, -b[i]), big_minus = std::max(0.0, -bb[i]);
    neg_part.observe(s[i], s[i] * bminus, big_minus, scale_slack(s[i] * bminus, big_minus));
    // Central difference of B with relative step 1e-3.
    double hstep = 1e-3 * s[i];
    double dB = (pack.big_b_of(s[i] + hstep) - pack.big_b_of(s[i] - hstep)) / (2.0 * hstep);
    b_deriv.observe(s[i], std::abs(dB - b[i]), 1e-6 * std::max(1.0, std::abs(b[i])), 0.0);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    // Second divided difference on the (nonuniform) lattice.
    double d1 = (bb[i] - bb[i - 1]) / (s[i] - s[i - 1]);
    double d2 = (bb[i + 1] - bb[i]) / (s[i + 1] - s[i]);
    convex.observe(s[i], d1 - d2, 0.0, 1e-10 * (1.0 + std::abs(d1) + std::abs(d2)));
  }
  // Bounded potentials V ∈ {-1, 0, 1}: f^∞ = B(A(V)) + A(V) V. The lower bounds B(s) + Vs >= f^∞ and
  // s b(s) + Vs >= f^∞ hold pointwise; their negative-part forms need the positive part of Vs − f^∞.
  for (double v : {-1.0, 0.0, 1.0}) {
    double rho_inf = pack.a_of(v);
    double f_inf = pack.big_b_of(rho_inf) + rho_inf * v;
    for (std::size_t i = 0; i < n; ++i) {
      double rhs = rep.lambda1 * (std::pow(s[i], 1.0 + inv_d) + s[i]) + v * s[i] - f_inf;
      b_abs.observe(s[i], std::abs(bb[i]), rhs, scale_slack(bb[i], rhs));
      double room = std::max(0.0, v * s[i] - f_inf);
      double lhs = s[i] * std::max(0.0, -b[i]);
      neg_part_v.observe(s[i], lhs, room, scale_slack(lhs, f_inf));
      b_floor.observe(s[i], f_inf, bb[i] + v * s[i], scale_slack(f_inf, bb[i]));
    }
  }
  // inf B is attained at b(s) = 0, i.e. s = A(0); nothing on the lattice may go below it.
  rep.inf_b = pack.big_b_of(pack.a_of(0.0));
  for (std::size_t i = 0; i < n; ++i) inf_b.observe(s[i], rep.inf_b, bb[i], scale_slack(rep.inf_b, bb[i]));
  if (!std::isfinite(rep.inf_b)) inf_b.check.passed = false;

  // A on the α lattice: positive, strictly decreasing, continuous.
  auto alpha = lattice.alpha;
  std::sort(alpha.begin(), alpha.end());
  Inequality a_dec("A_strictly_decreasing");
  Inequality a_cont("A_continuous");
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    double aj = pack.a_of(alpha[j]);
    if (!(aj > 0.0) || !std::isfinite(aj)) a_dec.observe(alpha[j], 1.0, 0.0, 0.0);
    if (j + 1 < alpha.size()) {
      double an = pack.a_of(alpha[j + 1]);
      // strict: A(α_{j+1}) < A(α_j)
      a_dec.observe(alpha[j], an, aj, -std::numeric_limits<double>::min());
    }
    double da = std::abs(pack.a_of(alpha[j] + 1e-8) - aj);
    a_cont.observe(alpha[j], da, 1e-6 * aj, 0.0);
  }

  for (auto* q : {&b_growth, &b_mono, &b_deriv, &convex, &b_upper, &b_abs, &neg_part, &neg_part_v, &b_floor, &inf_b, &a_dec,
                  &a_cont})
    checks.push_back(q->check);
  rep.checks = std::move(checks);
  return rep;
}

ValidationReport validate_pack(const KineticsPack& pack, const ValidationLattice& lattice) {
  auto rep = evaluate_pack(pack, lattice);
  for (auto& c : rep.checks)
    if (!c.passed) {
      std::ostringstream os;
      os.precision(10);
      os << "pack '" << pack.name() << "' fails " << c.name << " at witness " << c.witness << " (lhs " << c.lhs
         << ", rhs " << c.rhs << ")";
      fail(ErrorKind::PropertyViolation, os.str());
    }
  return rep;
}

}  // namespace bpl
