#include "bpl/grid_measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bpl/errors.hpp"

namespace bpl {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kNegativeTol = 1e-14;

void clamp_or_throw(std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    double& x = values[i];
    if (std::isnan(x) || std::isinf(x)) fail(ErrorKind::InvalidArgument, "non-finite entry at index " + std::to_string(i));
    if (x < -kNegativeTol) fail(ErrorKind::NegativeDensity, "entry " + std::to_string(i) + " = " + std::to_string(x));
    if (x < 0.0) x = 0.0;
  }
}

void scale_to_unit_mass(std::vector<double>& values, double vol) {
  double m = total_mass(values, vol);
  if (!(m > 0.0)) fail(ErrorKind::AllZero, "input has zero total mass");
  double s = 1.0 / m;
  for (double& x : values) x *= s;
}

}  // namespace

TorusGrid::TorusGrid(int d, int n) : d_(d), n_(n), h_(1.0 / n) {
  if (d != 1 && d != 2) fail(ErrorKind::DimensionError, "torus dimension must be 1 or 2, got " + std::to_string(d));
  if (n < 8) fail(ErrorKind::InvalidArgument, "grid needs n >= 8, got " + std::to_string(n));
  if (h_ * n != 1.0) fail(ErrorKind::InvalidArgument, "h*n != 1 in floating point for n = " + std::to_string(n));
}

double total_mass(std::span<const double> values, double cell_volume) {
  // Pairwise-ish accuracy is enough at n <= 256^2; keep a Kahan sum anyway.
  double s = 0.0, c = 0.0;
  for (double x : values) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s * cell_volume;
}

DensityField::DensityField(TorusGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.cells())
    fail(ErrorKind::InvalidArgument, "density has " + std::to_string(values_.size()) + " values, grid has " +
                                         std::to_string(grid_.cells()) + " cells");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!(values_[i] >= 0.0) || std::isinf(values_[i]))
      fail(ErrorKind::NegativeDensity, "density entry " + std::to_string(i) + " is negative or not finite");
  double m = mass();
  if (std::abs(m - 1.0) > kMassTol) fail(ErrorKind::InvalidArgument, "density mass " + std::to_string(m) + " != 1");
}

double DensityField::mass() const { return total_mass(values_, grid_.cell_volume()); }
double DensityField::min() const { return *std::min_element(values_.begin(), values_.end()); }

DensityField normalize(std::vector<double> values, const TorusGrid& grid) {
  if (values.size() != grid.cells()) fail(ErrorKind::InvalidArgument, "normalize: size does not match grid");
  clamp_or_throw(values);
  scale_to_unit_mass(values, grid.cell_volume());
  return DensityField(grid, std::move(values));
}

DensityField density_from_function(const TorusGrid& grid, const std::function<double(double)>& f) {
  if (grid.d() != 1) fail(ErrorKind::DimensionError, "density_from_function is 1D");
  std::vector<double> v(grid.cells());
  for (int i = 0; i < grid.n(); ++i) v[i] = f(grid.center(i));
  return normalize(std::move(v), grid);
}

DensityField uniform_density(const TorusGrid& grid) { return DensityField(grid, std::vector<double>(grid.cells(), 1.0)); }

VelocityBox::VelocityBox(int d, int n_v, double v_max) : d_(d), n_v_(n_v), v_max_(v_max), h_v_(2.0 * v_max / n_v) {
  if (d != 1 && d != 2) fail(ErrorKind::DimensionError, "velocity dimension must be 1 or 2");
  if (n_v < 8) fail(ErrorKind::InvalidArgument, "velocity grid needs n_v >= 8");
  if (!(v_max > 0.0)) fail(ErrorKind::InvalidArgument, "v_max must be positive");
}

bool VelocityBox::on_boundary(std::size_t iv) const {
  auto edge = [this](std::size_t j) { return j == 0 || j + 1 == std::size_t(n_v_); };
  if (d_ == 1) return edge(iv);
  return edge(iv / n_v_) || edge(iv % n_v_);
}

PhaseDensity::PhaseDensity(TorusGrid xgrid, VelocityBox vbox, std::vector<double> values, double leak_tol)
    : xgrid_(xgrid), vbox_(vbox), values_(std::move(values)), leak_tol_(leak_tol) {
  if (xgrid_.d() != vbox_.d()) fail(ErrorKind::DimensionError, "position and velocity dimensions differ");
  if (values_.size() != xgrid_.cells() * vbox_.cells())
    fail(ErrorKind::InvalidArgument, "phase density size does not match grids");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!(values_[i] >= 0.0) || std::isinf(values_[i]))
      fail(ErrorKind::NegativeDensity, "phase entry " + std::to_string(i) + " is negative or not finite");
  double m = mass();
  if (std::abs(m - 1.0) > kMassTol) fail(ErrorKind::InvalidArgument, "phase mass " + std::to_string(m) + " != 1");
  double leak = boundary_mass();
  if (leak > leak_tol_)
    fail(ErrorKind::LeakError, "velocity-boundary mass " + std::to_string(leak) + " exceeds " + std::to_string(leak_tol_));
}

double PhaseDensity::mass() const { return total_mass(values_, cell_volume()); }

double PhaseDensity::boundary_mass() const {
  const std::size_t nv = vbox_.cells();
  double s = 0.0;
  for (std::size_t ix = 0; ix < xgrid_.cells(); ++ix)
    for (std::size_t iv = 0; iv < nv; ++iv)
      if (vbox_.on_boundary(iv)) s += values_[ix * nv + iv];
  return s * cell_volume();
}

PhaseDensity normalize_phase(std::vector<double> values, const TorusGrid& xgrid, const VelocityBox& vbox,
                             double leak_tol) {
  if (values.size() != xgrid.cells() * vbox.cells()) fail(ErrorKind::InvalidArgument, "normalize_phase: size mismatch");
  clamp_or_throw(values);
  scale_to_unit_mass(values, xgrid.cell_volume() * vbox.cell_volume());
  return PhaseDensity(xgrid, vbox, std::move(values), leak_tol);
}

PhaseDensity product(const DensityField& rho, const VelocityBox& vbox, std::span<const double> g, double leak_tol) {
  const std::size_t nv = vbox.cells();
  if (g.size() != nv) fail(ErrorKind::InvalidArgument, "velocity profile size does not match box");
  std::vector<double> gn(g.begin(), g.end());
  clamp_or_throw(gn);
  scale_to_unit_mass(gn, vbox.cell_volume());
  std::vector<double> f(rho.size() * nv);
  for (std::size_t ix = 0; ix < rho.size(); ++ix)
    for (std::size_t iv = 0; iv < nv; ++iv) f[ix * nv + iv] = rho[ix] * gn[iv];
  // Products of unit-mass factors are unit mass up to rounding; renormalize to stay within 1e-12.
  scale_to_unit_mass(f, rho.grid().cell_volume() * vbox.cell_volume());
  return PhaseDensity(rho.grid(), vbox, std::move(f), leak_tol);
}

std::vector<double> gaussian_profile(const VelocityBox& vbox, double sigma, double mean) {
  std::vector<double> g(vbox.cells());
  for (std::size_t iv = 0; iv < g.size(); ++iv) {
    double r2 = 0.0;
    if (vbox.d() == 1) {
      double v = vbox.center(int(iv)) - mean;
      r2 = v * v;
    } else {
      double a = vbox.center(int(iv / vbox.n_v())) - mean, b = vbox.center(int(iv % vbox.n_v()));
      r2 = a * a + b * b;
    }
    g[iv] = std::exp(-0.5 * r2 / (sigma * sigma));
  }
  scale_to_unit_mass(g, vbox.cell_volume());
  return g;
}

DensityField marginal_x(const PhaseDensity& mu) {
  const std::size_t nv = mu.vbox().cells();
  const double hv = mu.vbox().cell_volume();
  std::vector<double> rho(mu.xgrid().cells(), 0.0);
  for (std::size_t ix = 0; ix < rho.size(); ++ix) {
    double s = 0.0;
    for (std::size_t iv = 0; iv < nv; ++iv) s += mu.values()[ix * nv + iv];
    rho[ix] = s * hv;
  }
  // Row sums of a unit-mass density carry mass 1 up to rounding.
  scale_to_unit_mass(rho, mu.xgrid().cell_volume());
  return DensityField(mu.xgrid(), std::move(rho));
}

MomentFields moments(const PhaseDensity& mu) {
  const auto& vb = mu.vbox();
  const int d = vb.d();
  const std::size_t nx = mu.xgrid().cells(), nv = vb.cells();
  const double hv = vb.cell_volume(), hx = mu.xgrid().cell_volume();
  auto velocity = [&](std::size_t iv, int k) {
    if (d == 1) return vb.center(int(iv));
    return k == 0 ? vb.center(int(iv / vb.n_v())) : vb.center(int(iv % vb.n_v()));
  };

  MomentFields out{marginal_x(mu), std::vector<double>(nx * d, 0.0), std::vector<double>(nx * d * d, 0.0)};
  double m2 = 0.0;
  for (std::size_t ix = 0; ix < nx; ++ix) {
    double rho = 0.0;
    std::vector<double> mom(d, 0.0), sec(d * d, 0.0);
    for (std::size_t iv = 0; iv < nv; ++iv) {
      double f = mu.values()[ix * nv + iv] * hv;
      rho += f;
      for (int a = 0; a < d; ++a) {
        double va = velocity(iv, a);
        mom[a] += va * f;
        for (int b = 0; b < d; ++b) sec[a * d + b] += va * velocity(iv, b) * f;
      }
    }
    for (int a = 0; a < d * d; ++a) m2 += (a % (d + 1) == 0) ? sec[a] * hx : 0.0;
    if (rho > 0.0) {
      for (int a = 0; a < d; ++a) out.u[ix * d + a] = mom[a] / rho;
      for (int a = 0; a < d * d; ++a) out.vv[ix * d * d + a] = sec[a] / rho;
    }
  }
  out.m2 = m2;
  out.kinetic = 0.5 * m2;
  return out;
}

double superlinear_moment(const PhaseDensity& mu, const std::function<double(double)>& theta) {
  double s = 0.0;
  for (double f : mu.values()) s += theta(f);
  return s * mu.cell_volume();
}

}  // namespace bpl
