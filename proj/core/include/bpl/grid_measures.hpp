#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bpl {

// Uniform cell-centred grid on the unit torus [0,1)^d.
class TorusGrid {
 public:
  TorusGrid(int d, int n);

  int d() const { return d_; }
  int n() const { return n_; }
  double h() const { return h_; }
  double cell_volume() const { return d_ == 1 ? h_ : h_ * h_; }
  std::size_t cells() const { return d_ == 1 ? std::size_t(n_) : std::size_t(n_) * n_; }
  // Cell centre along one axis.
  double center(int i) const { return (i + 0.5) * h_; }

  bool operator==(const TorusGrid& o) const { return d_ == o.d_ && n_ == o.n_; }

 private:
  int d_;
  int n_;
  double h_;
};

class DensityField {
 public:
  // Validating constructor: values must be >= 0 with unit mass (1e-12).
  DensityField(TorusGrid grid, std::vector<double> values);

  const TorusGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  double mass() const;
  double min() const;

 private:
  TorusGrid grid_;
  std::vector<double> values_;
};

DensityField normalize(std::vector<double> values, const TorusGrid& grid);
double total_mass(std::span<const double> values, double cell_volume);

// Convenience: sample f at cell centres (1D) and normalize.
DensityField density_from_function(const TorusGrid& grid, const std::function<double(double)>& f);
DensityField uniform_density(const TorusGrid& grid);

class VelocityBox {
 public:
  VelocityBox(int d, int n_v, double v_max);

  int d() const { return d_; }
  int n_v() const { return n_v_; }
  double v_max() const { return v_max_; }
  double h_v() const { return h_v_; }
  double cell_volume() const { return d_ == 1 ? h_v_ : h_v_ * h_v_; }
  std::size_t cells() const { return d_ == 1 ? std::size_t(n_v_) : std::size_t(n_v_) * n_v_; }
  double center(int j) const { return -v_max_ + (j + 0.5) * h_v_; }
  // Whether flat velocity index iv lies in the outermost layer.
  bool on_boundary(std::size_t iv) const;

  bool operator==(const VelocityBox& o) const {
    return d_ == o.d_ && n_v_ == o.n_v_ && v_max_ == o.v_max_;
  }

 private:
  int d_;
  int n_v_;
  double v_max_;
  double h_v_;
};

inline constexpr double kDefaultLeakTol = 1e-8;

// Phase-space density f(x, v); values indexed as ix * vbox.cells() + iv.
class PhaseDensity {
 public:
  PhaseDensity(TorusGrid xgrid, VelocityBox vbox, std::vector<double> values,
               double leak_tol = kDefaultLeakTol);

  const TorusGrid& xgrid() const { return xgrid_; }
  const VelocityBox& vbox() const { return vbox_; }
  const std::vector<double>& values() const { return values_; }
  double leak_tol() const { return leak_tol_; }
  double at(std::size_t ix, std::size_t iv) const { return values_[ix * vbox_.cells() + iv]; }
  double cell_volume() const { return xgrid_.cell_volume() * vbox_.cell_volume(); }
  double mass() const;
  // Mass in the outermost velocity layer.
  double boundary_mass() const;

 private:
  TorusGrid xgrid_;
  VelocityBox vbox_;
  std::vector<double> values_;
  double leak_tol_;
};

PhaseDensity normalize_phase(std::vector<double> values, const TorusGrid& xgrid, const VelocityBox& vbox,
                             double leak_tol = kDefaultLeakTol);
// f(x, v) = rho(x) g(v), with g normalized on the velocity grid.
PhaseDensity product(const DensityField& rho, const VelocityBox& vbox, std::span<const double> g,
                     double leak_tol = kDefaultLeakTol);
// Velocity profile of a centred Gaussian (1D box), unit discrete mass.
std::vector<double> gaussian_profile(const VelocityBox& vbox, double sigma, double mean = 0.0);

struct MomentFields {
  DensityField rho;
  std::vector<double> u;   // cells * d, mean velocity
  std::vector<double> vv;  // cells * d * d, conditional second moment
  double m2 = 0.0;         // ∫|v|² dμ
  double kinetic = 0.0;    // ½∫|v|² dμ
};

DensityField marginal_x(const PhaseDensity& mu);
MomentFields moments(const PhaseDensity& mu);
double superlinear_moment(const PhaseDensity& mu, const std::function<double(double)>& theta);

}  // namespace bpl
