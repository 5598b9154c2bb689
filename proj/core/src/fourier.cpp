#include "bpl/fourier.hpp"

#include <cmath>
#include <numbers>

#include "bpl/errors.hpp"

namespace bpl {

double TestFunction::value(double x) const {
  double w = 2.0 * std::numbers::pi * k;
  return (cosine ? std::cos(w * x) : std::sin(w * x)) / w;
}

double TestFunction::derivative(double x) const {
  double w = 2.0 * std::numbers::pi * k;
  return cosine ? -std::sin(w * x) : std::cos(w * x);
}

std::vector<TestFunction> fourier_family(int k_max) {
  std::vector<TestFunction> out;
  for (int k = 1; k <= k_max; ++k) {
    out.push_back({k, false});
    out.push_back({k, true});
  }
  return out;
}

std::vector<TestFunction> fourier_family_for(const TorusGrid& grid) { return fourier_family(grid.n() / 4); }

double pair_with(std::span<const double> xi, const TorusGrid& grid, const TestFunction& a) {
  if (grid.d() != 1) fail(ErrorKind::DimensionError, "Fourier pairing is 1D");
  double s = 0.0;
  for (int i = 0; i < grid.n(); ++i) s += xi[i] * a.value(grid.center(i));
  return s * grid.h();
}

}  // namespace bpl
