#include "bpl/stencil.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

#include "bpl/errors.hpp"

namespace bpl {

std::vector<double> diff(std::span<const double> f, const TorusGrid& grid, int axis) {
  const int n = grid.n();
  if (f.size() != grid.cells()) fail(ErrorKind::InvalidArgument, "diff: size mismatch");
  if (axis < 0 || axis >= grid.d()) fail(ErrorKind::DimensionError, "diff: bad axis");
  const double c = 1.0 / (12.0 * grid.h());
  std::vector<double> out(f.size());
  auto wrap = [n](int i) { return (i % n + n) % n; };
  if (grid.d() == 1) {
    for (int i = 0; i < n; ++i)
      out[i] = c * (-f[wrap(i + 2)] + 8.0 * f[wrap(i + 1)] - 8.0 * f[wrap(i - 1)] + f[wrap(i - 2)]);
    return out;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto at = [&](int di) {
        return axis == 0 ? f[std::size_t(wrap(i + di)) * n + j] : f[std::size_t(i) * n + wrap(j + di)];
      };
      out[std::size_t(i) * n + j] = c * (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2));
    }
  return out;
}

std::vector<double> laplacian(std::span<const double> f, const TorusGrid& grid) {
  std::vector<double> out(f.size(), 0.0);
  for (int a = 0; a < grid.d(); ++a) {
    auto g = diff(diff(f, grid, a), grid, a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
  }
  return out;
}

double dtd_symbol(int k, int n, double h) {
  double th = 2.0 * std::numbers::pi * k / n;
  double s = (8.0 * std::sin(th) - std::sin(2.0 * th)) / (6.0 * h);
  return s * s;
}

Circulant::Circulant(std::vector<double> symbol) {
  const int n = int(symbol.size());
  kernel_.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += symbol[k] * std::cos(2.0 * std::numbers::pi * double(std::int64_t(j) * k % n) / n);
    kernel_[j] = s / n;
  }
}

std::vector<double> Circulant::apply(std::span<const double> f) const {
  const int n = int(kernel_.size());
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += kernel_[(i - j + n) % n] * f[j];
    out[i] = s;
  }
  return out;
}

}  // namespace bpl
