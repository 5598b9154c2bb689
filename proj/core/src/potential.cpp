#include "bpl/potential.hpp"

#include <cmath>
#include <cstdio>

#include "bpl/errors.hpp"

namespace bpl {

Potential Potential::cosine(double amplitude, int frequency) {
  if (frequency < 1) fail(ErrorKind::ConfigError, "cosine potential needs frequency >= 1");
  if (!std::isfinite(amplitude)) fail(ErrorKind::ConfigError, "cosine potential needs a finite amplitude");
  return Potential{Kind::Cosine, amplitude, frequency};
}

double Potential::value(double x) const {
  if (kind == Kind::Zero) return 0.0;
  return amplitude * std::cos(2.0 * M_PI * frequency * x);
}

double Potential::derivative(double x) const {
  if (kind == Kind::Zero) return 0.0;
  return -2.0 * M_PI * frequency * amplitude * std::sin(2.0 * M_PI * frequency * x);
}

std::string Potential::describe() const {
  if (kind == Kind::Zero) return "zero";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g*cos(2pi*%d*x)", amplitude, frequency);
  return buf;
}

std::vector<double> Potential::sample(const TorusGrid& grid) const {
  std::vector<double> v(grid.cells());
  const int n = grid.n();
  for (std::size_t c = 0; c < v.size(); ++c) {
    const int ix = grid.d() == 1 ? int(c) : int(c / n);
    v[c] = value(grid.center(ix));
  }
  return v;
}

}  // namespace bpl
