#pragma once

#include <string>
#include <vector>

#include "bpl/grid_measures.hpp"

namespace bpl {

// Bounded external potential on the torus; V depends on the first coordinate only.
struct Potential {
  enum class Kind { Zero, Cosine };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;
  int frequency = 1;

  static Potential zero() { return {}; }
  // V(x) = a cos(2πkx).
  static Potential cosine(double amplitude, int frequency = 1);

  double value(double x) const;
  double derivative(double x) const;
  double sup_norm() const { return kind == Kind::Zero ? 0.0 : std::abs(amplitude); }
  std::string describe() const;

  // Values at cell centres, laid out like DensityField values.
  std::vector<double> sample(const TorusGrid& grid) const;
};

}  // namespace bpl
