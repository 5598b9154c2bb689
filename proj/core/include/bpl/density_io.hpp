#pragma once

#include <iosfwd>

#include "bpl/grid_measures.hpp"

namespace bpl {

// CSV snapshot: header `x[,y][,v...],value`, one row per cell in row-major order,
// trailing `# mass=<float>` comment.
void write_density_csv(std::ostream& os, const DensityField& rho);
void write_phase_csv(std::ostream& os, const PhaseDensity& mu);

DensityField read_density_csv(std::istream& is);
PhaseDensity read_phase_csv(std::istream& is, double leak_tol = kDefaultLeakTol);

}  // namespace bpl
