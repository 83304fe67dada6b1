#include "phel/grid.hpp"

#include <cmath>
#include <string>

#include "phel/errors.hpp"

namespace phel {

GridSpec make_grid(int n, double dz, double origin) {
  if (n < 8) throw ValidationError("grid: n must be at least 8, got " + std::to_string(n));
  if (!(dz > 0.0) || !std::isfinite(dz))
    throw ValidationError("grid: dz must be positive and finite");
  if (!std::isfinite(origin)) throw ValidationError("grid: origin must be finite");
  return GridSpec{n, dz, origin};
}

Grid1D make_grid_1d(int n_q, double dq, double origin, bool periodic) {
  if (n_q < 8) throw ValidationError("grid1d: n_q must be at least 8, got " + std::to_string(n_q));
  if (!(dq > 0.0) || !std::isfinite(dq))
    throw ValidationError("grid1d: dq must be positive and finite");
  if (!std::isfinite(origin)) throw ValidationError("grid1d: origin must be finite");
  return Grid1D{n_q, dq, origin, periodic};
}

} // namespace phel
