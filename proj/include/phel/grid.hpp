#pragma once

namespace phel {

// Square configuration grid shared by the photon and electron axes.
// Cell centers sit at z_i = origin + i*dz; the evolution time step is locked
// to dz so transport is an exact one-cell shift.
struct GridSpec {
  int n = 0;
  double dz = 0.0;
  double origin = 0.0;

  double z(int i) const { return origin + i * dz; }
  double z_min() const { return origin; }
  double z_max() const { return origin + (n - 1) * dz; }
  double length() const { return n * dz; }
  bool contains(double x) const { return x >= z_min() && x <= z_max(); }
};

// Validates n >= 8 and dz > 0.
GridSpec make_grid(int n, double dz, double origin);

// One spatial axis for the scalar wave-equation solver.
struct Grid1D {
  int n_q = 0;
  double dq = 0.0;
  double origin = 0.0;
  bool periodic = true;

  double q(int i) const { return origin + i * dq; }
  double length() const { return n_q * dq; }
};

Grid1D make_grid_1d(int n_q, double dq, double origin, bool periodic = true);

} // namespace phel
