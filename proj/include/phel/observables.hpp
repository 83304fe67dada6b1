#pragma once

#include <vector>

#include "phel/spinor_field.hpp"

namespace phel {

// Joint probability density rho(i,j) = sum_{a,b} |comp[a][b](i,j)|^2.
std::vector<double> density(const SpinorField2B& field);

// Integral sum_{ij} rho dz^2 via the deterministic pairwise tree.
double total_norm(const SpinorField2B& field, unsigned threads = 1);

// Norm split across the coincidence diagonal. photon_right sums cells with
// i > j (photon to the right of the electron), photon_left the cells i < j.
// Diagonal cells, when populated in free mode, are counted in neither.
struct SideNorms {
  double photon_right = 0.0;
  double photon_left = 0.0;
  double diagonal = 0.0;
};
SideNorms side_norms(const SpinorField2B& field, unsigned threads = 1);

// Norm within two cells of the outer walls; drives the evolve guard.
double edge_norm(const SpinorField2B& field, unsigned threads = 1);

// All of the above in one pass (used by the per-step diagnostics).
struct FieldNorms {
  SideNorms sides;
  double edge = 0.0;
  double total = 0.0; // exactly sides.photon_right + sides.photon_left + sides.diagonal
};
FieldNorms field_norms(const SpinorField2B& field, unsigned threads = 1);

enum class Axis { photon, electron };

// Sums rho over the other axis times dz; integrates to total_norm.
std::vector<double> marginal_density(const SpinorField2B& field, Axis which);

} // namespace phel
