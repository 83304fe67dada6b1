#pragma once

#include <array>
#include <functional>
#include <vector>

#include "phel/observables.hpp"
#include "phel/spinor_field.hpp"

namespace phel {

enum class InteractionMode { interacting, free };

// Physics parameters of one evolution. The time step is always grid.dz.
struct EvolutionParams {
  double mass = 1.0;          // electron mass, inverse Compton lengths
  double theta = 0.0;         // boundary phase in [0, 2pi)
  InteractionMode mode = InteractionMode::interacting;
  unsigned threads = 1;
};

void validate_params(const EvolutionParams& params);

struct StepDiagnostics {
  long step_index = 0;
  double total_norm = 0.0;
  double side_norm_right = 0.0; // i > j
  double side_norm_left = 0.0;  // i < j
  double edge_norm = 0.0;
};

// Mass coupling: for every photon chirality a and cell, the electron pair
// (comp[a][-1], comp[a][+1]) is multiplied by
//   exp(-i m dt_fraction sigma1) = [[cos A, -i sin A], [-i sin A, cos A]],
// A = m * dt_fraction. Photon components are massless and untouched.
void mass_rotation(SpinorField2B& field, double mass, double dt_fraction,
                   unsigned threads = 1);

// Exact one-cell shift along the characteristics, with the coincidence-set
// reflection in interacting mode and chirality-flip reflection at the outer
// walls in both modes. Every target cell reads exactly one source amplitude
// with a unit-modulus phase, so the map is unitary by construction.
void transport_step(const SpinorField2B& in, SpinorField2B& out,
                    const EvolutionParams& params);

// Strang composition: half mass rotation, transport, half mass rotation.
// Uses `scratch` as the transport target and swaps it into `field`.
StepDiagnostics step(SpinorField2B& field, SpinorField2B& scratch,
                     const EvolutionParams& params, long step_index = 0);

// Convenience single-step that allocates its own scratch field.
SpinorField2B stepped(const SpinorField2B& field, const EvolutionParams& params);

enum class EvolveStatus { completed, edge_abort };

struct DensitySnapshot {
  long step = 0;
  std::vector<double> rho;
};

struct EvolveResult {
  EvolveStatus status = EvolveStatus::completed;
  long steps_completed = 0;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<DensitySnapshot> snapshots;
};

inline constexpr double kEdgeNormAbortThreshold = 1e-6;

using SnapshotSink = std::function<void(long step, const std::vector<double>& rho)>;

// Repeated stepping with density snapshots every snapshot_stride steps
// (always at step 0 and at the final/stop step). Stops early with
// EvolveStatus::edge_abort once edge_norm exceeds the threshold; `field`
// then holds the state at the stop. snapshot_stride <= 0 disables periodic
// snapshots (initial and final are still emitted).
EvolveResult evolve(SpinorField2B& field, const EvolutionParams& params,
                    long n_steps, long snapshot_stride,
                    const SnapshotSink& sink = {}, bool keep_snapshots = true);

// Dense one-step map assembled column by column by stepping unit basis
// fields; the basis excludes diagonal cells in interacting mode. Guarded to
// small grids (n <= 24). Column-major storage: data[col*dim + row].
struct OneStepMatrix {
  std::size_t dim = 0;
  std::vector<cplx> data;
  std::vector<std::array<int, 3>> basis; // (component, i, j) per index
};
OneStepMatrix one_step_matrix(const EvolutionParams& params, const GridSpec& small_grid);

// Flattens a field into the one_step_matrix basis ordering (and back).
std::vector<cplx> flatten_field(const SpinorField2B& field, const OneStepMatrix& matrix);

// Evaluates the four components at the photon-time-extended configuration
// (t + tau, z_ph; t, z_el) by exact massless transport along the photon
// characteristics: comp[a][b](z_ph - a tau, z_el), bilinearly interpolated.
// Requires |z_ph - z_el| > tau (spacelike configuration) and the transported
// evaluation points inside the grid.
std::array<cplx, 4> multi_time_extend(const SpinorField2B& field_at_t,
                                      const EvolutionParams& params, double tau,
                                      double z_ph, double z_el);

} // namespace phel
