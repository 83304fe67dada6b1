#pragma once

#include <cstdint>
#include <vector>

#include "phel/evolution.hpp"
#include "phel/spinor_field.hpp"

namespace phel {

// Cells with rho below this floor get velocity zero and a degenerate flag.
inline constexpr double kDensityFloor = 1e-30;

struct PairPosition {
  double z_ph = 0.0;
  double z_el = 0.0;
  bool alive = true; // false once frozen at the grid boundary
};

struct PairTrajectory {
  std::vector<double> times;
  std::vector<PairPosition> positions;
  std::uint64_t sample_index = 0;
};

struct VelocityField {
  std::vector<double> v_ph;
  std::vector<double> v_el;
  std::vector<std::uint8_t> degenerate;
};

// Lattice current ratios:
//   v_ph = sum_b (|comp[+1][b]|^2 - |comp[-1][b]|^2) / rho,
//   v_el = sum_a (|comp[a][+1]|^2 - |comp[a][-1]|^2) / rho.
// Both lie in [-1, 1]; degenerate cells (rho < floor) carry velocity zero.
VelocityField velocity_field(const SpinorField2B& field);

struct VelocitySample {
  double v_ph = 0.0;
  double v_el = 0.0;
  bool degenerate = false; // all admissible stencil cells below the floor
};

// Bilinear interpolation of the cell velocities. In interacting mode only
// stencil cells strictly on the point's side of the diagonal participate and
// the weights are renormalized.
VelocitySample velocity_at(const SpinorField2B& field, InteractionMode mode,
                           double z_ph, double z_el);

struct GuidanceCounters {
  long crossing_guard_events = 0;
  long degenerate_events = 0;
  long frozen_pairs = 0;
};

// One Heun step per alive pair between two consecutive field snapshots.
// In interacting mode a step that would cross the diagonal is projected back
// to half-cell separation on the original side and counted. Pairs that would
// leave the grid are frozen in place.
void advance_pairs(std::vector<PairPosition>& pairs, const SpinorField2B& pre,
                   const SpinorField2B& post, const EvolutionParams& params,
                   GuidanceCounters& counters, unsigned threads = 1);

struct IntegrateResult {
  std::vector<PairTrajectory> trajectories;
  GuidanceCounters counters;
  EvolveStatus field_status = EvolveStatus::completed;
  long steps_completed = 0;
  SpinorField2B final_field;
};

// Interleaves field steps with pair advancement, recording every position.
// Consumes the field (the returned struct carries its final state).
IntegrateResult integrate_pairs(const std::vector<PairPosition>& initial,
                                SpinorField2B field, const EvolutionParams& params,
                                long n_steps);

} // namespace phel
