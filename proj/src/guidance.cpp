#include "phel/guidance.hpp"

#include <algorithm>
#include <cmath>

#include "detail_interp.hpp"
#include "phel/errors.hpp"
#include "phel/parallel.hpp"

namespace phel {

namespace {

struct CellVelocity {
  double v_ph;
  double v_el;
  bool degenerate;
};

inline CellVelocity cell_velocity(const SpinorField2B& field, std::size_t k) {
  const double nmm = std::norm(field.comp[comp_index(-1, -1)][k]);
  const double nmp = std::norm(field.comp[comp_index(-1, +1)][k]);
  const double npm = std::norm(field.comp[comp_index(+1, -1)][k]);
  const double npp = std::norm(field.comp[comp_index(+1, +1)][k]);
  const double rho = nmm + nmp + npm + npp;
  if (rho < kDensityFloor) return {0.0, 0.0, true};
  const double inv = 1.0 / rho;
  return {(npm + npp - nmm - nmp) * inv, (nmp + npp - nmm - npm) * inv, false};
}

} // namespace

VelocityField velocity_field(const SpinorField2B& field) {
  VelocityField out;
  out.v_ph.assign(field.cells(), 0.0);
  out.v_el.assign(field.cells(), 0.0);
  out.degenerate.assign(field.cells(), 0);
  for (std::size_t k = 0; k < field.cells(); ++k) {
    const CellVelocity v = cell_velocity(field, k);
    out.v_ph[k] = v.v_ph;
    out.v_el[k] = v.v_el;
    out.degenerate[k] = v.degenerate ? 1 : 0;
  }
  return out;
}

VelocitySample velocity_at(const SpinorField2B& field, InteractionMode mode, double z_ph,
                           double z_el) {
  const GridSpec& grid = field.grid;
  if (!grid.contains(z_ph) || !grid.contains(z_el))
    throw ValidationError("velocity_at: point outside the grid");

  int side = 0;
  if (mode == InteractionMode::interacting) {
    side = (z_ph > z_el) ? +1 : (z_ph < z_el ? -1 : 0);
    if (side == 0)
      // exactly on the diagonal; treat as degenerate rather than pick a side
      return {0.0, 0.0, true};
  }
  const auto st = detail::make_stencil(grid, z_ph, z_el, side);
  if (st.count == 0) return {0.0, 0.0, true};

  double v_ph = 0.0, v_el = 0.0;
  bool any_live = false;
  for (int k = 0; k < st.count; ++k) {
    const CellVelocity cv = cell_velocity(field, st.index[k]);
    if (!cv.degenerate) any_live = true;
    v_ph += st.weight[k] * cv.v_ph;
    v_el += st.weight[k] * cv.v_el;
  }
  if (!any_live) return {0.0, 0.0, true};
  const double inv = 1.0 / st.wsum;
  return {v_ph * inv, v_el * inv, false};
}

namespace {

struct PairStepFlags {
  std::uint8_t crossed = 0;
  std::uint8_t degenerate = 0;
  std::uint8_t froze = 0;
};

// Projects a pair that stepped over the diagonal back to half-cell
// separation on its original side, keeping the midpoint.
inline void project_to_side(PairPosition& p, int side, double dz) {
  const double mid = 0.5 * (p.z_ph + p.z_el);
  p.z_ph = mid + side * 0.25 * dz;
  p.z_el = mid - side * 0.25 * dz;
}

} // namespace

void advance_pairs(std::vector<PairPosition>& pairs, const SpinorField2B& pre,
                   const SpinorField2B& post, const EvolutionParams& params,
                   GuidanceCounters& counters, unsigned threads) {
  const GridSpec& grid = pre.grid;
  const double dt = grid.dz;
  const bool interacting = (params.mode == InteractionMode::interacting);
  const double zmin = grid.z_min();
  const double zmax = grid.z_max();

  std::vector<PairStepFlags> flags(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      PairPosition& p = pairs[k];
      if (!p.alive) continue;
      const int side = (p.z_ph > p.z_el) ? +1 : -1;

      const VelocitySample v1 = velocity_at(pre, params.mode, p.z_ph, p.z_el);
      PairPosition predicted{p.z_ph + dt * v1.v_ph, p.z_el + dt * v1.v_el, true};
      predicted.z_ph = std::clamp(predicted.z_ph, zmin, zmax);
      predicted.z_el = std::clamp(predicted.z_el, zmin, zmax);
      // keep the evaluation point of the corrector on the pair's side
      if (interacting && (predicted.z_ph - predicted.z_el) * side <= 0.0)
        project_to_side(predicted, side, grid.dz);
      const VelocitySample v2 = velocity_at(post, params.mode, predicted.z_ph, predicted.z_el);

      if (v1.degenerate || v2.degenerate) flags[k].degenerate = 1;

      PairPosition next{p.z_ph + 0.5 * dt * (v1.v_ph + v2.v_ph),
                        p.z_el + 0.5 * dt * (v1.v_el + v2.v_el), true};
      if (interacting && (next.z_ph - next.z_el) * side <= 0.0) {
        project_to_side(next, side, grid.dz);
        flags[k].crossed = 1;
      }
      if (next.z_ph < zmin || next.z_ph > zmax || next.z_el < zmin || next.z_el > zmax) {
        flags[k].froze = 1;
        p.alive = false;
        continue;
      }
      p.z_ph = next.z_ph;
      p.z_el = next.z_el;
    }
  });
  for (const PairStepFlags& f : flags) {
    counters.crossing_guard_events += f.crossed;
    counters.degenerate_events += f.degenerate;
    counters.frozen_pairs += f.froze;
  }
}

IntegrateResult integrate_pairs(const std::vector<PairPosition>& initial, SpinorField2B field,
                                const EvolutionParams& params, long n_steps) {
  if (n_steps < 0) throw ValidationError("integrate_pairs: n_steps must be >= 0");
  validate_params(params);

  IntegrateResult result;
  result.trajectories.resize(initial.size());
  for (std::size_t k = 0; k < initial.size(); ++k) {
    result.trajectories[k].sample_index = k;
    result.trajectories[k].times.push_back(0.0);
    result.trajectories[k].positions.push_back(initial[k]);
  }

  std::vector<PairPosition> pairs = initial;
  SpinorField2B scratch(field.grid);
  SpinorField2B pre(field.grid);
  const double dt = field.grid.dz;

  for (long s = 1; s <= n_steps; ++s) {
    pre = field;
    const StepDiagnostics diag = step(field, scratch, params, s);
    advance_pairs(pairs, pre, field, params, result.counters, params.threads);
    result.steps_completed = s;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      result.trajectories[k].times.push_back(s * dt);
      result.trajectories[k].positions.push_back(pairs[k]);
    }
    if (diag.edge_norm > kEdgeNormAbortThreshold) {
      result.field_status = EvolveStatus::edge_abort;
      break;
    }
  }
  result.final_field = std::move(field);
  return result;
}

} // namespace phel
