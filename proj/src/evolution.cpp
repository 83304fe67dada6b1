#include "phel/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "detail_interp.hpp"
#include "phel/errors.hpp"
#include "phel/parallel.hpp"

namespace phel {

void validate_params(const EvolutionParams& params) {
  if (!(params.mass >= 0.0) || !std::isfinite(params.mass))
    throw ValidationError("evolution params: mass must be finite and >= 0");
  if (!std::isfinite(params.theta) || params.theta < 0.0 || params.theta >= 2.0 * M_PI)
    throw ValidationError("evolution params: theta must lie in [0, 2pi)");
}

void mass_rotation(SpinorField2B& field, double mass, double dt_fraction, unsigned threads) {
  const double alpha = mass * dt_fraction;
  if (alpha == 0.0) return;
  const double co = std::cos(alpha);
  const cplx mi_sin{0.0, -std::sin(alpha)};
  for (int ab = 0; ab < 2; ++ab) {
    cplx* minus = field.comp[(ab << 1) | 0].data();
    cplx* plus = field.comp[(ab << 1) | 1].data();
    parallel_for(field.cells(), threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        const cplx vm = minus[k];
        const cplx vp = plus[k];
        minus[k] = co * vm + mi_sin * vp;
        plus[k] = mi_sin * vm + co * vp;
      }
    });
  }
}

namespace {

struct AxisSource {
  int cell;
  int chirality;
};

// Hard-wall box: a shift that would leave the grid reflects in place with
// flipped chirality and phase +1.
inline AxisSource axis_source(int target, int chirality, int n) {
  const int s = target - chirality;
  if (s < 0) return {0, -chirality};
  if (s >= n) return {n - 1, -chirality};
  return {s, chirality};
}

} // namespace

void transport_step(const SpinorField2B& in, SpinorField2B& out, const EvolutionParams& params) {
  const int n = in.grid.n;
  if (out.grid.n != n) out = SpinorField2B(in.grid);
  const bool interacting = (params.mode == InteractionMode::interacting);
  if (interacting && in.max_diagonal_abs() != 0.0)
    throw PhysicsError("transport_step: nonzero diagonal amplitude in interacting mode");

  const cplx phase = std::polar(1.0, params.theta);
  const int c_recede_right = comp_index(+1, -1); // receding component on i > j
  const int c_recede_left = comp_index(-1, +1);  // receding component on i < j

  // One source amplitude per target cell. The coincidence-set rule replaces
  // the receding component's source at |i-j| in {1, 2}, where the regular
  // shift would otherwise read from across (or on) the diagonal, with the
  // in-place reflection of the approaching component times e^{i theta}.
  // At the four cells where the diagonal meets a wall corner, the co-moving
  // components' wall-flipped source lands on the excluded diagonal cell;
  // there the amplitude bounces off wall and boundary within one step, an
  // in-place flip of both chiralities with the same phase. Every other
  // source-on-diagonal read hits an identically-zero cell.
  auto cell_value = [&](int c, int a, int b, int i, int j) -> cplx {
    if (interacting) {
      const int d = i - j;
      if (d == 0) return cplx{0.0, 0.0};
      if (c == c_recede_right && (d == 1 || d == 2)) return phase * in.at(c_recede_left, i, j);
      if (c == c_recede_left && (d == -1 || d == -2)) return phase * in.at(c_recede_right, i, j);
    }
    const AxisSource sp = axis_source(i, a, n);
    const AxisSource se = axis_source(j, b, n);
    if (interacting && a == b && sp.cell == se.cell)
      return phase * in.at(comp_index(-a, -b), i, j);
    return in.at(comp_index(sp.chirality, se.chirality), sp.cell, se.cell);
  };

  for (int c = 0; c < 4; ++c) {
    const int a = photon_chirality_of(c);
    const int b = electron_chirality_of(c);
    parallel_for(static_cast<std::size_t>(n), params.threads,
                 [&, c, a, b](std::size_t begin, std::size_t end) {
      for (std::size_t row = begin; row < end; ++row) {
        const int i = static_cast<int>(row);
        cplx* dst = out.comp[c].data() + row * n;
        dst[0] = cell_value(c, a, b, i, 0);
        dst[n - 1] = cell_value(c, a, b, i, n - 1);
        // interior cells j in [1, n-2] never flip at the electron wall
        const AxisSource sp = axis_source(i, a, n);
        const cplx* src = in.comp[comp_index(sp.chirality, b)].data() +
                          static_cast<std::size_t>(sp.cell) * n;
        if (interacting) {
          const int wlo = std::max(1, i - 2);
          const int whi = std::min(n - 2, i + 2);
          for (int j = 1; j < wlo; ++j) dst[j] = src[j - b];
          for (int j = wlo; j <= whi; ++j) dst[j] = cell_value(c, a, b, i, j);
          for (int j = whi + 1; j <= n - 2; ++j) dst[j] = src[j - b];
        } else {
          for (int j = 1; j <= n - 2; ++j) dst[j] = src[j - b];
        }
      }
    });
  }
}

namespace {

void apply_step(SpinorField2B& field, SpinorField2B& scratch, const EvolutionParams& params) {
  const double half_dt = 0.5 * field.grid.dz;
  mass_rotation(field, params.mass, half_dt, params.threads);
  transport_step(field, scratch, params);
  std::swap(field.comp, scratch.comp);
  mass_rotation(field, params.mass, half_dt, params.threads);
}

} // namespace

StepDiagnostics step(SpinorField2B& field, SpinorField2B& scratch, const EvolutionParams& params,
                     long step_index) {
  validate_params(params);
  if (scratch.grid.n != field.grid.n) scratch = SpinorField2B(field.grid);
  apply_step(field, scratch, params);
  const FieldNorms norms = field_norms(field, params.threads);
  return StepDiagnostics{step_index, norms.total, norms.sides.photon_right,
                         norms.sides.photon_left, norms.edge};
}

SpinorField2B stepped(const SpinorField2B& field, const EvolutionParams& params) {
  SpinorField2B copy = field;
  SpinorField2B scratch(field.grid);
  step(copy, scratch, params);
  return copy;
}

EvolveResult evolve(SpinorField2B& field, const EvolutionParams& params, long n_steps,
                    long snapshot_stride, const SnapshotSink& sink, bool keep_snapshots) {
  if (n_steps < 0) throw ValidationError("evolve: n_steps must be >= 0");
  validate_params(params);

  EvolveResult result;
  SpinorField2B scratch(field.grid);
  auto emit = [&](long s) {
    std::vector<double> rho = density(field);
    if (sink) sink(s, rho);
    if (keep_snapshots) result.snapshots.push_back(DensitySnapshot{s, std::move(rho)});
  };

  emit(0);
  result.diagnostics.reserve(static_cast<std::size_t>(n_steps));
  for (long s = 1; s <= n_steps; ++s) {
    const StepDiagnostics diag = step(field, scratch, params, s);
    result.diagnostics.push_back(diag);
    result.steps_completed = s;
    if (diag.edge_norm > kEdgeNormAbortThreshold) {
      emit(s);
      result.status = EvolveStatus::edge_abort;
      return result;
    }
    if (s == n_steps || (snapshot_stride > 0 && s % snapshot_stride == 0)) emit(s);
  }
  return result;
}

OneStepMatrix one_step_matrix(const EvolutionParams& params, const GridSpec& small_grid) {
  if (small_grid.n > 24)
    throw ValidationError("one_step_matrix: grid too large (n must be <= 24), got n = " +
                          std::to_string(small_grid.n));
  validate_params(params);
  const bool interacting = (params.mode == InteractionMode::interacting);
  const int n = small_grid.n;

  OneStepMatrix m;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (interacting && i == j) continue;
        m.basis.push_back({c, i, j});
      }
  m.dim = m.basis.size();
  m.data.assign(m.dim * m.dim, cplx{0.0, 0.0});

  EvolutionParams serial = params;
  serial.threads = 1;
  SpinorField2B unit(small_grid), scratch(small_grid);
  for (std::size_t col = 0; col < m.dim; ++col) {
    for (auto& plane : unit.comp) std::fill(plane.begin(), plane.end(), cplx{0.0, 0.0});
    const auto [c, i, j] = m.basis[col];
    unit.at(c, i, j) = cplx{1.0, 0.0};
    apply_step(unit, scratch, serial);
    for (std::size_t row = 0; row < m.dim; ++row) {
      const auto [c2, i2, j2] = m.basis[row];
      m.data[col * m.dim + row] = unit.at(c2, i2, j2);
    }
  }
  return m;
}

std::vector<cplx> flatten_field(const SpinorField2B& field, const OneStepMatrix& matrix) {
  std::vector<cplx> v(matrix.dim);
  for (std::size_t k = 0; k < matrix.dim; ++k) {
    const auto [c, i, j] = matrix.basis[k];
    v[k] = field.at(c, i, j);
  }
  return v;
}

std::array<cplx, 4> multi_time_extend(const SpinorField2B& field_at_t,
                                      const EvolutionParams& params, double tau, double z_ph,
                                      double z_el) {
  if (!(tau >= 0.0) || !std::isfinite(tau))
    throw ValidationError("multi_time_extend: tau must be finite and >= 0");
  const GridSpec& grid = field_at_t.grid;
  if (!grid.contains(z_ph) || !grid.contains(z_el))
    throw ValidationError("multi_time_extend: evaluation point outside the grid");
  if (!(std::abs(z_ph - z_el) > tau))
    throw ValidationError("multi_time_extend: configuration must be spacelike separated "
                          "(requires |z_ph - z_el| > tau)");

  const bool interacting = (params.mode == InteractionMode::interacting);
  int side = 0;
  if (interacting) side = (z_ph > z_el) ? +1 : -1;

  std::array<cplx, 4> out{};
  for (int c = 0; c < 4; ++c) {
    const int a = photon_chirality_of(c);
    const double foot = z_ph - a * tau;
    if (!grid.contains(foot))
      throw ValidationError("multi_time_extend: transported photon point leaves the grid");
    const auto st = detail::make_stencil(grid, foot, z_el, side);
    cplx acc{0.0, 0.0};
    for (int k = 0; k < st.count; ++k) acc += st.weight[k] * field_at_t.comp[c][st.index[k]];
    out[c] = (st.count > 0 && st.wsum > 0.0) ? acc / st.wsum : cplx{0.0, 0.0};
  }
  return out;
}

} // namespace phel
