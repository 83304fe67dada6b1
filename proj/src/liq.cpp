#include "phel/liq.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "phel/errors.hpp"

namespace phel {

namespace {

void validate_state(const KGState& state) {
  const std::size_t n = static_cast<std::size_t>(state.grid.n_q);
  if (state.psi.size() != n || state.psi_dot.size() != n || state.V.size() != n)
    throw ValidationError("kg state: array sizes must match the grid");
  if (!(state.hbar > 0.0)) throw ValidationError("kg state: hbar must be positive");
  if (!(state.mass >= 0.0)) throw ValidationError("kg state: mass must be >= 0");
  if (!state.grid.periodic)
    throw ValidationError("kg state: only the periodic boundary is implemented");
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(state.psi[k].real()) || !std::isfinite(state.psi[k].imag()) ||
        !std::isfinite(state.psi_dot[k].real()) || !std::isfinite(state.psi_dot[k].imag()) ||
        !std::isfinite(state.V[k]))
      throw ValidationError("kg state: non-finite initial data");
  }
}

bool finite_all(const std::vector<cplx>& v) {
  for (const cplx& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

} // namespace

std::vector<KGState> solve_kg(const KGState& init, long n_steps, double dt, long output_stride,
                              long tail_window) {
  validate_state(init);
  if (n_steps < 0) throw ValidationError("solve_kg: n_steps must be >= 0");
  if (!(dt > 0.0) || !(dt <= init.grid.dq))
    throw ValidationError("solve_kg: requires 0 < dt <= dq (CFL)");
  if (output_stride < 1) output_stride = 1;

  const int n = init.grid.n_q;
  const double dq2 = init.grid.dq * init.grid.dq;
  const double hbar = init.hbar;

  std::vector<double> W(n), beta(n);
  for (int k = 0; k < n; ++k) {
    W[k] = (init.V[k] * init.V[k] - init.mass * init.mass) / (hbar * hbar);
    beta[k] = init.V[k] * dt / hbar;
  }

  auto second_difference = [&](const std::vector<cplx>& psi, int k) {
    const int kp = (k + 1) % n;
    const int km = (k + n - 1) % n;
    return (psi[kp] - 2.0 * psi[k] + psi[km]) / dq2;
  };

  std::vector<KGState> out;
  auto emit = [&](long s, const std::vector<cplx>& psi, const std::vector<cplx>& psi_dot) {
    KGState slice;
    slice.grid = init.grid;
    slice.hbar = hbar;
    slice.mass = init.mass;
    slice.V = init.V;
    slice.time = init.time + s * dt;
    slice.psi = psi;
    slice.psi_dot = psi_dot;
    out.push_back(std::move(slice));
  };
  auto wanted = [&](long s) {
    return s == n_steps || s % output_stride == 0 || s + tail_window > n_steps;
  };

  emit(0, init.psi, init.psi_dot);
  if (n_steps == 0) return out;

  // second-order startup from (psi, psi_dot) using the discrete spatial operator
  std::vector<cplx> prev = init.psi;
  std::vector<cplx> cur(n);
  for (int k = 0; k < n; ++k) {
    const cplx tt = second_difference(init.psi, k) + W[k] * init.psi[k] -
                    cplx{0.0, 2.0 / hbar} * (init.V[k] * init.psi_dot[k]);
    cur[k] = init.psi[k] + dt * init.psi_dot[k] + 0.5 * dt * dt * tt;
  }

  std::vector<cplx> next(n), psi_dot(n);
  for (long s = 1; s <= n_steps; ++s) {
    for (int k = 0; k < n; ++k) {
      const cplx rhs = 2.0 * cur[k] + dt * dt * (second_difference(cur, k) + W[k] * cur[k]) -
                       cplx{1.0, -beta[k]} * prev[k];
      next[k] = rhs / cplx{1.0, beta[k]};
    }
    if (!finite_all(next))
      throw PhysicsError("solve_kg: non-finite blowup at step " + std::to_string(s));
    if (wanted(s)) {
      const double inv2dt = 1.0 / (2.0 * dt);
      for (int k = 0; k < n; ++k) psi_dot[k] = (next[k] - prev[k]) * inv2dt;
      emit(s, cur, psi_dot);
    }
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return out;
}

MadelungPair madelung(const KGState& state) {
  validate_state(state);
  const int n = state.grid.n_q;
  MadelungPair pair;
  pair.rho.resize(n);
  pair.s_tilde.assign(n, 0.0);
  pair.u0.assign(n, 0.0);
  pair.u1.assign(n, 0.0);
  pair.valid.assign(n, 0);

  double max_rho = 0.0;
  int anchor = 0;
  for (int k = 0; k < n; ++k) {
    pair.rho[k] = std::norm(state.psi[k]);
    if (pair.rho[k] > max_rho) {
      max_rho = pair.rho[k];
      anchor = k;
    }
  }
  if (!(max_rho > 0.0)) throw ValidationError("madelung: field is identically zero");
  const double floor = 1e-12 * max_rho;
  for (int k = 0; k < n; ++k) pair.valid[k] = pair.rho[k] > floor ? 1 : 0;

  // cyclic connectivity of the valid set (caustic monitor)
  int transitions = 0;
  for (int k = 0; k < n; ++k)
    if (pair.valid[k] != pair.valid[(k + 1) % n]) ++transitions;
  pair.valid_connected = transitions <= 2;

  // u0 needs no unwrapping
  for (int k = 0; k < n; ++k) {
    if (!pair.valid[k]) continue;
    pair.u0[k] =
        state.hbar * std::imag(state.psi_dot[k] * std::conj(state.psi[k])) / pair.rho[k] +
        state.V[k];
  }

  // phase unwrapped outward from the density maximum, in both directions
  pair.s_tilde[anchor] = state.hbar * std::arg(state.psi[anchor]);
  const int right_span = n / 2;
  double th = std::arg(state.psi[anchor]);
  for (int off = 1; off <= right_span; ++off) {
    const int k = (anchor + off) % n;
    const int km = (anchor + off - 1 + n) % n;
    th += std::arg(state.psi[k] * std::conj(state.psi[km]));
    pair.s_tilde[k] = state.hbar * th;
  }
  th = std::arg(state.psi[anchor]);
  for (int off = 1; off < n - right_span; ++off) {
    const int k = (anchor - off + n) % n;
    const int kp = (anchor - off + 1 + n) % n;
    th -= std::arg(state.psi[kp] * std::conj(state.psi[k]));
    pair.s_tilde[k] = state.hbar * th;
  }

  // centered phase gradient via principal values, immune to the unwrap seam
  const double inv2dq = 1.0 / (2.0 * state.grid.dq);
  for (int k = 0; k < n; ++k) {
    const int kp = (k + 1) % n;
    const int km = (k + n - 1) % n;
    if (!pair.valid[k] || !pair.valid[kp] || !pair.valid[km]) continue;
    pair.u1[k] = state.hbar * std::arg(state.psi[kp] * std::conj(state.psi[km])) * inv2dq;
  }
  return pair;
}

std::vector<double> hj_residual(const MadelungPair& pair, double mass) {
  const int n = static_cast<int>(pair.rho.size());
  std::vector<double> r(n, 0.0);
  for (int k = 0; k < n; ++k) {
    const int kp = (k + 1) % n;
    const int km = (k + n - 1) % n;
    if (!pair.valid[k] || !pair.valid[kp] || !pair.valid[km]) continue;
    r[k] = pair.u0[k] * pair.u0[k] - pair.u1[k] * pair.u1[k] - mass * mass;
  }
  return r;
}

std::vector<double> quantum_correction(const MadelungPair& prev, const MadelungPair& mid,
                                       const MadelungPair& next, double hbar, double dt,
                                       const Grid1D& grid) {
  const int n = grid.n_q;
  if (static_cast<int>(prev.rho.size()) != n || static_cast<int>(mid.rho.size()) != n ||
      static_cast<int>(next.rho.size()) != n)
    throw ValidationError("quantum_correction: needs three slices on the same grid");
  std::vector<double> out(n, 0.0);
  const double inv_dt2 = 1.0 / (dt * dt);
  const double inv_dq2 = 1.0 / (grid.dq * grid.dq);
  for (int k = 0; k < n; ++k) {
    const int kp = (k + 1) % n;
    const int km = (k + n - 1) % n;
    if (!mid.valid[k] || !mid.valid[kp] || !mid.valid[km] || !prev.valid[k] || !next.valid[k])
      continue;
    const double a = std::sqrt(mid.rho[k]);
    const double d_tt = (std::sqrt(next.rho[k]) - 2.0 * a + std::sqrt(prev.rho[k])) * inv_dt2;
    const double d_qq = (std::sqrt(mid.rho[kp]) - 2.0 * a + std::sqrt(mid.rho[km])) * inv_dq2;
    out[k] = hbar * hbar * (d_tt - d_qq) / a;
  }
  return out;
}

std::vector<double> continuity_residual(const MadelungPair& prev, const MadelungPair& mid,
                                        const MadelungPair& next, double dt,
                                        const Grid1D& grid) {
  const int n = grid.n_q;
  if (static_cast<int>(prev.rho.size()) != n || static_cast<int>(mid.rho.size()) != n ||
      static_cast<int>(next.rho.size()) != n)
    throw ValidationError("continuity_residual: needs three slices on the same grid");
  std::vector<double> out(n, 0.0);
  const double inv2dt = 1.0 / (2.0 * dt);
  const double inv2dq = 1.0 / (2.0 * grid.dq);
  for (int k = 0; k < n; ++k) {
    const int kp = (k + 1) % n;
    const int km = (k + n - 1) % n;
    if (!mid.valid[kp] || !mid.valid[km] || !prev.valid[k] || !next.valid[k]) continue;
    const double d_t = (next.rho[k] * next.u0[k] - prev.rho[k] * prev.u0[k]) * inv2dt;
    const double d_q = (mid.rho[kp] * mid.u1[kp] - mid.rho[km] * mid.u1[km]) * inv2dq;
    out[k] = d_t - d_q;
  }
  return out;
}

double masked_sup(const std::vector<double>& values, const std::vector<std::uint8_t>& valid) {
  double m = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (valid[k]) m = std::max(m, std::abs(values[k]));
  return m;
}

std::vector<double> wkb_potential(const Grid1D& grid, const WkbFamilySpec& spec) {
  std::vector<double> V(grid.n_q);
  for (int k = 0; k < grid.n_q; ++k) {
    const double q = grid.q(k);
    V[k] = spec.v0 * std::exp(-q * q / (2.0 * spec.v_width * spec.v_width));
  }
  return V;
}

namespace {

// Op(sqrt(m^2 + k^2)) applied through the discrete Fourier transform.
// The FFTW planner is not thread-safe; execution is.
std::vector<cplx> apply_dispersion_root(const std::vector<cplx>& psi, const Grid1D& grid,
                                        double hbar, double mass) {
  static std::mutex planner_mutex;
  const int n = grid.n_q;
  fftw_complex* buf = fftw_alloc_complex(static_cast<std::size_t>(n));
  fftw_plan forward, backward;
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    forward = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    backward = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  for (int k = 0; k < n; ++k) {
    buf[k][0] = psi[k].real();
    buf[k][1] = psi[k].imag();
  }
  fftw_execute(forward);
  const double L = grid.length();
  for (int k = 0; k < n; ++k) {
    const int mode = (k <= n / 2) ? k : k - n;
    const double kk = 2.0 * M_PI * hbar * mode / L;
    const double scale = std::sqrt(mass * mass + kk * kk) / n;
    buf[k][0] *= scale;
    buf[k][1] *= scale;
  }
  fftw_execute(backward);
  std::vector<cplx> out(n);
  for (int k = 0; k < n; ++k) out[k] = cplx{buf[k][0], buf[k][1]};
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  fftw_free(buf);
  return out;
}

} // namespace

KGState wkb_initial_state(const Grid1D& grid, const WkbFamilySpec& spec, double hbar) {
  if (!(hbar > 0.0)) throw ValidationError("wkb_initial_state: hbar must be positive");
  if (!(spec.mass > 0.0))
    throw ValidationError("wkb_initial_state: the branch construction needs m > 0");
  if (spec.branch_sign != 1 && spec.branch_sign != -1)
    throw ValidationError("wkb_initial_state: branch_sign must be +1 or -1");
  if (!grid.periodic) throw ValidationError("wkb_initial_state: requires a periodic grid");

  const int n = grid.n_q;
  KGState state;
  state.grid = grid;
  state.hbar = hbar;
  state.mass = spec.mass;
  state.V = wkb_potential(grid, spec);

  const double wr2 = spec.rho_width * spec.rho_width;
  const double ws2 = spec.phase_width * spec.phase_width;

  state.psi.resize(n);
  state.psi_dot.resize(n);
  for (int k = 0; k < n; ++k) {
    const double u = grid.q(k) - spec.rho_center;
    const double rho0 = std::max(std::exp(-u * u / (2.0 * wr2)), 1e-300);
    const double s0 = spec.phase_amplitude * std::exp(-u * u / (2.0 * ws2));
    state.psi[k] = std::sqrt(rho0) * std::polar(1.0, s0 / hbar);
  }

  // single-branch psi_dot = (i/hbar)(branch Op(sqrt(m^2+k^2)) - V) psi
  const std::vector<cplx> omega_psi = apply_dispersion_root(state.psi, grid, hbar, spec.mass);
  const double sgn = static_cast<double>(spec.branch_sign);
  for (int k = 0; k < n; ++k)
    state.psi_dot[k] =
        cplx{0.0, 1.0 / hbar} * (sgn * omega_psi[k] - state.V[k] * state.psi[k]);
  return state;
}

double wkb_frequency_scale(const Grid1D& grid, const WkbFamilySpec& spec) {
  double max_slope = 0.0;
  double max_v = 0.0;
  const double ws2 = spec.phase_width * spec.phase_width;
  for (int k = 0; k < grid.n_q; ++k) {
    const double u = grid.q(k) - spec.rho_center;
    const double s0 = spec.phase_amplitude * std::exp(-u * u / (2.0 * ws2));
    max_slope = std::max(max_slope, std::abs(-u / ws2 * s0));
    const double q = grid.q(k);
    max_v = std::max(max_v, std::abs(spec.v0) * std::exp(-q * q / (2.0 * spec.v_width * spec.v_width)));
  }
  return std::sqrt(spec.mass * spec.mass + max_slope * max_slope) + max_v;
}

double wkb_time_step(const Grid1D& grid, const WkbFamilySpec& spec, double hbar, double cfl,
                     double time_resolution) {
  if (!(cfl > 0.0) || cfl > 1.0) throw ValidationError("wkb_time_step: cfl must lie in (0, 1]");
  if (!(time_resolution > 0.0))
    throw ValidationError("wkb_time_step: time_resolution must be positive");
  const double u0_scale = wkb_frequency_scale(grid, spec);
  return std::min(cfl * grid.dq, time_resolution * hbar / u0_scale);
}

ScalingReport scaling_study(const ScalingConfig& config) {
  if (config.hbar_list.size() < 4)
    throw ValidationError("scaling_study: needs at least 4 hbar values");
  const auto [mn, mx] = std::minmax_element(config.hbar_list.begin(), config.hbar_list.end());
  if (!(*mn > 0.0) || *mx / *mn < 8.0 - 1e-12)
    throw ValidationError("scaling_study: hbar values must be positive and span at least 8x");

  ScalingReport report;
  report.hbar_list = config.hbar_list;
  for (double hbar : config.hbar_list) {
    const KGState init = wkb_initial_state(config.grid, config.family, hbar);
    const double dt =
        wkb_time_step(config.grid, config.family, hbar, config.cfl, config.time_resolution);
    const long n_steps = std::max<long>(1, std::lround(std::ceil(config.t_final / dt)));
    const std::vector<KGState> slices = solve_kg(init, n_steps, dt, n_steps);
    const MadelungPair pair = madelung(slices.back());
    const bool caustic = !pair.valid_connected;
    report.caustic_flags.push_back(caustic);
    if (caustic) report.pre_caustic_violated = true;
    report.sup_residuals.push_back(masked_sup(hj_residual(pair, config.family.mass), pair.valid));
  }

  // least squares slope of log sup|R| against log hbar
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double count = static_cast<double>(config.hbar_list.size());
  for (std::size_t k = 0; k < config.hbar_list.size(); ++k) {
    const double x = std::log(config.hbar_list[k]);
    const double y = std::log(std::max(report.sup_residuals[k], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  report.slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return report;
}

ResidualProbe residual_probe(const Grid1D& grid, const WkbFamilySpec& family, double hbar,
                             double dt, double t_final) {
  if (!(dt > 0.0) || !(dt <= grid.dq))
    throw ValidationError("residual_probe: requires 0 < dt <= dq");
  const long n_steps = std::max<long>(3, std::lround(std::ceil(t_final / dt)));
  const KGState init = wkb_initial_state(grid, family, hbar);
  const std::vector<KGState> slices = solve_kg(init, n_steps, dt, n_steps, 3);
  const std::size_t last = slices.size() - 1;
  const MadelungPair prev = madelung(slices[last - 2]);
  const MadelungPair mid = madelung(slices[last - 1]);
  const MadelungPair next = madelung(slices[last]);

  // residual stencil validity across all three slices
  const int n = grid.n_q;
  std::vector<std::uint8_t> mask(n, 0);
  for (int k = 0; k < n; ++k) {
    const int kp = (k + 1) % n;
    const int km = (k + n - 1) % n;
    mask[k] = mid.valid[k] && mid.valid[kp] && mid.valid[km] && prev.valid[k] &&
              next.valid[k] && prev.valid[kp] && prev.valid[km] && next.valid[kp] &&
              next.valid[km];
  }

  ResidualProbe probe;
  probe.dt = dt;
  probe.n_steps = n_steps;
  probe.continuity_sup = masked_sup(continuity_residual(prev, mid, next, dt, grid), mask);
  const std::vector<double> r = hj_residual(mid, family.mass);
  const std::vector<double> qc = quantum_correction(prev, mid, next, hbar, dt, grid);
  std::vector<double> gap(r.size(), 0.0);
  for (std::size_t k = 0; k < gap.size(); ++k) gap[k] = r[k] - qc[k];
  probe.madelung_gap_sup = masked_sup(gap, mask);
  return probe;
}

WitnessReport negative_density_witness(const Grid1D& grid, double mass, double hbar,
                                       int mode_hi, int mode_lo) {
  if (!(mass > 0.0)) throw ValidationError("negative_density_witness: requires m > 0");
  if (!(hbar > 0.0)) throw ValidationError("negative_density_witness: hbar must be positive");
  if (!grid.periodic)
    throw ValidationError("negative_density_witness: requires a periodic grid");
  if (std::abs(mode_hi) <= std::abs(mode_lo))
    throw ValidationError("negative_density_witness: |mode_hi| must exceed |mode_lo|");

  const int n = grid.n_q;
  const double L = grid.length();
  const double k_hi = 2.0 * M_PI * hbar * mode_hi / L;
  const double k_lo = 2.0 * M_PI * hbar * mode_lo / L;
  const double e_hi = std::sqrt(k_hi * k_hi + mass * mass);
  const double e_lo = std::sqrt(k_lo * k_lo + mass * mass);
  const double w_hi = +e_hi; // positive-frequency mode
  const double w_lo = -e_lo; // negative-frequency mode

  WitnessReport report;
  report.mode_hi = mode_hi;
  report.mode_lo = mode_lo;

  double min_value = 0.0;
  int min_index = -1;
  for (int k = 0; k < n; ++k) {
    const double q = grid.q(k);
    const cplx m1 = std::polar(1.0, k_hi * q / hbar);
    const cplx m2 = std::polar(1.0, k_lo * q / hbar);
    const cplx psi = m1 + m2;
    const cplx psi_dot = cplx{0.0, -1.0 / hbar} * (w_hi * m1 + w_lo * m2);
    const double rho_u0 = hbar * std::imag(psi_dot * std::conj(psi));
    if (min_index < 0 || rho_u0 < min_value) {
      min_value = rho_u0;
      min_index = k;
    }
  }
  report.min_value = min_value;
  report.min_index = min_index;
  report.min_coordinate = grid.q(min_index);
  report.strictly_negative = min_value < 0.0;

  // closed-form interference: rho u^0 = -(e_hi - e_lo)(1 + cos Delta),
  // minima where Delta = (k_hi - k_lo) q / hbar hits multiples of 2 pi
  report.oracle_min_value = -2.0 * (e_hi - e_lo);
  const double spacing = L / std::abs(mode_hi - mode_lo);
  const double j = std::round(report.min_coordinate / spacing);
  report.oracle_nearest_location = j * spacing;
  report.matched_within_one_cell =
      std::abs(report.min_coordinate - report.oracle_nearest_location) <= grid.dq + 1e-12;
  return report;
}

} // namespace phel
