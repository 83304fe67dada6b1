#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "phel/grid.hpp"

namespace phel {

using cplx = std::complex<double>;

// State of the scalar relativistic wave equation
//   (-i hbar d_t + V)^2 psi = (-i hbar d_q)^2 psi + m^2 psi
// as a first-order system in (psi, psi_dot). V is a static external
// potential identified with the time component of A.
struct KGState {
  Grid1D grid;
  double hbar = 1.0;
  double mass = 0.0;
  double time = 0.0;
  std::vector<double> V;
  std::vector<cplx> psi;
  std::vector<cplx> psi_dot;
};

// Leapfrog (three-level centered) evolution, second order in dt and dq,
// periodic boundary. Requires dt <= dq; output holds every output_stride-th
// slice including t = 0, the final one, and the last tail_window slices (for
// time-stencil diagnostics). Non-finite blowup raises PhysicsError with the
// step index.
std::vector<KGState> solve_kg(const KGState& init, long n_steps, double dt,
                              long output_stride = 1, long tail_window = 0);

// Amplitude/phase split rho = |psi|^2, s_tilde = hbar * unwrapped phase
// (integrated outward from the global density maximum), u1 = d_q s_tilde by
// centered differences, u0 = hbar Im(psi_dot conj(psi)) / rho + V.
// valid marks cells with rho > 1e-12 max(rho); derivative fields are only
// meaningful where the whole stencil is valid.
struct MadelungPair {
  std::vector<double> rho;
  std::vector<double> s_tilde;
  std::vector<double> u0;
  std::vector<double> u1;
  std::vector<std::uint8_t> valid;
  bool valid_connected = true; // cyclically contiguous valid set
};

MadelungPair madelung(const KGState& state);

// Phase-equation residual R = u0^2 - u1^2 - m^2 (zero for classical
// Hamilton-Jacobi data; equal to the quantum correction for exact solutions).
std::vector<double> hj_residual(const MadelungPair& pair, double mass);

// hbar^2 (d_tt - d_qq) sqrt(rho) / sqrt(rho) from three consecutive slices.
std::vector<double> quantum_correction(const MadelungPair& prev, const MadelungPair& mid,
                                       const MadelungPair& next, double hbar, double dt,
                                       const Grid1D& grid);

// Discrete residual of d_t(rho u0) - d_q(rho u1) = 0 across three slices.
std::vector<double> continuity_residual(const MadelungPair& prev, const MadelungPair& mid,
                                        const MadelungPair& next, double dt,
                                        const Grid1D& grid);

// Sup norm restricted to cells whose full residual stencil is valid.
double masked_sup(const std::vector<double>& values, const std::vector<std::uint8_t>& valid);

// WKB family: fixed (rho0, s0) across hbar. rho0 is a Gaussian bump, s0 a
// Gaussian phase profile. psi_dot selects one frequency branch spectrally,
//   psi_dot = (i/hbar) (branch_sign * Op(sqrt(m^2 + k^2)) - V) psi,
// whose eikonal limit is the branch d_t s_tilde = -V + branch_sign
// sqrt(m^2 + (d_q s0)^2). The spectral projection keeps the opposite branch
// empty so sqrt(rho) stays hbar-uniformly smooth.
struct WkbFamilySpec {
  double mass = 1.0;
  double v0 = 0.1;         // potential bump amplitude
  double v_width = 2.0;    // potential bump width
  double rho_center = 0.0;
  double rho_width = 1.0;
  double phase_amplitude = 0.2;
  double phase_width = 2.0;
  int branch_sign = -1;
};

std::vector<double> wkb_potential(const Grid1D& grid, const WkbFamilySpec& spec);
KGState wkb_initial_state(const Grid1D& grid, const WkbFamilySpec& spec, double hbar);

// Largest frequency scale of the family (bounds |u0|); the phase rate of psi
// is u0/hbar, so time steps must resolve time_resolution * hbar / u0.
double wkb_frequency_scale(const Grid1D& grid, const WkbFamilySpec& spec);

// Step size resolving both the lattice (cfl * dq) and the fast temporal
// phase (time_resolution * hbar / u0_scale).
double wkb_time_step(const Grid1D& grid, const WkbFamilySpec& spec, double hbar, double cfl,
                     double time_resolution);

struct ScalingConfig {
  Grid1D grid;
  WkbFamilySpec family;
  std::vector<double> hbar_list;
  double cfl = 0.9;               // spatial CFL bound on dt
  double time_resolution = 0.006; // temporal phase resolution bound on dt
  double t_final = 0.5;
  unsigned threads = 1;
};

struct ScalingReport {
  std::vector<double> hbar_list;
  std::vector<double> sup_residuals;     // sup |hj_residual| per hbar
  std::vector<bool> caustic_flags;       // valid mask fragmented
  bool pre_caustic_violated = false;
  double slope = 0.0;                    // least squares on log-log
};

// Least-squares slope of log sup|hj_residual| against log hbar over the
// family. Requires >= 4 hbar values spanning at least a factor 8.
ScalingReport scaling_study(const ScalingConfig& config);

// End-of-run residual magnitudes for refinement studies: the continuity
// residual and the gap between hj_residual and the quantum correction, both
// sup-normed over the jointly valid stencil cells of the last three slices.
// dt is explicit so refinement studies can halve space and time together.
struct ResidualProbe {
  double continuity_sup = 0.0;
  double madelung_gap_sup = 0.0;
  double dt = 0.0;
  long n_steps = 0;
};
ResidualProbe residual_probe(const Grid1D& grid, const WkbFamilySpec& family, double hbar,
                             double dt, double t_final);

struct WitnessReport {
  double min_value = 0.0;
  int min_index = 0;
  double min_coordinate = 0.0;
  double oracle_min_value = 0.0;
  double oracle_nearest_location = 0.0;
  bool matched_within_one_cell = false;
  bool strictly_negative = false;
  int mode_hi = 0;
  int mode_lo = 0;
};

// Two-mode superposition of a positive-frequency mode (integer mode number
// mode_hi) and a negative-frequency mode (mode_lo, |k_lo| < |k_hi|) on the
// periodic grid; returns the minimum of rho u^0 together with the closed-form
// interference prediction. Requires m > 0.
WitnessReport negative_density_witness(const Grid1D& grid, double mass, double hbar,
                                       int mode_hi = 8, int mode_lo = 3);

} // namespace phel
