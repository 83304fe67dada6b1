#include "phel.h"

#include <cstring>
#include <new>
#include <string>

#include "phel/ensemble.hpp"
#include "phel/errors.hpp"
#include "phel/evolution.hpp"
#include "phel/guidance.hpp"
#include "phel/parallel.hpp"
#include "phel/runner.hpp"
#include "phel/version.hpp"

using namespace phel;

struct phel_grid {
  GridSpec spec;
};

struct phel_field {
  SpinorField2B field;
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& msg) { t_last_error = msg; }

template <typename Fn>
phel_status guarded(Fn&& fn) {
  try {
    t_last_error.clear();
    return fn();
  } catch (const ValidationError& err) {
    set_error(err.what());
    return PHEL_ERR_VALIDATION;
  } catch (const PhysicsError& err) {
    set_error(err.what());
    return PHEL_ERR_PHYSICS;
  } catch (const IoError& err) {
    set_error(err.what());
    return PHEL_ERR_IO;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return PHEL_ERR_INTERNAL;
  } catch (const std::exception& err) {
    set_error(err.what());
    return PHEL_ERR_INTERNAL;
  }
}

phel_status require(bool ok, const char* what) {
  if (!ok) {
    set_error(std::string("invalid argument: ") + what);
    return PHEL_ERR_ARGUMENT;
  }
  return PHEL_OK;
}

WavePacketSpec to_packet(const phel_packet& p) {
  WavePacketSpec spec;
  spec.center = p.center;
  spec.width = p.width;
  spec.wavenumber = p.wavenumber;
  spec.weight_minus = cplx{p.w_minus_re, p.w_minus_im};
  spec.weight_plus = cplx{p.w_plus_re, p.w_plus_im};
  return spec;
}

EvolutionParams to_params(const phel_evolution_params& p) {
  EvolutionParams params;
  params.mass = p.mass;
  params.theta = p.theta;
  params.mode = p.interacting ? InteractionMode::interacting : InteractionMode::free;
  params.threads = resolve_threads(p.threads > 0 ? static_cast<unsigned>(p.threads) : 0);
  return params;
}

void fill_diag(phel_step_diagnostics* out, const StepDiagnostics& d) {
  if (!out) return;
  out->step_index = d.step_index;
  out->total_norm = d.total_norm;
  out->side_norm_right = d.side_norm_right;
  out->side_norm_left = d.side_norm_left;
  out->edge_norm = d.edge_norm;
}

char* dup_string(const std::string& text) {
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

phel_status run_common(const RunOutcome& outcome, char** manifest_json_out) {
  if (manifest_json_out) *manifest_json_out = dup_string(outcome.manifest_json);
  if (outcome.status == RunStatus::ok) return PHEL_OK;
  set_error(outcome.error);
  switch (outcome.status) {
    case RunStatus::validation_error: return PHEL_ERR_VALIDATION;
    case RunStatus::physics_abort: return PHEL_ERR_PHYSICS;
    case RunStatus::io_error: return PHEL_ERR_IO;
    default: return PHEL_ERR_INTERNAL;
  }
}

RunOverrides to_overrides(const char* expect_command, const char* out_dir, const uint64_t* seed,
                          const int* threads) {
  RunOverrides overrides;
  if (expect_command) overrides.expect_command = std::string(expect_command);
  if (out_dir) overrides.out_dir = std::string(out_dir);
  if (seed) overrides.seed = *seed;
  if (threads) overrides.threads = static_cast<unsigned>(*threads);
  return overrides;
}

} // namespace

extern "C" {

const char* phel_version(void) { return kVersion; }

const char* phel_last_error(void) { return t_last_error.c_str(); }

phel_status phel_grid_create(int n, double dz, double origin, phel_grid** out) {
  if (phel_status s = require(out != nullptr, "out"); s != PHEL_OK) return s;
  return guarded([&] {
    *out = new phel_grid{make_grid(n, dz, origin)};
    return PHEL_OK;
  });
}

void phel_grid_destroy(phel_grid* grid) { delete grid; }

phel_status phel_grid_info(const phel_grid* grid, int* n, double* dz, double* origin) {
  if (phel_status s = require(grid != nullptr, "grid"); s != PHEL_OK) return s;
  if (n) *n = grid->spec.n;
  if (dz) *dz = grid->spec.dz;
  if (origin) *origin = grid->spec.origin;
  return PHEL_OK;
}

phel_status phel_field_create_product_packet(const phel_grid* grid, const phel_packet* photon,
                                             const phel_packet* electron, int photon_side_left,
                                             phel_field** out) {
  if (phel_status s = require(grid && photon && electron && out, "grid/photon/electron/out");
      s != PHEL_OK)
    return s;
  return guarded([&] {
    const Side side = photon_side_left ? Side::photon_left : Side::photon_right;
    *out = new phel_field{
        init_product_packet(grid->spec, to_packet(*photon), to_packet(*electron), side)};
    return PHEL_OK;
  });
}

phel_status phel_field_clone(const phel_field* field, phel_field** out) {
  if (phel_status s = require(field && out, "field/out"); s != PHEL_OK) return s;
  return guarded([&] {
    *out = new phel_field{field->field};
    return PHEL_OK;
  });
}

void phel_field_destroy(phel_field* field) { delete field; }

phel_status phel_field_total_norm(const phel_field* field, double* out) {
  if (phel_status s = require(field && out, "field/out"); s != PHEL_OK) return s;
  return guarded([&] {
    *out = total_norm(field->field);
    return PHEL_OK;
  });
}

phel_status phel_field_side_norms(const phel_field* field, double* photon_right,
                                  double* photon_left) {
  if (phel_status s = require(field != nullptr, "field"); s != PHEL_OK) return s;
  return guarded([&] {
    const SideNorms norms = side_norms(field->field);
    if (photon_right) *photon_right = norms.photon_right;
    if (photon_left) *photon_left = norms.photon_left;
    return PHEL_OK;
  });
}

phel_status phel_field_density(const phel_field* field, double* buffer, size_t buffer_len) {
  if (phel_status s = require(field && buffer, "field/buffer"); s != PHEL_OK) return s;
  return guarded([&] {
    const std::vector<double> rho = density(field->field);
    if (buffer_len < rho.size())
      throw ValidationError("phel_field_density: buffer too small (needs n*n entries)");
    std::memcpy(buffer, rho.data(), rho.size() * sizeof(double));
    return PHEL_OK;
  });
}

phel_status phel_field_step(phel_field* field, const phel_evolution_params* params,
                            phel_step_diagnostics* diag_or_null) {
  if (phel_status s = require(field && params, "field/params"); s != PHEL_OK) return s;
  return guarded([&] {
    SpinorField2B scratch(field->field.grid);
    const StepDiagnostics diag = step(field->field, scratch, to_params(*params));
    fill_diag(diag_or_null, diag);
    return PHEL_OK;
  });
}

phel_status phel_field_evolve(phel_field* field, const phel_evolution_params* params,
                              long n_steps, long* steps_done,
                              phel_step_diagnostics* final_diag_or_null) {
  if (phel_status s = require(field && params, "field/params"); s != PHEL_OK) return s;
  return guarded([&]() -> phel_status {
    const EvolveResult result =
        evolve(field->field, to_params(*params), n_steps, 0, {}, false);
    if (steps_done) *steps_done = result.steps_completed;
    if (!result.diagnostics.empty()) fill_diag(final_diag_or_null, result.diagnostics.back());
    if (result.status == EvolveStatus::edge_abort) {
      set_error("evolve: edge-norm guard stopped the run at step " +
                std::to_string(result.steps_completed));
      return PHEL_ERR_PHYSICS;
    }
    return PHEL_OK;
  });
}

phel_status phel_field_velocity_at(const phel_field* field,
                                   const phel_evolution_params* params, double z_ph,
                                   double z_el, double* v_ph, double* v_el, int* degenerate) {
  if (phel_status s = require(field && params && v_ph && v_el, "field/params/v_ph/v_el");
      s != PHEL_OK)
    return s;
  return guarded([&] {
    const VelocitySample v = velocity_at(
        field->field, params->interacting ? InteractionMode::interacting : InteractionMode::free,
        z_ph, z_el);
    *v_ph = v.v_ph;
    *v_el = v.v_el;
    if (degenerate) *degenerate = v.degenerate ? 1 : 0;
    return PHEL_OK;
  });
}

phel_status phel_field_multitime_extend(const phel_field* field,
                                        const phel_evolution_params* params, double tau,
                                        double z_ph, double z_el, double out_re[4],
                                        double out_im[4]) {
  if (phel_status s = require(field && params && out_re && out_im, "field/params/out");
      s != PHEL_OK)
    return s;
  return guarded([&] {
    const std::array<cplx, 4> amps =
        multi_time_extend(field->field, to_params(*params), tau, z_ph, z_el);
    for (int c = 0; c < 4; ++c) {
      out_re[c] = amps[c].real();
      out_im[c] = amps[c].imag();
    }
    return PHEL_OK;
  });
}

phel_status phel_run_config_file(const char* config_path, const char* expect_command_or_null,
                                 const char* out_dir_or_null,
                                 const uint64_t* seed_override_or_null,
                                 const int* threads_override_or_null,
                                 char** manifest_json_out) {
  if (phel_status s = require(config_path != nullptr, "config_path"); s != PHEL_OK) return s;
  return guarded([&] {
    const RunOutcome outcome = run_config_file(
        config_path, to_overrides(expect_command_or_null, out_dir_or_null,
                                  seed_override_or_null, threads_override_or_null));
    return run_common(outcome, manifest_json_out);
  });
}

phel_status phel_run_config_text(const char* config_json, const char* expect_command_or_null,
                                 const char* out_dir_or_null,
                                 const uint64_t* seed_override_or_null,
                                 const int* threads_override_or_null,
                                 char** manifest_json_out) {
  if (phel_status s = require(config_json != nullptr, "config_json"); s != PHEL_OK) return s;
  return guarded([&] {
    const RunOutcome outcome = run_config_text(
        config_json, to_overrides(expect_command_or_null, out_dir_or_null,
                                  seed_override_or_null, threads_override_or_null));
    return run_common(outcome, manifest_json_out);
  });
}

void phel_string_free(char* text) { delete[] text; }

} // extern "C"
