/*
 * phel - C API for the two-body photon/electron lattice laboratory.
 *
 * All functions return a phel_status; results come back through out
 * parameters. Objects are opaque handles owned by the caller and released
 * with the matching destroy function. Error details for the calling thread
 * are available via phel_last_error().
 */
#ifndef PHEL_H
#define PHEL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum phel_status {
  PHEL_OK = 0,
  PHEL_ERR_ARGUMENT = 1,   /* null handle / bad pointer */
  PHEL_ERR_VALIDATION = 2, /* rejected parameters or config */
  PHEL_ERR_PHYSICS = 3,    /* run left its meaningful regime (wall contact) */
  PHEL_ERR_IO = 4,
  PHEL_ERR_INTERNAL = 5
} phel_status;

typedef struct phel_grid phel_grid;
typedef struct phel_field phel_field;

typedef struct phel_packet {
  double center;
  double width;      /* Gaussian sigma of the position density */
  double wavenumber; /* carrier k */
  double w_minus_re, w_minus_im;
  double w_plus_re, w_plus_im;
} phel_packet;

typedef struct phel_evolution_params {
  double mass;
  double theta;    /* boundary phase in [0, 2pi) */
  int interacting; /* 0 = free, nonzero = interacting */
  int threads;     /* 0 = auto */
} phel_evolution_params;

typedef struct phel_step_diagnostics {
  long step_index;
  double total_norm;
  double side_norm_right; /* photon right of electron (i > j) */
  double side_norm_left;  /* photon left of electron (i < j) */
  double edge_norm;
} phel_step_diagnostics;

const char* phel_version(void);
/* Message of the last failure on this thread; empty string if none. */
const char* phel_last_error(void);

phel_status phel_grid_create(int n, double dz, double origin, phel_grid** out);
void phel_grid_destroy(phel_grid* grid);
phel_status phel_grid_info(const phel_grid* grid, int* n, double* dz, double* origin);

/* photon_side_left != 0 places the photon packet on the z_ph < z_el side. */
phel_status phel_field_create_product_packet(const phel_grid* grid, const phel_packet* photon,
                                             const phel_packet* electron, int photon_side_left,
                                             phel_field** out);
phel_status phel_field_clone(const phel_field* field, phel_field** out);
void phel_field_destroy(phel_field* field);

phel_status phel_field_total_norm(const phel_field* field, double* out);
phel_status phel_field_side_norms(const phel_field* field, double* photon_right,
                                  double* photon_left);
/* buffer receives n*n densities, row-major with the photon index as row. */
phel_status phel_field_density(const phel_field* field, double* buffer, size_t buffer_len);

phel_status phel_field_step(phel_field* field, const phel_evolution_params* params,
                            phel_step_diagnostics* diag_or_null);
/* Runs up to n_steps; PHEL_ERR_PHYSICS means the edge-norm guard stopped the
 * run early and the field holds the state at the stop. */
phel_status phel_field_evolve(phel_field* field, const phel_evolution_params* params,
                              long n_steps, long* steps_done,
                              phel_step_diagnostics* final_diag_or_null);

phel_status phel_field_velocity_at(const phel_field* field,
                                   const phel_evolution_params* params, double z_ph,
                                   double z_el, double* v_ph, double* v_el, int* degenerate);

/* Components ordered (a,b) = (-1,-1), (-1,+1), (+1,-1), (+1,+1). */
phel_status phel_field_multitime_extend(const phel_field* field,
                                        const phel_evolution_params* params, double tau,
                                        double z_ph, double z_el, double out_re[4],
                                        double out_im[4]);

/* Executes a JSON run configuration (same schema as the CLI). When
 * expect_command_or_null is given, the config's command field must match it.
 * Optional overrides may be NULL. *manifest_json_out receives a heap string
 * (the run manifest, possibly partial on failures) to be released with
 * phel_string_free. */
phel_status phel_run_config_file(const char* config_path, const char* expect_command_or_null,
                                 const char* out_dir_or_null,
                                 const uint64_t* seed_override_or_null,
                                 const int* threads_override_or_null,
                                 char** manifest_json_out);
phel_status phel_run_config_text(const char* config_json, const char* expect_command_or_null,
                                 const char* out_dir_or_null,
                                 const uint64_t* seed_override_or_null,
                                 const int* threads_override_or_null,
                                 char** manifest_json_out);
void phel_string_free(char* text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PHEL_H */
