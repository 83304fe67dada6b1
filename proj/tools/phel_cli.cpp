// Command-line front end. Talks to the simulation core exclusively through
// the shared-library C API.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "phel.h"

namespace {

struct CommonOptions {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = 0;
  bool has_threads = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "JSON run configuration")->required();
  cmd->add_option("--out", opts.out_dir, "override output.directory");
  cmd->add_option("--seed", opts.seed, "override ensemble.seed")->each([&](const std::string&) {
    opts.has_seed = true;
  });
  cmd->add_option("--threads", opts.threads, "override run.threads (0 = auto)")
      ->each([&](const std::string&) { opts.has_threads = true; });
  cmd->add_flag("--quiet", opts.quiet, "suppress the manifest on stdout");
}

int run(const std::string& command, const CommonOptions& opts) {
  char* manifest = nullptr;
  const phel_status status = phel_run_config_file(
      opts.config.c_str(), command.c_str(),
      opts.out_dir.empty() ? nullptr : opts.out_dir.c_str(),
      opts.has_seed ? &opts.seed : nullptr, opts.has_threads ? &opts.threads : nullptr,
      &manifest);

  if (manifest) {
    if (!opts.quiet && manifest[0] != '\0') std::fputs(manifest, stdout);
    phel_string_free(manifest);
  }
  if (status != PHEL_OK)
    std::fprintf(stderr, "phel %s: error (%d): %s\n", command.c_str(), static_cast<int>(status),
                 phel_last_error());
  // statuses map directly onto the documented exit codes (0/2/3/4)
  return static_cast<int>(status);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("phel ") + phel_version() +
               " - two-body photon/electron lattice laboratory"};
  app.require_subcommand(1);

  const char* commands[] = {"evolve",          "pair-trajectories", "ensemble",
                            "multitime-slice", "liq-scaling",       "liq-witness"};
  const char* descriptions[] = {
      "evolve the two-body field and write density snapshots",
      "integrate trajectory pairs against one field evolution",
      "Born-sampled ensemble with equivariance statistics",
      "evaluate the field at photon-time-extended configurations",
      "hbar-scaling study of the phase-equation residual",
      "negative-density witness for the scalar wave equation",
  };

  CommonOptions opts[6];
  CLI::App* subs[6];
  for (int k = 0; k < 6; ++k) {
    subs[k] = app.add_subcommand(commands[k], descriptions[k]);
    add_common(subs[k], opts[k]);
  }

  CLI11_PARSE(app, argc, argv);

  for (int k = 0; k < 6; ++k)
    if (subs[k]->parsed()) return run(commands[k], opts[k]);
  return 1;
}
