#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace phel {

// Exit statuses shared by the run orchestrator, the C API and the CLI.
enum class RunStatus : int {
  ok = 0,
  validation_error = 2,
  physics_abort = 3,
  io_error = 4,
};

struct RunOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  // When set, the config's command field must match (CLI subcommand).
  std::optional<std::string> expect_command;
};

struct RunOutcome {
  RunStatus status = RunStatus::ok;
  std::string manifest_json; // full manifest document (also written to disk)
  std::string error;         // empty on success
};

// Parses, validates and executes a JSON run configuration. Never throws:
// failures are reported through the outcome (and recorded in the manifest
// when the output directory was usable).
RunOutcome run_config_text(const std::string& config_json, const RunOverrides& overrides);
RunOutcome run_config_file(const std::string& config_path, const RunOverrides& overrides);

} // namespace phel
