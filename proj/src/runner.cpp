#include "phel/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "phel/ensemble.hpp"
#include "phel/errors.hpp"
#include "phel/evolution.hpp"
#include "phel/guidance.hpp"
#include "phel/io.hpp"
#include "phel/liq.hpp"
#include "phel/parallel.hpp"
#include "phel/version.hpp"

namespace phel {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& obj, const std::string& where,
                const std::vector<std::string>& required,
                const std::vector<std::string>& optional) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
  for (const std::string& key : required)
    if (!obj.contains(key))
      throw ValidationError("config: missing key '" + key + "' in " + where);
}

double get_double(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ValidationError("config: " + where + "." + key + " must be a number");
  return v.get<double>();
}

double get_double_or(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  return get_double(obj, where, key);
}

long get_int(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw ValidationError("config: " + where + "." + key + " must be an integer");
  return v.get<long>();
}

long get_int_or(const json& obj, const std::string& where, const char* key, long fallback) {
  if (!obj.contains(key)) return fallback;
  return get_int(obj, where, key);
}

bool get_bool_or(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ValidationError("config: " + where + "." + key + " must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_string()) throw ValidationError("config: " + where + "." + key + " must be a string");
  return v.get<std::string>();
}

GridSpec parse_grid(const json& cfg) {
  const json& g = cfg.at("grid");
  check_keys(g, "grid", {"n", "dz", "origin"}, {});
  return make_grid(static_cast<int>(get_int(g, "grid", "n")), get_double(g, "grid", "dz"),
                   get_double(g, "grid", "origin"));
}

cplx parse_complex(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ValidationError("config: " + where + " must be a [re, im] pair");
  return cplx{v[0].get<double>(), v[1].get<double>()};
}

WavePacketSpec parse_packet(const json& p, const std::string& where) {
  check_keys(p, where, {"center", "width", "wavenumber", "weights"}, {});
  const json& w = p.at("weights");
  if (!w.is_array() || w.size() != 2)
    throw ValidationError("config: " + where + ".weights must be [[re,im],[re,im]]");
  WavePacketSpec spec;
  spec.center = get_double(p, where, "center");
  spec.width = get_double(p, where, "width");
  spec.wavenumber = get_double(p, where, "wavenumber");
  spec.weight_minus = parse_complex(w[0], where + ".weights[0]");
  spec.weight_plus = parse_complex(w[1], where + ".weights[1]");
  validate_packet(spec);
  return spec;
}

struct PacketBlock {
  WavePacketSpec photon;
  WavePacketSpec electron;
  Side side = Side::photon_left;
};

PacketBlock parse_packets(const json& cfg) {
  const json& p = cfg.at("packets");
  check_keys(p, "packets", {"photon", "electron", "side"}, {});
  PacketBlock block;
  block.photon = parse_packet(p.at("photon"), "packets.photon");
  block.electron = parse_packet(p.at("electron"), "packets.electron");
  const std::string side = get_string(p, "packets", "side");
  if (side == "photon_left")
    block.side = Side::photon_left;
  else if (side == "photon_right")
    block.side = Side::photon_right;
  else
    throw ValidationError("config: packets.side must be photon_left or photon_right");
  return block;
}

EvolutionParams parse_params(const json& cfg) {
  const json& p = cfg.at("params");
  check_keys(p, "params", {"mass", "theta", "mode"}, {});
  EvolutionParams params;
  params.mass = get_double(p, "params", "mass");
  params.theta = get_double(p, "params", "theta");
  const std::string mode = get_string(p, "params", "mode");
  if (mode == "interacting")
    params.mode = InteractionMode::interacting;
  else if (mode == "free")
    params.mode = InteractionMode::free;
  else
    throw ValidationError("config: params.mode must be interacting or free");
  validate_params(params);
  return params;
}

struct RunBlock {
  long n_steps = 0;
  long snapshot_stride = 0;
  unsigned threads = 0;
  int peak_smoothing_w = 8;
  double peak_rel_threshold = 0.1;
};

RunBlock parse_run(const json& cfg) {
  const json& r = cfg.at("run");
  check_keys(r, "run", {"n_steps"},
             {"snapshot_stride", "threads", "peak_smoothing_w", "peak_rel_threshold"});
  RunBlock block;
  block.n_steps = get_int(r, "run", "n_steps");
  if (block.n_steps < 0) throw ValidationError("config: run.n_steps must be >= 0");
  block.snapshot_stride = get_int_or(r, "run", "snapshot_stride", 0);
  if (block.snapshot_stride < 0)
    throw ValidationError("config: run.snapshot_stride must be >= 0");
  const long threads = get_int_or(r, "run", "threads", 0);
  if (threads < 0) throw ValidationError("config: run.threads must be >= 0");
  block.threads = static_cast<unsigned>(threads);
  block.peak_smoothing_w = static_cast<int>(get_int_or(r, "run", "peak_smoothing_w", 8));
  block.peak_rel_threshold = get_double_or(r, "run", "peak_rel_threshold", 0.1);
  return block;
}

struct EnsembleBlock {
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  int bins = 16;
  double d_capture = 2.0;
  double tau_capture = 5.0;
  int null_resamples = 1000;
  bool store_trajectories = false;
  std::vector<PairPosition> explicit_pairs;
  bool has_explicit_pairs = false;
};

EnsembleBlock parse_ensemble(const json& cfg) {
  const json& e = cfg.at("ensemble");
  check_keys(e, "ensemble", {"seed"},
             {"n_samples", "bins", "d_capture", "tau_capture", "null_resamples",
              "store_trajectories", "pairs"});
  EnsembleBlock block;
  block.seed = static_cast<std::uint64_t>(get_int(e, "ensemble", "seed"));
  block.n_samples = static_cast<std::size_t>(get_int_or(e, "ensemble", "n_samples", 0));
  block.bins = static_cast<int>(get_int_or(e, "ensemble", "bins", 16));
  block.d_capture = get_double_or(e, "ensemble", "d_capture", 2.0);
  block.tau_capture = get_double_or(e, "ensemble", "tau_capture", 5.0);
  block.null_resamples = static_cast<int>(get_int_or(e, "ensemble", "null_resamples", 1000));
  block.store_trajectories = get_bool_or(e, "ensemble", "store_trajectories", false);
  if (e.contains("pairs")) {
    const json& pairs = e.at("pairs");
    if (!pairs.is_array()) throw ValidationError("config: ensemble.pairs must be an array");
    for (const json& p : pairs) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw ValidationError("config: ensemble.pairs entries must be [z_ph, z_el]");
      block.explicit_pairs.push_back(PairPosition{p[0].get<double>(), p[1].get<double>(), true});
    }
    block.has_explicit_pairs = true;
  }
  return block;
}

struct LiqBlock {
  std::vector<double> hbar_list;
  double hbar = 1.0;
  WkbFamilySpec family;
  double cfl = 0.9;
  double time_resolution = 0.006;
  double t_final = 0.5;
  bool refine = true;
  int mode_hi = 8;
  int mode_lo = 3;
};

LiqBlock parse_liq(const json& cfg) {
  const json& l = cfg.at("liq");
  check_keys(l, "liq", {},
             {"hbar_list", "hbar", "mass", "v0", "v_width", "branch_sign", "rho_center",
              "rho_width", "phase_amplitude", "phase_width", "cfl", "time_resolution",
              "t_final", "refine", "witness_modes"});
  LiqBlock block;
  if (l.contains("hbar_list")) {
    const json& list = l.at("hbar_list");
    if (!list.is_array()) throw ValidationError("config: liq.hbar_list must be an array");
    for (const json& v : list) {
      if (!v.is_number()) throw ValidationError("config: liq.hbar_list entries must be numbers");
      block.hbar_list.push_back(v.get<double>());
    }
  }
  block.hbar = get_double_or(l, "liq", "hbar", 1.0);
  block.family.mass = get_double_or(l, "liq", "mass", 1.0);
  block.family.v0 = get_double_or(l, "liq", "v0", 0.1);
  block.family.v_width = get_double_or(l, "liq", "v_width", 2.0);
  block.family.rho_center = get_double_or(l, "liq", "rho_center", 0.0);
  block.family.rho_width = get_double_or(l, "liq", "rho_width", 1.0);
  block.family.phase_amplitude = get_double_or(l, "liq", "phase_amplitude", 0.2);
  block.family.phase_width = get_double_or(l, "liq", "phase_width", 2.0);
  block.family.branch_sign = static_cast<int>(get_int_or(l, "liq", "branch_sign", -1));
  block.cfl = get_double_or(l, "liq", "cfl", 0.9);
  block.time_resolution = get_double_or(l, "liq", "time_resolution", 0.006);
  block.t_final = get_double_or(l, "liq", "t_final", 0.5);
  block.refine = get_bool_or(l, "liq", "refine", true);
  if (l.contains("witness_modes")) {
    const json& m = l.at("witness_modes");
    if (!m.is_array() || m.size() != 2 || !m[0].is_number_integer() || !m[1].is_number_integer())
      throw ValidationError("config: liq.witness_modes must be [mode_hi, mode_lo]");
    block.mode_hi = m[0].get<int>();
    block.mode_lo = m[1].get<int>();
  }
  return block;
}

struct OutputBlock {
  fs::path directory;
  bool write_pgm = true;
  bool write_csv = true;
};

OutputBlock parse_output(const json& cfg) {
  const json& o = cfg.at("output");
  check_keys(o, "output", {"directory"}, {"formats"});
  OutputBlock block;
  block.directory = get_string(o, "output", "directory");
  if (o.contains("formats")) {
    const json& f = o.at("formats");
    if (!f.is_array()) throw ValidationError("config: output.formats must be an array");
    block.write_pgm = false;
    block.write_csv = false;
    for (const json& v : f) {
      const std::string fmt = v.is_string() ? v.get<std::string>() : "";
      if (fmt == "pgm")
        block.write_pgm = true;
      else if (fmt == "csv")
        block.write_csv = true;
      else
        throw ValidationError("config: output.formats entries must be 'pgm' or 'csv'");
    }
  }
  return block;
}

// ---------------------------------------------------------------------------

class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, json meta) : dir_(std::move(dir)), meta_(std::move(meta)) {}

  const fs::path& dir() const { return dir_; }
  const json& meta() const { return meta_; }

  void prepare() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string());
  }

  void add_file(const std::string& name) { files_.push_back(name); }

  void write_sidecar(const std::string& name) {
    json side;
    side["for_file"] = name;
    side["meta"] = meta_;
    write_json(name + ".meta.json", side);
  }

  void write_json(const std::string& name, const json& doc) {
    const fs::path path = dir_ / name;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
    add_file(name);
  }

  void write_text(const std::string& name, const std::string& text) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
    add_file(name);
    write_sidecar(name);
  }

  void write_density(const std::string& stem, const std::vector<double>& rho, int n,
                     bool pgm, bool csv) {
    if (pgm) {
      write_pgm16(dir_ / (stem + ".pgm"), rho, n);
      add_file(stem + ".pgm");
      write_sidecar(stem + ".pgm");
    }
    if (csv) {
      write_matrix_csv(dir_ / (stem + ".csv"), rho, n);
      add_file(stem + ".csv");
      write_sidecar(stem + ".csv");
    }
  }

  json manifest(const std::string& command, RunStatus status, const std::string& error) {
    json m;
    m["command"] = command;
    m["status"] = static_cast<int>(status);
    m["error"] = error;
    m["meta"] = meta_;
    std::vector<std::string> sorted = files_;
    std::sort(sorted.begin(), sorted.end());
    json files = json::array();
    for (const std::string& name : sorted) {
      const fs::path path = dir_ / name;
      json entry;
      entry["path"] = name;
      entry["bytes"] = static_cast<std::uint64_t>(fs::file_size(path));
      entry["fnv1a64"] = to_hex(fnv1a64_file(path));
      files.push_back(entry);
    }
    m["files"] = files;
    return m;
  }

 private:
  fs::path dir_;
  json meta_;
  std::vector<std::string> files_;
};

std::string step_stem(long s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rho_%06ld", s);
  return buf;
}

json diag_to_json(const StepDiagnostics& d) {
  return json{{"step", d.step_index},
              {"total_norm", d.total_norm},
              {"side_norm_right", d.side_norm_right},
              {"side_norm_left", d.side_norm_left},
              {"edge_norm", d.edge_norm}};
}

std::string diagnostics_csv(const std::vector<StepDiagnostics>& diags) {
  std::string text = "step,total_norm,side_norm_right,side_norm_left,edge_norm\n";
  for (const StepDiagnostics& d : diags) {
    text += std::to_string(d.step_index);
    text += ',';
    text += format_double(d.total_norm);
    text += ',';
    text += format_double(d.side_norm_right);
    text += ',';
    text += format_double(d.side_norm_left);
    text += ',';
    text += format_double(d.edge_norm);
    text += '\n';
  }
  return text;
}

std::string trajectories_csv(const std::vector<PairTrajectory>& trajectories) {
  std::string text = "sample,step,t,z_ph,z_el,alive\n";
  for (const PairTrajectory& traj : trajectories) {
    for (std::size_t k = 0; k < traj.positions.size(); ++k) {
      text += std::to_string(traj.sample_index);
      text += ',';
      text += std::to_string(k);
      text += ',';
      text += format_double(traj.times[k]);
      text += ',';
      text += format_double(traj.positions[k].z_ph);
      text += ',';
      text += format_double(traj.positions[k].z_el);
      text += ',';
      text += traj.positions[k].alive ? '1' : '0';
      text += '\n';
    }
  }
  return text;
}

std::string positions_csv(const std::vector<PairPosition>& positions) {
  std::string text = "sample,z_ph,z_el,alive\n";
  for (std::size_t k = 0; k < positions.size(); ++k) {
    text += std::to_string(k);
    text += ',';
    text += format_double(positions[k].z_ph);
    text += ',';
    text += format_double(positions[k].z_el);
    text += ',';
    text += positions[k].alive ? '1' : '0';
    text += '\n';
  }
  return text;
}

std::string classifications_csv(const std::vector<Classification>& classifications,
                                double d_capture) {
  std::string text =
      "sample,category,has_capture,capture_start,capture_end,max_separation_after_capture,"
      "released\n";
  for (std::size_t k = 0; k < classifications.size(); ++k) {
    const Classification& c = classifications[k];
    const bool released = c.has_capture && c.max_separation_after_capture > 4.0 * d_capture;
    text += std::to_string(k);
    text += ',';
    text += category_name(c.category);
    text += ',';
    text += c.has_capture ? '1' : '0';
    text += ',';
    text += format_double(c.capture_start);
    text += ',';
    text += format_double(c.capture_end);
    text += ',';
    text += format_double(c.max_separation_after_capture);
    text += ',';
    text += released ? '1' : '0';
    text += '\n';
  }
  return text;
}

std::string histogram_csv(const Histogram2D& hist) {
  std::string text;
  for (int bj = 0; bj < hist.bins; ++bj) {
    for (int bi = 0; bi < hist.bins; ++bi) {
      if (bi) text += ',';
      text += std::to_string(hist.counts[static_cast<std::size_t>(bi) * hist.bins + bj]);
    }
    text += '\n';
  }
  return text;
}

// ---------------------------------------------------------------------------

RunStatus command_evolve(const json& cfg, ArtifactWriter& writer, unsigned threads) {
  const GridSpec grid = parse_grid(cfg);
  EvolutionParams params = parse_params(cfg);
  params.threads = threads;
  const PacketBlock packets = parse_packets(cfg);
  const RunBlock run = parse_run(cfg);
  const OutputBlock output = parse_output(cfg);

  SpinorField2B field = init_product_packet(grid, packets.photon, packets.electron, packets.side);
  const SnapshotSink sink = [&](long s, const std::vector<double>& rho) {
    writer.write_density(step_stem(s), rho, grid.n, output.write_pgm, output.write_csv);
  };
  EvolveResult result = evolve(field, params, run.n_steps, run.snapshot_stride, sink,
                               /*keep_snapshots=*/false);

  writer.write_text("diagnostics.csv", diagnostics_csv(result.diagnostics));

  const std::vector<double> rho_final = density(field);
  const int peaks = count_peaks(rho_final, grid.n, run.peak_smoothing_w, run.peak_rel_threshold);

  json report;
  report["meta"] = writer.meta();
  report["status"] = result.status == EvolveStatus::completed ? "completed" : "edge_abort";
  report["requested_steps"] = run.n_steps;
  report["steps_completed"] = result.steps_completed;
  report["peaks"] = json{{"count", peaks},
                         {"smoothing_w", run.peak_smoothing_w},
                         {"rel_threshold", run.peak_rel_threshold}};
  if (!result.diagnostics.empty()) report["final_diagnostics"] = diag_to_json(result.diagnostics.back());
  const FieldNorms norms = field_norms(field, threads);
  report["final_total_norm"] = norms.total;
  report["final_side_norm_right"] = norms.sides.photon_right;
  report["final_side_norm_left"] = norms.sides.photon_left;
  writer.write_json("report.json", report);

  return result.status == EvolveStatus::completed ? RunStatus::ok : RunStatus::physics_abort;
}

RunStatus command_pair_trajectories(const json& cfg, ArtifactWriter& writer, unsigned threads,
                                    std::optional<std::uint64_t> seed_override) {
  const GridSpec grid = parse_grid(cfg);
  EvolutionParams params = parse_params(cfg);
  params.threads = threads;
  const PacketBlock packets = parse_packets(cfg);
  const RunBlock run = parse_run(cfg);
  EnsembleBlock ensemble = parse_ensemble(cfg);
  if (seed_override) ensemble.seed = *seed_override;

  SpinorField2B field = init_product_packet(grid, packets.photon, packets.electron, packets.side);
  std::vector<PairPosition> pairs;
  if (ensemble.has_explicit_pairs) {
    pairs = ensemble.explicit_pairs;
  } else {
    if (ensemble.n_samples == 0)
      throw ValidationError("pair-trajectories: needs ensemble.pairs or ensemble.n_samples > 0");
    pairs = sample_density(density(field), grid, ensemble.n_samples,
                           SeededSampler{ensemble.seed}, 0);
  }

  IntegrateResult result = integrate_pairs(pairs, std::move(field), params, run.n_steps);

  std::vector<Classification> classifications;
  classifications.reserve(result.trajectories.size());
  long counts[4] = {0, 0, 0, 0};
  for (const PairTrajectory& traj : result.trajectories) {
    const Classification c = classify_trajectory(traj, ensemble.d_capture, ensemble.tau_capture);
    ++counts[static_cast<int>(c.category)];
    classifications.push_back(c);
  }

  writer.write_text("trajectories.csv", trajectories_csv(result.trajectories));
  writer.write_text("classifications.csv", classifications_csv(classifications, ensemble.d_capture));

  json report;
  report["meta"] = writer.meta();
  report["status"] = result.field_status == EvolveStatus::completed ? "completed" : "edge_abort";
  report["n_pairs"] = result.trajectories.size();
  report["steps_completed"] = result.steps_completed;
  report["seed"] = ensemble.seed;
  report["explicit_pairs"] = ensemble.has_explicit_pairs;
  report["crossing_guard_events"] = result.counters.crossing_guard_events;
  report["degenerate_events"] = result.counters.degenerate_events;
  report["frozen_pairs"] = result.counters.frozen_pairs;
  report["classification_counts"] =
      json{{"both_left", counts[0]}, {"both_right", counts[1]}, {"diverge", counts[2]},
           {"bounce", counts[3]}};
  writer.write_json("report.json", report);

  return result.field_status == EvolveStatus::completed ? RunStatus::ok
                                                        : RunStatus::physics_abort;
}

RunStatus command_ensemble(const json& cfg, ArtifactWriter& writer, unsigned threads,
                           std::optional<std::uint64_t> seed_override) {
  EnsembleConfig config;
  config.grid = parse_grid(cfg);
  config.params = parse_params(cfg);
  config.params.threads = threads;
  const PacketBlock packets = parse_packets(cfg);
  config.photon = packets.photon;
  config.electron = packets.electron;
  config.side = packets.side;
  const RunBlock run = parse_run(cfg);
  config.n_steps = run.n_steps;
  EnsembleBlock ensemble = parse_ensemble(cfg);
  if (seed_override) ensemble.seed = *seed_override;
  if (ensemble.n_samples == 0)
    throw ValidationError("ensemble: ensemble.n_samples must be positive");
  config.n_samples = ensemble.n_samples;
  config.seed = ensemble.seed;
  config.bins = ensemble.bins;
  config.d_capture = ensemble.d_capture;
  config.tau_capture = ensemble.tau_capture;
  config.null_resamples = ensemble.null_resamples;
  config.store_trajectories = ensemble.store_trajectories;

  const EnsembleReport report = run_equivariance(config);

  writer.write_text("initial_positions.csv", positions_csv(report.initial_positions));
  writer.write_text("final_positions.csv", positions_csv(report.final_positions));
  writer.write_text("histogram.csv", histogram_csv(report.histogram));
  writer.write_text("classifications.csv",
                    classifications_csv(report.classifications, config.d_capture));
  if (config.store_trajectories)
    writer.write_text("trajectories.csv", trajectories_csv(report.trajectories));

  json doc;
  doc["meta"] = writer.meta();
  doc["status"] = report.field_status == EvolveStatus::completed ? "completed" : "edge_abort";
  doc["n_samples"] = report.n_samples;
  doc["seed"] = report.seed;
  doc["sampler_algorithm"] = report.sampler_algorithm;
  doc["steps_completed"] = report.steps_completed;
  doc["tv_distance"] = report.tv_distance;
  doc["tv_null_p99"] = report.tv_null_p99;
  doc["tv_null_mean"] = report.tv_null_mean;
  doc["bins"] = report.histogram.bins;
  doc["classification_counts"] =
      json{{"both_left", report.n_both_left}, {"both_right", report.n_both_right},
           {"diverge", report.n_diverge}, {"bounce", report.n_bounce}};
  doc["crossing_guard_events"] = report.crossing_guard_events;
  doc["degenerate_events"] = report.degenerate_events;
  doc["frozen_pairs"] = report.frozen_pairs;
  doc["equivariance_pass"] = report.tv_distance <= report.tv_null_p99;
  writer.write_json("report.json", doc);

  return report.field_status == EvolveStatus::completed ? RunStatus::ok
                                                        : RunStatus::physics_abort;
}

RunStatus command_multitime_slice(const json& cfg, ArtifactWriter& writer, unsigned threads) {
  const GridSpec grid = parse_grid(cfg);
  EvolutionParams params = parse_params(cfg);
  params.threads = threads;
  const PacketBlock packets = parse_packets(cfg);
  const RunBlock run = parse_run(cfg);

  const json& m = cfg.at("multitime");
  check_keys(m, "multitime", {"tau_list", "points"}, {});
  std::vector<double> tau_list;
  for (const json& v : m.at("tau_list")) {
    if (!v.is_number()) throw ValidationError("config: multitime.tau_list entries must be numbers");
    tau_list.push_back(v.get<double>());
  }
  std::vector<std::pair<double, double>> points;
  for (const json& v : m.at("points")) {
    if (!v.is_array() || v.size() != 2)
      throw ValidationError("config: multitime.points entries must be [z_ph, z_el]");
    points.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  if (tau_list.empty() || points.empty())
    throw ValidationError("config: multitime needs at least one tau and one point");

  SpinorField2B field = init_product_packet(grid, packets.photon, packets.electron, packets.side);
  const EvolveResult result = evolve(field, params, run.n_steps, 0, {}, false);
  if (result.status != EvolveStatus::completed) {
    json report;
    report["meta"] = writer.meta();
    report["status"] = "edge_abort";
    report["steps_completed"] = result.steps_completed;
    writer.write_json("report.json", report);
    return RunStatus::physics_abort;
  }

  std::string csv =
      "tau,z_ph,z_el,status,c_mm_re,c_mm_im,c_mp_re,c_mp_im,c_pm_re,c_pm_im,c_pp_re,c_pp_im\n";
  long n_ok = 0, n_rejected = 0;
  for (const double tau : tau_list) {
    for (const auto& [z_ph, z_el] : points) {
      csv += format_double(tau);
      csv += ',';
      csv += format_double(z_ph);
      csv += ',';
      csv += format_double(z_el);
      try {
        const std::array<cplx, 4> amps = multi_time_extend(field, params, tau, z_ph, z_el);
        csv += ",ok";
        for (const cplx& a : amps) {
          csv += ',';
          csv += format_double(a.real());
          csv += ',';
          csv += format_double(a.imag());
        }
        ++n_ok;
      } catch (const ValidationError&) {
        csv += ",causality,0,0,0,0,0,0,0,0";
        ++n_rejected;
      }
      csv += '\n';
    }
  }
  writer.write_text("slice.csv", csv);

  json report;
  report["meta"] = writer.meta();
  report["status"] = "completed";
  report["steps_completed"] = result.steps_completed;
  report["points_evaluated"] = n_ok;
  report["points_rejected"] = n_rejected;
  writer.write_json("report.json", report);
  return RunStatus::ok;
}

RunStatus command_liq_scaling(const json& cfg, ArtifactWriter& writer, unsigned threads) {
  const json& g = cfg.at("grid");
  check_keys(g, "grid", {"n", "dz", "origin"}, {});
  const Grid1D grid = make_grid_1d(static_cast<int>(get_int(g, "grid", "n")),
                                   get_double(g, "grid", "dz"), get_double(g, "grid", "origin"));
  const LiqBlock liq = parse_liq(cfg);
  if (liq.hbar_list.empty())
    throw ValidationError("liq-scaling: liq.hbar_list is required");

  ScalingConfig config;
  config.grid = grid;
  config.family = liq.family;
  config.hbar_list = liq.hbar_list;
  config.cfl = liq.cfl;
  config.time_resolution = liq.time_resolution;
  config.t_final = liq.t_final;
  config.threads = threads;

  const ScalingReport report = scaling_study(config);

  json doc;
  doc["meta"] = writer.meta();
  doc["slope"] = report.slope;
  doc["pre_caustic_violated"] = report.pre_caustic_violated;
  doc["hbar_list"] = report.hbar_list;
  doc["sup_residuals"] = report.sup_residuals;
  doc["caustic_flags"] = report.caustic_flags;

  std::string csv = "hbar,sup_hj_residual,continuity_coarse,continuity_fine,gap_coarse,gap_fine\n";
  if (liq.refine) {
    Grid1D fine = grid;
    fine.n_q *= 2;
    fine.dq *= 0.5;
    json probes = json::array();
    for (std::size_t k = 0; k < report.hbar_list.size(); ++k) {
      const double hbar = report.hbar_list[k];
      const double dt =
          wkb_time_step(grid, liq.family, hbar, liq.cfl, liq.time_resolution);
      const ResidualProbe coarse = residual_probe(grid, liq.family, hbar, dt, liq.t_final);
      const ResidualProbe refined =
          residual_probe(fine, liq.family, hbar, 0.5 * dt, liq.t_final);
      json p;
      p["hbar"] = hbar;
      p["continuity_coarse"] = coarse.continuity_sup;
      p["continuity_fine"] = refined.continuity_sup;
      p["continuity_ratio"] = coarse.continuity_sup / refined.continuity_sup;
      p["madelung_gap_coarse"] = coarse.madelung_gap_sup;
      p["madelung_gap_fine"] = refined.madelung_gap_sup;
      p["madelung_gap_ratio"] = coarse.madelung_gap_sup / refined.madelung_gap_sup;
      probes.push_back(p);
      csv += format_double(hbar);
      csv += ',';
      csv += format_double(report.sup_residuals[k]);
      csv += ',';
      csv += format_double(coarse.continuity_sup);
      csv += ',';
      csv += format_double(refined.continuity_sup);
      csv += ',';
      csv += format_double(coarse.madelung_gap_sup);
      csv += ',';
      csv += format_double(refined.madelung_gap_sup);
      csv += '\n';
    }
    doc["refinement_probes"] = probes;
  } else {
    for (std::size_t k = 0; k < report.hbar_list.size(); ++k) {
      csv += format_double(report.hbar_list[k]);
      csv += ',';
      csv += format_double(report.sup_residuals[k]);
      csv += ",,,,\n";
    }
  }
  writer.write_text("residuals.csv", csv);
  writer.write_json("scaling.json", doc);

  return report.pre_caustic_violated ? RunStatus::physics_abort : RunStatus::ok;
}

RunStatus command_liq_witness(const json& cfg, ArtifactWriter& writer) {
  const json& g = cfg.at("grid");
  check_keys(g, "grid", {"n", "dz", "origin"}, {});
  const Grid1D grid = make_grid_1d(static_cast<int>(get_int(g, "grid", "n")),
                                   get_double(g, "grid", "dz"), get_double(g, "grid", "origin"));
  const LiqBlock liq = parse_liq(cfg);

  const WitnessReport report =
      negative_density_witness(grid, liq.family.mass, liq.hbar, liq.mode_hi, liq.mode_lo);

  json doc;
  doc["meta"] = writer.meta();
  doc["min_value"] = report.min_value;
  doc["min_index"] = report.min_index;
  doc["min_coordinate"] = report.min_coordinate;
  doc["oracle_min_value"] = report.oracle_min_value;
  doc["oracle_nearest_location"] = report.oracle_nearest_location;
  doc["matched_within_one_cell"] = report.matched_within_one_cell;
  doc["strictly_negative"] = report.strictly_negative;
  doc["mode_hi"] = report.mode_hi;
  doc["mode_lo"] = report.mode_lo;
  doc["hbar"] = liq.hbar;
  doc["mass"] = liq.family.mass;
  writer.write_json("witness.json", doc);

  if (!report.strictly_negative)
    throw PhysicsError("liq-witness: search failed to find a strictly negative density");
  return RunStatus::ok;
}

const std::set<std::string> kCommands = {"evolve",          "pair-trajectories", "ensemble",
                                         "multitime-slice", "liq-scaling",       "liq-witness"};

void check_top_level(const json& cfg, const std::string& command) {
  std::vector<std::string> required = {"command", "output"};
  std::vector<std::string> optional;
  if (command == "evolve") {
    required.insert(required.end(), {"grid", "params", "packets", "run"});
  } else if (command == "pair-trajectories" || command == "ensemble") {
    required.insert(required.end(), {"grid", "params", "packets", "run", "ensemble"});
  } else if (command == "multitime-slice") {
    required.insert(required.end(), {"grid", "params", "packets", "run", "multitime"});
  } else if (command == "liq-scaling" || command == "liq-witness") {
    required.insert(required.end(), {"grid", "liq"});
  }
  check_keys(cfg, "top level", required, optional);
}

} // namespace

RunOutcome run_config_text(const std::string& config_json, const RunOverrides& overrides) {
  RunOutcome outcome;
  json cfg;
  try {
    cfg = json::parse(config_json);
  } catch (const json::parse_error& err) {
    outcome.status = RunStatus::validation_error;
    outcome.error = std::string("config: JSON parse error: ") + err.what();
    return outcome;
  }

  std::string command;
  std::unique_ptr<ArtifactWriter> writer;
  try {
    if (!cfg.is_object() || !cfg.contains("command") || !cfg.at("command").is_string())
      throw ValidationError("config: top-level 'command' string is required");
    command = cfg.at("command").get<std::string>();
    if (!kCommands.count(command))
      throw ValidationError("config: unknown command '" + command + "'");
    if (overrides.expect_command && *overrides.expect_command != command)
      throw ValidationError("config: command '" + command + "' does not match the CLI subcommand '" +
                            *overrides.expect_command + "'");
    check_top_level(cfg, command);

    const OutputBlock output = parse_output(cfg);
    fs::path out_dir = output.directory;
    if (overrides.out_dir) out_dir = *overrides.out_dir;

    unsigned threads = 0;
    if (cfg.contains("run")) threads = parse_run(cfg).threads;
    if (overrides.threads) threads = *overrides.threads;
    threads = resolve_threads(threads);

    json meta;
    meta["config"] = cfg;
    meta["version"] = std::string(kProjectName) + " " + kVersion;
    meta["sampler_algorithm"] = SeededSampler::kAlgorithm;
    json ov = json::object();
    if (overrides.seed) ov["seed"] = *overrides.seed;
    if (overrides.out_dir) ov["out_dir"] = *overrides.out_dir;
    if (overrides.threads) ov["threads"] = *overrides.threads;
    meta["overrides"] = ov;

    writer = std::make_unique<ArtifactWriter>(out_dir, meta);
    writer->prepare();

    RunStatus status = RunStatus::ok;
    if (command == "evolve") {
      status = command_evolve(cfg, *writer, threads);
    } else if (command == "pair-trajectories") {
      status = command_pair_trajectories(cfg, *writer, threads, overrides.seed);
    } else if (command == "ensemble") {
      status = command_ensemble(cfg, *writer, threads, overrides.seed);
    } else if (command == "multitime-slice") {
      status = command_multitime_slice(cfg, *writer, threads);
    } else if (command == "liq-scaling") {
      status = command_liq_scaling(cfg, *writer, threads);
    } else if (command == "liq-witness") {
      status = command_liq_witness(cfg, *writer);
    }
    outcome.status = status;
  } catch (const ValidationError& err) {
    outcome.status = RunStatus::validation_error;
    outcome.error = err.what();
  } catch (const PhysicsError& err) {
    outcome.status = RunStatus::physics_abort;
    outcome.error = err.what();
  } catch (const IoError& err) {
    outcome.status = RunStatus::io_error;
    outcome.error = err.what();
  } catch (const std::exception& err) {
    outcome.status = RunStatus::io_error;
    outcome.error = std::string("unexpected error: ") + err.what();
  }

  if (writer) {
    try {
      const json manifest = writer->manifest(command, outcome.status, outcome.error);
      outcome.manifest_json = manifest.dump(2) + "\n";
      std::ofstream out(writer->dir() / "manifest.json");
      out << outcome.manifest_json;
    } catch (const std::exception&) {
      if (outcome.status == RunStatus::ok) outcome.status = RunStatus::io_error;
    }
  }
  return outcome;
}

RunOutcome run_config_file(const std::string& config_path, const RunOverrides& overrides) {
  std::ifstream in(config_path);
  if (!in) {
    RunOutcome outcome;
    outcome.status = RunStatus::io_error;
    outcome.error = "cannot open config file " + config_path;
    return outcome;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return run_config_text(buffer.str(), overrides);
}

} // namespace phel
