#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phel/guidance.hpp"

namespace phel {

// Counter-based deterministic streams: every (stream, index) pair owns an
// independent splitmix64 state, so sampling is reproducible bitwise for a
// given seed regardless of evaluation order or parallelism.
struct SeededSampler {
  std::uint64_t seed = 0;
  static constexpr const char* kAlgorithm = "splitmix64-invcdf-jitter-v1";

  struct Stream {
    std::uint64_t state;
    std::uint64_t next_u64();
    double next_u01(); // [0, 1)
  };
  Stream stream(std::uint64_t stream_tag, std::uint64_t index) const;
};

// Inverse-CDF categorical draw over flattened cells proportional to rho,
// plus uniform jitter within the chosen cell. Rejects all-zero densities.
std::vector<PairPosition> sample_density(const std::vector<double>& rho,
                                         const GridSpec& grid, std::size_t n,
                                         const SeededSampler& sampler,
                                         std::uint64_t stream_tag = 0);

struct Histogram2D {
  int bins = 0;
  std::vector<std::uint64_t> counts; // row-major, photon box * bins + electron box
  std::uint64_t total = 0;
};

// B x B counts over the grid's coverage [origin - dz/2, origin + (n-1/2) dz);
// B must divide n.
Histogram2D coarse_histogram(const std::vector<PairPosition>& points,
                             const GridSpec& grid, int bins);

// Total variation distance (1/2) sum_boxes |empirical fraction - model mass|,
// with the model mass box-aggregated from rho dz^2 and normalized.
double tv_distance(const Histogram2D& hist, const std::vector<double>& rho,
                   const GridSpec& grid);

// Box-filter smooth of width w cells per axis, then count strict local maxima
// (8-neighborhood) exceeding rel_threshold times the smoothed global max.
int count_peaks(const std::vector<double>& rho, int n, int smoothing_width,
                double rel_threshold);

enum class TrajectoryCategory { both_left, both_right, diverge, bounce };

const char* category_name(TrajectoryCategory c);

struct Classification {
  TrajectoryCategory category = TrajectoryCategory::diverge;
  bool has_capture = false;        // dwell of at least tau_capture
  double capture_start = 0.0;
  double capture_end = 0.0;
  double max_separation_after_capture = 0.0;
};

// Streaming per-trajectory accumulator so ensemble runs never have to retain
// full paths. Category: signs of the displacement over the final 10% of
// samples when they agree; otherwise bounce if the separation ever dropped
// below 95% of its initial value, else diverge. Capture: longest contiguous
// dwell with separation <= d_capture.
class TrajectoryStats {
 public:
  TrajectoryStats() = default;
  TrajectoryStats(double d_capture, double tau_capture, std::size_t expected_samples);
  void add(double t, double z_ph, double z_el);
  Classification finish();

 private:
  double d_capture_ = 0.0;
  double tau_capture_ = 0.0;
  std::size_t expected_ = 0;
  std::size_t count_ = 0;
  double sep0_ = 0.0;
  double min_sep_ = 0.0;
  double window_z_ph_ = 0.0, window_z_el_ = 0.0;
  double last_t_ = 0.0, last_z_ph_ = 0.0, last_z_el_ = 0.0;
  bool in_dwell_ = false;
  double dwell_start_ = 0.0;
  double best_dwell_start_ = 0.0, best_dwell_end_ = 0.0, best_dwell_len_ = -1.0;
  double max_sep_after_best_ = 0.0;
};

Classification classify_trajectory(const PairTrajectory& traj, double d_capture,
                                   double tau_capture);

struct EnsembleConfig {
  GridSpec grid;
  WavePacketSpec photon;
  WavePacketSpec electron;
  Side side = Side::photon_left;
  EvolutionParams params;
  long n_steps = 0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  int bins = 16;
  double d_capture = 2.0;
  double tau_capture = 5.0;
  int null_resamples = 1000;
  bool store_trajectories = false;
};

struct EnsembleReport {
  std::size_t n_samples = 0;
  double tv_distance = 0.0;
  double tv_null_p99 = 0.0;
  double tv_null_mean = 0.0;
  Histogram2D histogram;
  long n_both_left = 0;
  long n_both_right = 0;
  long n_diverge = 0;
  long n_bounce = 0;
  long crossing_guard_events = 0;
  long degenerate_events = 0;
  long frozen_pairs = 0;
  long steps_completed = 0;
  EvolveStatus field_status = EvolveStatus::completed;
  std::uint64_t seed = 0;
  std::string sampler_algorithm;
  std::vector<PairPosition> initial_positions;
  std::vector<PairPosition> final_positions;
  std::vector<Classification> classifications;
  std::vector<PairTrajectory> trajectories; // only when store_trajectories
};

// Samples n initial pairs from rho(0), integrates all trajectories against a
// single field evolution, histograms the final positions and compares them
// with rho(T) through the TV distance, calibrated by direct resampling from
// rho(T) itself (the null threshold). Also classifies every trajectory.
EnsembleReport run_equivariance(const EnsembleConfig& config);

// 99th percentile of TV distances of `resamples` fresh draws of n points
// from rho (sorted order statistic at index ceil(0.99 R) - 1).
struct NullCalibration {
  double p99 = 0.0;
  double mean = 0.0;
};
NullCalibration tv_null_distribution(const std::vector<double>& rho, const GridSpec& grid,
                                     std::size_t n, int bins, int resamples,
                                     const SeededSampler& sampler, unsigned threads = 1);

} // namespace phel
