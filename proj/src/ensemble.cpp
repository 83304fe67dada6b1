#include "phel/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phel/errors.hpp"
#include "phel/observables.hpp"
#include "phel/parallel.hpp"

namespace phel {

namespace {

inline std::uint64_t splitmix_step(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

} // namespace

std::uint64_t SeededSampler::Stream::next_u64() { return splitmix_step(state); }

double SeededSampler::Stream::next_u01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

SeededSampler::Stream SeededSampler::stream(std::uint64_t stream_tag, std::uint64_t index) const {
  std::uint64_t s = seed;
  s = splitmix_step(s) ^ (stream_tag * 0xD1B54A32D192ED03ull);
  s = splitmix_step(s) ^ (index * 0x8CB92BA72F3D8DD7ull);
  splitmix_step(s);
  return Stream{s};
}

namespace {

struct CellCdf {
  std::vector<double> cumulative; // cumulative[k] = sum of rho over cells <= k
  double total = 0.0;
};

CellCdf build_cdf(const std::vector<double>& rho) {
  CellCdf cdf;
  cdf.cumulative.resize(rho.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const double w = rho[k];
    if (w < 0.0 || !std::isfinite(w))
      throw ValidationError("sample_density: density must be finite and nonnegative");
    acc += w;
    cdf.cumulative[k] = acc;
  }
  cdf.total = acc;
  if (!(cdf.total > 0.0)) throw ValidationError("sample_density: density is identically zero");
  return cdf;
}

std::size_t draw_cell(const CellCdf& cdf, double u01) {
  const double x = u01 * cdf.total;
  const auto it = std::upper_bound(cdf.cumulative.begin(), cdf.cumulative.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - cdf.cumulative.begin());
  return std::min(k, cdf.cumulative.size() - 1);
}

} // namespace

std::vector<PairPosition> sample_density(const std::vector<double>& rho, const GridSpec& grid,
                                         std::size_t n, const SeededSampler& sampler,
                                         std::uint64_t stream_tag) {
  if (rho.size() != static_cast<std::size_t>(grid.n) * grid.n)
    throw ValidationError("sample_density: density size does not match the grid");
  const CellCdf cdf = build_cdf(rho);
  const double zmin = grid.z_min();
  const double zmax = grid.z_max();

  std::vector<PairPosition> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    SeededSampler::Stream st = sampler.stream(stream_tag, k);
    const std::size_t cell = draw_cell(cdf, st.next_u01());
    const int i = static_cast<int>(cell / grid.n);
    const int j = static_cast<int>(cell % grid.n);
    PairPosition p;
    p.z_ph = std::clamp(grid.z(i) + (st.next_u01() - 0.5) * grid.dz, zmin, zmax);
    p.z_el = std::clamp(grid.z(j) + (st.next_u01() - 0.5) * grid.dz, zmin, zmax);
    out[k] = p;
  }
  return out;
}

Histogram2D coarse_histogram(const std::vector<PairPosition>& points, const GridSpec& grid,
                             int bins) {
  if (bins < 1 || grid.n % bins != 0)
    throw ValidationError("coarse_histogram: bin count must divide the grid size");
  Histogram2D hist;
  hist.bins = bins;
  hist.counts.assign(static_cast<std::size_t>(bins) * bins, 0);
  const double lower = grid.origin - 0.5 * grid.dz;
  const double box = grid.length() / bins;
  for (const PairPosition& p : points) {
    int bi = static_cast<int>(std::floor((p.z_ph - lower) / box));
    int bj = static_cast<int>(std::floor((p.z_el - lower) / box));
    bi = std::clamp(bi, 0, bins - 1);
    bj = std::clamp(bj, 0, bins - 1);
    ++hist.counts[static_cast<std::size_t>(bi) * bins + bj];
    ++hist.total;
  }
  return hist;
}

namespace {

std::vector<double> box_masses(const std::vector<double>& rho, const GridSpec& grid, int bins) {
  const int per = grid.n / bins;
  std::vector<double> mass(static_cast<std::size_t>(bins) * bins, 0.0);
  for (int i = 0; i < grid.n; ++i) {
    const int bi = i / per;
    for (int j = 0; j < grid.n; ++j)
      mass[static_cast<std::size_t>(bi) * bins + j / per] += rho[static_cast<std::size_t>(i) * grid.n + j];
  }
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("tv_distance: model density is identically zero");
  for (double& m : mass) m /= total;
  return mass;
}

double tv_against_model(const Histogram2D& hist, const std::vector<double>& model) {
  double tv = 0.0;
  const double inv = hist.total > 0 ? 1.0 / static_cast<double>(hist.total) : 0.0;
  for (std::size_t b = 0; b < model.size(); ++b)
    tv += std::abs(static_cast<double>(hist.counts[b]) * inv - model[b]);
  return 0.5 * tv;
}

} // namespace

double tv_distance(const Histogram2D& hist, const std::vector<double>& rho,
                   const GridSpec& grid) {
  if (hist.bins < 1 || grid.n % hist.bins != 0)
    throw ValidationError("tv_distance: bin count must divide the grid size");
  return tv_against_model(hist, box_masses(rho, grid, hist.bins));
}

int count_peaks(const std::vector<double>& rho, int n, int smoothing_width,
                double rel_threshold) {
  if (smoothing_width < 1) throw ValidationError("count_peaks: smoothing width must be >= 1");
  if (rho.size() != static_cast<std::size_t>(n) * n)
    throw ValidationError("count_peaks: density size does not match the grid");

  // separable box filter; the window is [k - (w-1)/2, k + w/2] per axis,
  // truncated at the grid and averaged over the cells actually present
  const int h_lo = (smoothing_width - 1) / 2;
  const int h_hi = smoothing_width / 2;
  auto smooth_axis = [&](const std::vector<double>& src, bool along_j) {
    std::vector<double> dst(src.size(), 0.0);
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    for (int outer = 0; outer < n; ++outer) {
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = along_j ? static_cast<std::size_t>(outer) * n + k
                                        : static_cast<std::size_t>(k) * n + outer;
        prefix[k + 1] = prefix[k] + src[idx];
      }
      for (int k = 0; k < n; ++k) {
        const int lo = std::max(0, k - h_lo);
        const int hi = std::min(n - 1, k + h_hi);
        const std::size_t idx = along_j ? static_cast<std::size_t>(outer) * n + k
                                        : static_cast<std::size_t>(k) * n + outer;
        dst[idx] = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1);
      }
    }
    return dst;
  };
  const std::vector<double> smoothed = smooth_axis(smooth_axis(rho, true), false);

  const double peak = *std::max_element(smoothed.begin(), smoothed.end());
  if (!(peak > 0.0)) return 0;
  const double threshold = rel_threshold * peak;

  // Strict local maxima over the 8-neighborhood. Exactly tied cells (which
  // even smoothing widths produce on symmetric data) are grouped into one
  // plateau and counted once when the whole plateau sits strictly above its
  // surroundings.
  std::vector<std::uint8_t> visited(smoothed.size(), 0);
  std::vector<std::size_t> stack;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::size_t start = static_cast<std::size_t>(i) * n + j;
      if (visited[start]) continue;
      const double v = smoothed[start];
      if (v <= threshold) continue;

      visited[start] = 1;
      stack.assign(1, start);
      bool is_max = true;
      for (std::size_t top = 0; top < stack.size(); ++top) {
        const std::size_t k = stack[top];
        const int ki = static_cast<int>(k) / n;
        const int kj = static_cast<int>(k) % n;
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            if (di == 0 && dj == 0) continue;
            const int ii = ki + di, jj = kj + dj;
            if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
            const std::size_t kk = static_cast<std::size_t>(ii) * n + jj;
            const double w = smoothed[kk];
            if (w > v) {
              is_max = false;
            } else if (w == v && !visited[kk]) {
              visited[kk] = 1;
              stack.push_back(kk);
            }
          }
        }
      }
      if (is_max) ++count;
    }
  }
  return count;
}

const char* category_name(TrajectoryCategory c) {
  switch (c) {
    case TrajectoryCategory::both_left: return "both_left";
    case TrajectoryCategory::both_right: return "both_right";
    case TrajectoryCategory::diverge: return "diverge";
    case TrajectoryCategory::bounce: return "bounce";
  }
  return "unknown";
}

TrajectoryStats::TrajectoryStats(double d_capture, double tau_capture,
                                 std::size_t expected_samples)
    : d_capture_(d_capture), tau_capture_(tau_capture), expected_(expected_samples) {}

void TrajectoryStats::add(double t, double z_ph, double z_el) {
  const double sep = std::abs(z_ph - z_el);
  if (count_ == 0) {
    sep0_ = sep;
    min_sep_ = sep;
    window_z_ph_ = z_ph;
    window_z_el_ = z_el;
  }
  min_sep_ = std::min(min_sep_, sep);

  const std::size_t window = std::max<std::size_t>(1, expected_ / 10);
  if (expected_ > 0 && count_ == (expected_ > window ? expected_ - 1 - window : 0)) {
    window_z_ph_ = z_ph;
    window_z_el_ = z_el;
  }

  if (sep <= d_capture_) {
    if (!in_dwell_) {
      in_dwell_ = true;
      dwell_start_ = t;
    }
  } else if (in_dwell_) {
    in_dwell_ = false;
    const double len = last_t_ - dwell_start_;
    if (len > best_dwell_len_) {
      best_dwell_len_ = len;
      best_dwell_start_ = dwell_start_;
      best_dwell_end_ = last_t_;
      max_sep_after_best_ = sep;
    }
  }
  if (best_dwell_len_ >= 0.0 && !in_dwell_) max_sep_after_best_ = std::max(max_sep_after_best_, sep);

  last_t_ = t;
  last_z_ph_ = z_ph;
  last_z_el_ = z_el;
  ++count_;
}

Classification TrajectoryStats::finish() {
  if (in_dwell_) {
    in_dwell_ = false;
    const double len = last_t_ - dwell_start_;
    if (len > best_dwell_len_) {
      best_dwell_len_ = len;
      best_dwell_start_ = dwell_start_;
      best_dwell_end_ = last_t_;
      max_sep_after_best_ = std::abs(last_z_ph_ - last_z_el_);
    }
  }
  Classification out;
  const double dph = last_z_ph_ - window_z_ph_;
  const double del = last_z_el_ - window_z_el_;
  if (dph < 0.0 && del < 0.0) {
    out.category = TrajectoryCategory::both_left;
  } else if (dph > 0.0 && del > 0.0) {
    out.category = TrajectoryCategory::both_right;
  } else {
    const bool approached = min_sep_ <= 0.95 * sep0_;
    out.category = approached ? TrajectoryCategory::bounce : TrajectoryCategory::diverge;
  }
  if (best_dwell_len_ >= tau_capture_ && best_dwell_len_ >= 0.0) {
    out.has_capture = true;
    out.capture_start = best_dwell_start_;
    out.capture_end = best_dwell_end_;
    out.max_separation_after_capture = max_sep_after_best_;
  }
  return out;
}

Classification classify_trajectory(const PairTrajectory& traj, double d_capture,
                                   double tau_capture) {
  if (traj.positions.size() < 2 || traj.times.size() != traj.positions.size())
    throw ValidationError("classify_trajectory: trajectory needs at least two samples");
  TrajectoryStats stats(d_capture, tau_capture, traj.positions.size());
  for (std::size_t k = 0; k < traj.positions.size(); ++k)
    stats.add(traj.times[k], traj.positions[k].z_ph, traj.positions[k].z_el);
  return stats.finish();
}

NullCalibration tv_null_distribution(const std::vector<double>& rho, const GridSpec& grid,
                                     std::size_t n, int bins, int resamples,
                                     const SeededSampler& sampler, unsigned threads) {
  if (resamples < 1) throw ValidationError("tv_null_distribution: needs at least one resample");
  const std::vector<double> model = box_masses(rho, grid, bins);
  const CellCdf cdf = build_cdf(rho);
  const double lower = grid.origin - 0.5 * grid.dz;
  const double box = grid.length() / bins;
  const double zmin = grid.z_min();
  const double zmax = grid.z_max();

  std::vector<double> tvs(static_cast<std::size_t>(resamples), 0.0);
  parallel_for(static_cast<std::size_t>(resamples), threads,
               [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint64_t> counts(model.size());
    for (std::size_t r = begin; r < end; ++r) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t k = 0; k < n; ++k) {
        SeededSampler::Stream st = sampler.stream(0x100 + r, k);
        const std::size_t cell = draw_cell(cdf, st.next_u01());
        const int i = static_cast<int>(cell / grid.n);
        const int j = static_cast<int>(cell % grid.n);
        const double zp = std::clamp(grid.z(i) + (st.next_u01() - 0.5) * grid.dz, zmin, zmax);
        const double ze = std::clamp(grid.z(j) + (st.next_u01() - 0.5) * grid.dz, zmin, zmax);
        int bi = std::clamp(static_cast<int>(std::floor((zp - lower) / box)), 0, bins - 1);
        int bj = std::clamp(static_cast<int>(std::floor((ze - lower) / box)), 0, bins - 1);
        ++counts[static_cast<std::size_t>(bi) * bins + bj];
      }
      double tv = 0.0;
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t b = 0; b < model.size(); ++b)
        tv += std::abs(static_cast<double>(counts[b]) * inv - model[b]);
      tvs[r] = 0.5 * tv;
    }
  });

  std::vector<double> sorted = tvs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t idx =
      static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(resamples))) - 1;
  NullCalibration out;
  out.p99 = sorted[std::min(idx, sorted.size() - 1)];
  out.mean = pairwise_sum(sorted) / static_cast<double>(resamples);
  return out;
}

EnsembleReport run_equivariance(const EnsembleConfig& config) {
  EnsembleReport report;
  report.n_samples = config.n_samples;
  report.seed = config.seed;
  report.sampler_algorithm = SeededSampler::kAlgorithm;

  SpinorField2B field =
      init_product_packet(config.grid, config.photon, config.electron, config.side);
  const SeededSampler sampler{config.seed};
  std::vector<PairPosition> pairs =
      sample_density(density(field), config.grid, config.n_samples, sampler, 0);
  report.initial_positions = pairs;

  std::vector<TrajectoryStats> stats;
  stats.reserve(pairs.size());
  const std::size_t expected = static_cast<std::size_t>(config.n_steps) + 1;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    stats.emplace_back(config.d_capture, config.tau_capture, expected);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    stats[k].add(0.0, pairs[k].z_ph, pairs[k].z_el);

  const bool keep_paths = config.store_trajectories;
  if (keep_paths) {
    report.trajectories.resize(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      report.trajectories[k].sample_index = k;
      report.trajectories[k].times.push_back(0.0);
      report.trajectories[k].positions.push_back(pairs[k]);
    }
  }

  SpinorField2B scratch(field.grid);
  SpinorField2B pre(field.grid);
  const double dt = config.grid.dz;
  GuidanceCounters counters;
  for (long s = 1; s <= config.n_steps; ++s) {
    pre = field;
    const StepDiagnostics diag = step(field, scratch, config.params, s);
    advance_pairs(pairs, pre, field, config.params, counters, config.params.threads);
    report.steps_completed = s;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      stats[k].add(s * dt, pairs[k].z_ph, pairs[k].z_el);
      if (keep_paths) {
        report.trajectories[k].times.push_back(s * dt);
        report.trajectories[k].positions.push_back(pairs[k]);
      }
    }
    if (diag.edge_norm > kEdgeNormAbortThreshold) {
      report.field_status = EvolveStatus::edge_abort;
      break;
    }
  }

  report.crossing_guard_events = counters.crossing_guard_events;
  report.degenerate_events = counters.degenerate_events;
  report.frozen_pairs = counters.frozen_pairs;
  report.final_positions = pairs;

  report.classifications.reserve(stats.size());
  for (auto& st : stats) {
    const Classification c = st.finish();
    report.classifications.push_back(c);
    switch (c.category) {
      case TrajectoryCategory::both_left: ++report.n_both_left; break;
      case TrajectoryCategory::both_right: ++report.n_both_right; break;
      case TrajectoryCategory::diverge: ++report.n_diverge; break;
      case TrajectoryCategory::bounce: ++report.n_bounce; break;
    }
  }

  const std::vector<double> rho_final = density(field);
  report.histogram = coarse_histogram(pairs, config.grid, config.bins);
  report.tv_distance = tv_distance(report.histogram, rho_final, config.grid);
  const NullCalibration null = tv_null_distribution(
      rho_final, config.grid, config.n_samples, config.bins, config.null_resamples, sampler,
      config.params.threads);
  report.tv_null_p99 = null.p99;
  report.tv_null_mean = null.mean;
  return report;
}

} // namespace phel
