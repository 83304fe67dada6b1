#include "phel/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace phel {

namespace {

double pairwise_sum_impl(const double* x, std::size_t n) {
  if (n <= 64) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(x, half) + pairwise_sum_impl(x + half, n - half);
}

} // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return std::min(hw, 16u);
}

void parallel_for(std::size_t count, unsigned nthreads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  nthreads = std::max(1u, nthreads);
  if (nthreads == 1 || count < 2 * nthreads) {
    fn(0, count);
    return;
  }
  const std::size_t chunk = (count + nthreads - 1) / nthreads;
  std::vector<std::thread> workers;
  workers.reserve(nthreads);
  for (unsigned t = 0; t < nthreads; ++t) {
    const std::size_t begin = std::min(count, static_cast<std::size_t>(t) * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& w : workers) w.join();
}

} // namespace phel
