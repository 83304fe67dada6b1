#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "phel/grid.hpp"

namespace phel::detail {

// Four-point bilinear stencil between cell centers, with an optional
// diagonal-side filter: side = +1 keeps cells with i > j, -1 keeps i < j,
// 0 keeps everything. Weights of excluded cells are dropped; callers
// renormalize by wsum. If every admissible weight vanishes (a corner case at
// exact cell centers next to the diagonal), the nearest admissible stencil
// cell is kept with weight one.
struct BilinearStencil {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
  std::array<int, 4> cell_i{};
  std::array<int, 4> cell_j{};
  int count = 0;
  double wsum = 0.0;
};

inline BilinearStencil make_stencil(const GridSpec& grid, double x, double y, int side) {
  const int n = grid.n;
  auto locate = [&](double v) {
    double u = (v - grid.origin) / grid.dz;
    int i0 = static_cast<int>(std::floor(u));
    if (i0 < 0) i0 = 0;
    if (i0 > n - 2) i0 = n - 2;
    double f = u - i0;
    if (f < 0.0) f = 0.0;
    if (f > 1.0) f = 1.0;
    return std::pair<int, double>{i0, f};
  };
  const auto [i0, fx] = locate(x);
  const auto [j0, fy] = locate(y);

  const int is[4] = {i0, i0 + 1, i0, i0 + 1};
  const int js[4] = {j0, j0, j0 + 1, j0 + 1};
  const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};

  BilinearStencil st;
  for (int k = 0; k < 4; ++k) {
    const bool admissible = side == 0 || (is[k] - js[k]) * side > 0;
    if (!admissible) continue;
    st.index[st.count] = static_cast<std::size_t>(is[k]) * n + js[k];
    st.weight[st.count] = ws[k];
    st.cell_i[st.count] = is[k];
    st.cell_j[st.count] = js[k];
    st.wsum += ws[k];
    ++st.count;
  }
  if (st.count > 0 && st.wsum <= 0.0) {
    // all admissible weights vanished; keep the first admissible cell alone
    st.weight[0] = 1.0;
    st.wsum = 1.0;
    st.count = 1;
  }
  return st;
}

} // namespace phel::detail
