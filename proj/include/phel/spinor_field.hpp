#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "phel/grid.hpp"

namespace phel {

using cplx = std::complex<double>;

// Chirality values: -1 = left-mover, +1 = right-mover. The ordered pair
// (photon chirality a, electron chirality b) indexes the four components.
inline constexpr int kChiralities[2] = {-1, +1};

inline int chirality_bit(int a) { return a > 0 ? 1 : 0; }
inline int comp_index(int a, int b) { return (chirality_bit(a) << 1) | chirality_bit(b); }
inline int photon_chirality_of(int c) { return (c & 2) ? +1 : -1; }
inline int electron_chirality_of(int c) { return (c & 1) ? +1 : -1; }

// Two-body spinor field on the square grid. Each component plane is stored
// row-major as comp[c][i*n + j], i = photon cell, j = electron cell.
struct SpinorField2B {
  GridSpec grid;
  std::array<std::vector<cplx>, 4> comp;

  SpinorField2B() = default;
  explicit SpinorField2B(const GridSpec& g) : grid(g) {
    for (auto& plane : comp) plane.assign(static_cast<std::size_t>(g.n) * g.n, cplx{0.0, 0.0});
  }

  std::size_t cells() const { return static_cast<std::size_t>(grid.n) * grid.n; }
  std::size_t flat(int i, int j) const { return static_cast<std::size_t>(i) * grid.n + j; }

  cplx& at(int c, int i, int j) { return comp[c][flat(i, j)]; }
  const cplx& at(int c, int i, int j) const { return comp[c][flat(i, j)]; }

  void zero_diagonal();
  double max_diagonal_abs() const;
  bool all_finite() const;
};

enum class Side { photon_left, photon_right };

// Gaussian times plane wave: g(z) = exp(-(z-center)^2 / (4 width^2)) e^{ikz},
// so width is the position-density sigma. Chirality weights must satisfy
// |w_minus|^2 + |w_plus|^2 = 1 to 1e-12.
struct WavePacketSpec {
  double center = 0.0;
  double width = 1.0;
  double wavenumber = 0.0;
  cplx weight_minus{0.0, 0.0};
  cplx weight_plus{1.0, 0.0};
};

void validate_packet(const WavePacketSpec& spec);

// Product initial state supported strictly on one side of the diagonal:
// comp[a][b](i,j) = w_a g_ph(z_i) w_b g_el(z_j), wrong-side and diagonal
// cells zeroed, then normalized to unit total norm. Requires
// |center_ph - center_el| >= 5 (width_ph + width_el) and packet tails below
// 1e-8 of peak at the outer grid edges.
SpinorField2B init_product_packet(const GridSpec& grid, const WavePacketSpec& photon,
                                  const WavePacketSpec& electron, Side side);

} // namespace phel
