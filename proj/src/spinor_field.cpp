#include "phel/spinor_field.hpp"

#include <cmath>
#include <string>

#include "phel/errors.hpp"
#include "phel/observables.hpp"

namespace phel {

void SpinorField2B::zero_diagonal() {
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < grid.n; ++i) comp[c][flat(i, i)] = cplx{0.0, 0.0};
}

double SpinorField2B::max_diagonal_abs() const {
  double m = 0.0;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < grid.n; ++i) m = std::max(m, std::abs(comp[c][flat(i, i)]));
  return m;
}

bool SpinorField2B::all_finite() const {
  for (int c = 0; c < 4; ++c)
    for (const cplx& v : comp[c])
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

void validate_packet(const WavePacketSpec& spec) {
  if (!(spec.width > 0.0) || !std::isfinite(spec.width))
    throw ValidationError("wave packet: width must be positive");
  if (!std::isfinite(spec.center) || !std::isfinite(spec.wavenumber))
    throw ValidationError("wave packet: center and wavenumber must be finite");
  const double norm2 = std::norm(spec.weight_minus) + std::norm(spec.weight_plus);
  if (std::abs(norm2 - 1.0) > 1e-12)
    throw ValidationError("wave packet: chirality weights must be normalized to 1 within 1e-12");
}

namespace {

// Gaussian envelope; |g|^2 has standard deviation `width`.
double envelope(double z, const WavePacketSpec& s) {
  const double u = (z - s.center);
  return std::exp(-u * u / (4.0 * s.width * s.width));
}

} // namespace

SpinorField2B init_product_packet(const GridSpec& grid, const WavePacketSpec& photon,
                                  const WavePacketSpec& electron, Side side) {
  validate_packet(photon);
  validate_packet(electron);

  const double separation = std::abs(photon.center - electron.center);
  if (separation < 5.0 * (photon.width + electron.width))
    throw ValidationError("init_product_packet: packet centers must be separated by at least "
                          "5 (width_ph + width_el) so the diagonal truncation is negligible");
  if (side == Side::photon_left && !(photon.center < electron.center))
    throw ValidationError("init_product_packet: photon_left requires center_ph < center_el");
  if (side == Side::photon_right && !(photon.center > electron.center))
    throw ValidationError("init_product_packet: photon_right requires center_ph > center_el");

  for (const WavePacketSpec* s : {&photon, &electron}) {
    const double edge = std::max(envelope(grid.z_min(), *s), envelope(grid.z_max(), *s));
    if (edge > 1e-8)
      throw ValidationError("init_product_packet: packet tail exceeds 1e-8 of peak at the "
                            "outer grid edge; enlarge the grid or move the packet inward");
  }

  const int n = grid.n;
  std::vector<cplx> g_ph(n), g_el(n);
  for (int i = 0; i < n; ++i) {
    const double z = grid.z(i);
    g_ph[i] = envelope(z, photon) * std::polar(1.0, photon.wavenumber * z);
    g_el[i] = envelope(z, electron) * std::polar(1.0, electron.wavenumber * z);
  }

  const cplx w_ph[2] = {photon.weight_minus, photon.weight_plus};
  const cplx w_el[2] = {electron.weight_minus, electron.weight_plus};

  SpinorField2B field(grid);
  const bool keep_upper = (side == Side::photon_left); // support on i < j
  for (int ab = 0; ab < 2; ++ab) {
    for (int bb = 0; bb < 2; ++bb) {
      const int c = (ab << 1) | bb;
      const cplx w = w_ph[ab] * w_el[bb];
      if (w == cplx{0.0, 0.0}) continue;
      for (int i = 0; i < n; ++i) {
        const int j_begin = keep_upper ? i + 1 : 0;
        const int j_end = keep_upper ? n : i;
        const cplx row = w * g_ph[i];
        for (int j = j_begin; j < j_end; ++j) field.at(c, i, j) = row * g_el[j];
      }
    }
  }

  const double norm = total_norm(field);
  if (!(norm > 0.0))
    throw ValidationError("init_product_packet: state has zero norm after truncation");
  const double scale = 1.0 / std::sqrt(norm);
  for (auto& plane : field.comp)
    for (cplx& v : plane) v *= scale;
  return field;
}

} // namespace phel
