#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "phel/errors.hpp"
#include "phel/evolution.hpp"
#include "phel/observables.hpp"

using namespace phel;

namespace {

SpinorField2B random_field(const GridSpec& grid, unsigned seed, bool zero_diagonal) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  SpinorField2B field(grid);
  for (auto& plane : field.comp)
    for (cplx& v : plane) v = cplx{dist(rng), dist(rng)};
  if (zero_diagonal) field.zero_diagonal();
  return field;
}

double max_component_diff(const SpinorField2B& a, const SpinorField2B& b) {
  double m = 0.0;
  for (int c = 0; c < 4; ++c)
    for (std::size_t k = 0; k < a.cells(); ++k) m = std::max(m, std::abs(a.comp[c][k] - b.comp[c][k]));
  return m;
}

EvolutionParams params_of(double mass, double theta, InteractionMode mode) {
  EvolutionParams p;
  p.mass = mass;
  p.theta = theta;
  p.mode = mode;
  return p;
}

} // namespace

TEST_CASE("mass rotation") {
  const GridSpec grid = make_grid(16, 0.5, 0.0);

  SUBCASE("m = 0 is the identity") {
    SpinorField2B field = random_field(grid, 1, false);
    const SpinorField2B before = field;
    mass_rotation(field, 0.0, 0.5);
    CHECK(max_component_diff(field, before) == 0.0);
  }

  SUBCASE("quarter turn moves a plus amplitude to -i times the minus slot") {
    SpinorField2B field(grid);
    field.at(comp_index(+1, +1), 4, 9) = cplx{1.0, 0.0};
    mass_rotation(field, 1.0, M_PI / 2.0); // alpha = pi/2
    CHECK(std::abs(field.at(comp_index(+1, -1), 4, 9) - cplx{0.0, -1.0}) < 1e-15);
    CHECK(std::abs(field.at(comp_index(+1, +1), 4, 9)) < 1e-15);
  }

  SUBCASE("norm preserved on a random field") {
    SpinorField2B field = random_field(grid, 2, false);
    const double before = total_norm(field);
    mass_rotation(field, 1.3, 0.37);
    CHECK(std::abs(total_norm(field) - before) < 1e-14 * before);
  }

  SUBCASE("photon components are not mass-coupled") {
    SpinorField2B field(grid);
    field.at(comp_index(-1, +1), 2, 5) = cplx{1.0, 0.0};
    mass_rotation(field, 2.0, 0.25);
    // amplitude stays within the same photon chirality
    CHECK(std::abs(field.at(comp_index(+1, +1), 2, 5)) == 0.0);
    CHECK(std::abs(field.at(comp_index(+1, -1), 2, 5)) == 0.0);
  }
}

TEST_CASE("transport step") {
  const GridSpec grid = make_grid(16, 0.5, 0.0);

  SUBCASE("plain interior shift, both modes") {
    for (const auto mode : {InteractionMode::free, InteractionMode::interacting}) {
      SpinorField2B field(grid);
      // i - j = 3: left-moving photon, right-moving electron
      field.at(comp_index(-1, +1), 9, 6) = cplx{1.0, 0.0};
      SpinorField2B out(grid);
      transport_step(field, out, params_of(1.0, 0.0, mode));
      CHECK(out.at(comp_index(-1, +1), 8, 7) == cplx{1.0, 0.0});
      double total = 0.0;
      for (int c = 0; c < 4; ++c)
        for (const cplx& v : out.comp[c]) total += std::norm(v);
      CHECK(total == doctest::Approx(1.0));
    }
  }

  SUBCASE("reflection at |i-j| = 1 with theta = pi") {
    SpinorField2B field(grid);
    field.at(comp_index(-1, +1), 7, 6) = cplx{1.0, 0.0};
    SpinorField2B out(grid);
    transport_step(field, out, params_of(1.0, M_PI, InteractionMode::interacting));
    CHECK(std::abs(out.at(comp_index(+1, -1), 7, 6) - cplx{-1.0, 0.0}) < 1e-15);
  }

  SUBCASE("reflection at |i-j| = 2 keeps even-parity amplitude off the diagonal") {
    SpinorField2B field(grid);
    field.at(comp_index(-1, +1), 8, 6) = cplx{1.0, 0.0};
    SpinorField2B out(grid);
    transport_step(field, out, params_of(1.0, 0.0, InteractionMode::interacting));
    CHECK(out.at(comp_index(+1, -1), 8, 6) == cplx{1.0, 0.0});
    CHECK(out.max_diagonal_abs() == 0.0);
    double total = 0.0;
    for (int c = 0; c < 4; ++c)
      for (const cplx& v : out.comp[c]) total += std::norm(v);
    CHECK(total == doctest::Approx(1.0));
  }

  SUBCASE("free mode lets amplitude cross the diagonal") {
    SpinorField2B field(grid);
    field.at(comp_index(-1, +1), 7, 6) = cplx{1.0, 0.0};
    SpinorField2B out(grid);
    transport_step(field, out, params_of(1.0, 0.0, InteractionMode::free));
    CHECK(out.at(comp_index(-1, +1), 6, 7) == cplx{1.0, 0.0});
  }

  SUBCASE("hard wall flips chirality in place") {
    SpinorField2B field(grid);
    field.at(comp_index(-1, -1), 0, 4) = cplx{1.0, 0.0}; // photon at the left wall
    SpinorField2B out(grid);
    transport_step(field, out, params_of(0.0, 0.0, InteractionMode::free));
    CHECK(out.at(comp_index(+1, -1), 0, 3) == cplx{1.0, 0.0});
  }

  SUBCASE("side norms conserved componentwise in interacting mode") {
    SpinorField2B field = random_field(grid, 3, true);
    const SideNorms before = side_norms(field);
    SpinorField2B out(grid);
    transport_step(field, out, params_of(0.0, 1.1, InteractionMode::interacting));
    const SideNorms after = side_norms(out);
    CHECK(after.photon_right == doctest::Approx(before.photon_right).epsilon(1e-14));
    CHECK(after.photon_left == doctest::Approx(before.photon_left).epsilon(1e-14));
    CHECK(after.diagonal == 0.0);
  }

  SUBCASE("rejects nonzero diagonal amplitude in interacting mode") {
    SpinorField2B field(grid);
    field.at(comp_index(+1, +1), 5, 5) = cplx{1e-9, 0.0};
    SpinorField2B out(grid);
    CHECK_THROWS_AS(transport_step(field, out, params_of(0.0, 0.0, InteractionMode::interacting)),
                    PhysicsError);
  }
}

TEST_CASE("strang step") {
  const GridSpec grid = make_grid(24, 0.5, 0.0);

  SUBCASE("m = 0 free mode is pure transport") {
    SpinorField2B field = random_field(grid, 4, false);
    SpinorField2B transported(grid);
    transport_step(field, transported, params_of(0.0, 0.0, InteractionMode::free));
    SpinorField2B scratch(grid);
    step(field, scratch, params_of(0.0, 0.0, InteractionMode::free));
    CHECK(max_component_diff(field, transported) == 0.0);
  }

  SUBCASE("norm drift per step below 1e-14, both modes") {
    for (const auto mode : {InteractionMode::free, InteractionMode::interacting}) {
      SpinorField2B field = random_field(grid, 5, true);
      const double before = total_norm(field);
      SpinorField2B scratch(grid);
      const StepDiagnostics diag = step(field, scratch, params_of(1.0, 0.4, mode));
      CHECK(std::abs(diag.total_norm - before) < 1e-14 * before);
    }
  }

  SUBCASE("interacting step keeps both side norms separately") {
    SpinorField2B field = random_field(grid, 6, true);
    const SideNorms before = side_norms(field);
    SpinorField2B scratch(grid);
    const StepDiagnostics diag = step(field, scratch, params_of(1.0, 0.0, InteractionMode::interacting));
    CHECK(diag.side_norm_right == doctest::Approx(before.photon_right).epsilon(1e-13));
    CHECK(diag.side_norm_left == doctest::Approx(before.photon_left).epsilon(1e-13));
  }

  SUBCASE("step is bitwise independent of the thread count") {
    SpinorField2B base = random_field(grid, 11, true);
    SpinorField2B reference = base;
    SpinorField2B scratch(grid);
    step(reference, scratch, params_of(1.0, 0.9, InteractionMode::interacting));
    for (unsigned threads : {2u, 5u}) {
      SpinorField2B field = base;
      EvolutionParams p = params_of(1.0, 0.9, InteractionMode::interacting);
      p.threads = threads;
      step(field, scratch, p);
      CHECK(max_component_diff(field, reference) == 0.0);
    }
  }
}

TEST_CASE("plane wave eigenphase matches the one-step symbol (brute-force diagonalization)") {
  const GridSpec grid = make_grid(64, 0.5, 0.0);
  const double mass = 1.0;
  const double dt = grid.dz;
  const double k_ph = 2.0 * M_PI * 3.0 / grid.length();
  const double k_el = 2.0 * M_PI * 5.0 / grid.length();

  // spinor structure: photon chirality a = +1, electron mixed
  const cplx w_el_minus{0.6, 0.0};
  const cplx w_el_plus{0.0, 0.8};

  SpinorField2B field(grid);
  for (int i = 0; i < grid.n; ++i)
    for (int j = 0; j < grid.n; ++j) {
      const cplx wave = std::polar(1.0, k_ph * grid.z(i) + k_el * grid.z(j));
      field.at(comp_index(+1, -1), i, j) = w_el_minus * wave;
      field.at(comp_index(+1, +1), i, j) = w_el_plus * wave;
    }

  SpinorField2B scratch(grid);
  SpinorField2B evolved = field;
  step(evolved, scratch, params_of(mass, 0.0, InteractionMode::free));

  // independent route: diagonalize the 2x2 electron symbol with Eigen
  const double alpha = 0.5 * mass * dt;
  Eigen::Matrix2cd rot;
  rot << std::cos(alpha), cplx{0.0, -std::sin(alpha)}, cplx{0.0, -std::sin(alpha)},
      std::cos(alpha);
  Eigen::Matrix2cd shift = Eigen::Matrix2cd::Zero();
  shift(0, 0) = std::polar(1.0, +k_el * dt); // b = -1 reads from j+1
  shift(1, 1) = std::polar(1.0, -k_el * dt);
  const Eigen::Matrix2cd symbol = std::polar(1.0, -k_ph * dt) * (rot * shift * rot).eval();

  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> eig(symbol);
  REQUIRE(eig.info() == Eigen::Success);
  const Eigen::Vector2cd w0{w_el_minus, w_el_plus};
  const Eigen::Vector2cd coeffs = eig.eigenvectors().colPivHouseholderQr().solve(w0);

  double max_err = 0.0;
  for (int i = 2; i < grid.n - 2; ++i) {
    for (int j = 2; j < grid.n - 2; ++j) {
      const cplx wave = std::polar(1.0, k_ph * grid.z(i) + k_el * grid.z(j));
      const Eigen::Vector2cd predicted =
          eig.eigenvectors() *
          (eig.eigenvalues().array() * coeffs.array()).matrix();
      max_err = std::max(max_err,
                         std::abs(evolved.at(comp_index(+1, -1), i, j) - predicted(0) * wave));
      max_err = std::max(max_err,
                         std::abs(evolved.at(comp_index(+1, +1), i, j) - predicted(1) * wave));
    }
  }
  CHECK(max_err < 1e-12);
}

TEST_CASE("evolve") {
  SUBCASE("n_steps = 0 returns the input unchanged") {
    const GridSpec grid = make_grid(64, 0.5, -16.0);
    WavePacketSpec ph{-8.0, 0.8, 1.0, cplx{0, 0}, cplx{1, 0}};
    WavePacketSpec el{8.0, 0.7, 0.0, cplx{1, 0}, cplx{0, 0}};
    SpinorField2B field = init_product_packet(grid, ph, el, Side::photon_left);
    const SpinorField2B before = field;
    const EvolveResult result = evolve(field, params_of(1.0, 0.0, InteractionMode::interacting), 0, 1);
    CHECK(result.status == EvolveStatus::completed);
    CHECK(result.snapshots.size() == 1);
    CHECK(max_component_diff(field, before) == 0.0);
  }

  SUBCASE("massless free evolution equals the analytic shift after 100 steps") {
    // packets stay >= 12 sigma away from every wall through all 100 steps
    const GridSpec grid = make_grid(512, 0.25, -64.0);
    WavePacketSpec ph{-30.0, 2.0, 1.0, cplx{0, 0}, cplx{1, 0}};
    WavePacketSpec el{20.0, 1.5, 0.0,
                      cplx{1.0 / std::sqrt(2.0), 0}, cplx{1.0 / std::sqrt(2.0), 0}};
    SpinorField2B field = init_product_packet(grid, ph, el, Side::photon_left);
    const SpinorField2B initial = field;

    const long steps = 100;
    const EvolveResult result =
        evolve(field, params_of(0.0, 0.0, InteractionMode::free), steps, 0);
    CHECK(result.status == EvolveStatus::completed);

    // every component moves exactly `steps` cells along its characteristics
    double max_err = 0.0;
    for (int c = 0; c < 4; ++c) {
      const int a = photon_chirality_of(c);
      const int b = electron_chirality_of(c);
      for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) {
          const int si = i - a * steps;
          const int sj = j - b * steps;
          const cplx expected = (si >= 0 && si < grid.n && sj >= 0 && sj < grid.n)
                                    ? initial.at(c, si, sj)
                                    : cplx{0.0, 0.0};
          max_err = std::max(max_err, std::abs(field.at(c, i, j) - expected));
        }
    }
    CHECK(max_err <= 1e-14);
  }

  SUBCASE("edge guard stops a run that reaches the wall") {
    const GridSpec grid = make_grid(64, 0.5, -16.0);
    WavePacketSpec ph{-6.0, 0.9, 2.0, cplx{0, 0}, cplx{1, 0}};
    WavePacketSpec el{6.0, 0.9, 0.0, cplx{1, 0}, cplx{0, 0}};
    SpinorField2B field = init_product_packet(grid, ph, el, Side::photon_left);
    const EvolveResult result =
        evolve(field, params_of(1.0, 0.0, InteractionMode::interacting), 4000, 0);
    CHECK(result.status == EvolveStatus::edge_abort);
    CHECK(result.steps_completed < 4000);
    CHECK(result.diagnostics.back().edge_norm > kEdgeNormAbortThreshold);
    // the run stays unitary all the way to the stop
    CHECK(result.diagnostics.back().total_norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("m-continuity: tiny mass converges to pure transport") {
  const GridSpec grid = make_grid(32, 0.5, 0.0);
  const double mass = 1e-6;
  const long steps = 10;

  SpinorField2B with_mass = random_field(grid, 8, true);
  SpinorField2B massless = with_mass;
  SpinorField2B scratch(grid);
  for (long s = 0; s < steps; ++s) {
    step(with_mass, scratch, params_of(mass, 0.0, InteractionMode::interacting));
    step(massless, scratch, params_of(0.0, 0.0, InteractionMode::interacting));
  }
  // per-step deviation is bounded by the rotation angle m dt
  CHECK(max_component_diff(with_mass, massless) <= 5.0 * steps * mass * grid.dz);
}

TEST_CASE("theta gauge property") {
  const GridSpec grid = make_grid(96, 0.5, -24.0);
  const long steps = 40;

  auto run = [&](const WavePacketSpec& ph, const WavePacketSpec& el, double theta) {
    SpinorField2B field = init_product_packet(grid, ph, el, Side::photon_left);
    SpinorField2B scratch(grid);
    StepDiagnostics last{};
    for (long s = 1; s <= steps; ++s)
      last = step(field, scratch, params_of(1.0, theta, InteractionMode::interacting), s);
    return std::pair<SpinorField2B, StepDiagnostics>{std::move(field), last};
  };
  auto max_density_diff = [](const SpinorField2B& a, const SpinorField2B& b) {
    const std::vector<double> ra = density(a);
    const std::vector<double> rb = density(b);
    double m = 0.0;
    for (std::size_t k = 0; k < ra.size(); ++k) m = std::max(m, std::abs(ra[k] - rb[k]));
    return m;
  };

  const WavePacketSpec el{8.0, 1.0, 0.0,
                          cplx{1.0 / std::sqrt(2.0), 0}, cplx{1.0 / std::sqrt(2.0), 0}};

  SUBCASE("single approaching pair populated: |rho| history is theta-independent") {
    // wall-free run: the boundary phase is a pure gauge of the left-moving
    // photon components and cancels in the density
    const WavePacketSpec ph{-8.0, 1.0, 1.5, cplx{0, 0}, cplx{1, 0}};
    const auto [field0, diag0] = run(ph, el, 0.0);
    const auto [fieldPi, diagPi] = run(ph, el, M_PI);
    CHECK(max_density_diff(field0, fieldPi) < 1e-13);
  }

  SUBCASE("wall and boundary reflections interfere: same side norms, "
          "different patterns") {
    // Rescaling every left-moving-photon component of a sector by e^{i theta}
    // turns the theta boundary rule into the theta = 0 one, so rho is exactly
    // theta-independent until the hard walls act (their flip carries phase
    // +1, breaking the gauge). In a small box the wall-reflected and
    // boundary-reflected amplitudes overlap and the phase becomes visible.
    const GridSpec box = make_grid(32, 0.5, -8.0);
    auto build = [&]() {
      SpinorField2B field(box);
      for (int i = 0; i < box.n; ++i)
        for (int j = 0; j < box.n; ++j) {
          const int d = i - j;
          if (d >= 0) continue; // photon-left sector
          const double zc = 0.5 * (box.z(i) + box.z(j));
          const double envelope = std::exp(-zc * zc / 8.0 - 0.05 * d * d);
          field.at(comp_index(+1, -1), i, j) = envelope;        // approaching
          field.at(comp_index(-1, -1), i, j) = 0.7 * envelope;  // co-moving
        }
      const double norm = total_norm(field);
      for (auto& plane : field.comp)
        for (cplx& v : plane) v /= std::sqrt(norm);
      return field;
    };
    auto evolve_theta = [&](double theta) {
      SpinorField2B field = build();
      SpinorField2B scratch(box);
      StepDiagnostics last{};
      for (long s = 1; s <= 64; ++s)
        last = step(field, scratch, params_of(1.0, theta, InteractionMode::interacting), s);
      return std::pair<SpinorField2B, StepDiagnostics>{std::move(field), last};
    };
    const auto [field0, diag0] = evolve_theta(0.0);
    const auto [fieldPi, diagPi] = evolve_theta(M_PI);
    CHECK(diag0.side_norm_right == doctest::Approx(diagPi.side_norm_right).epsilon(1e-12));
    CHECK(diag0.side_norm_left == doctest::Approx(diagPi.side_norm_left).epsilon(1e-12));
    CHECK(max_density_diff(field0, fieldPi) > 1e-6);
  }
}
