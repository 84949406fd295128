#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

#include "commtraj/errors.hpp"
#include "commtraj/mincontrol.hpp"
#include "support.hpp"

using namespace commtraj;
using testutil::integrate;

namespace {

double control_energy_by_quadrature(const SegmentControlLaw& law) {
  return integrate([&](double t) { return law.control(t).squaredNorm(); }, law.t_start,
                   law.t_end);
}

}  // namespace

TEST_CASE("gramian closed form matches quadrature") {
  const LinearPlanarModel m = testutil::default_model();
  for (double tau : {0.5, 1.0, 3.7, 10.0, 20.0}) {
    for (const AxisModel* a : {&m.x, &m.y}) {
      const Gramian W = gramian_closed_form(*a, tau);
      CAPTURE(tau);
      CHECK(testutil::rel_frobenius(W.matrix(), testutil::gramian_by_quadrature(*a, tau)) < 1e-10);
      CHECK((W.matrix() - W.matrix().transpose()).norm() <= 1e-12 * W.matrix().norm());
      CHECK(W.min_eigenvalue() > 0.0);
    }
  }
}

TEST_CASE("gramian leading term") {
  // Only the last state is driven directly, so W(3,3) = b^2 tau exactly.
  const LinearPlanarModel m = testutil::default_model();
  const double b = m.x.B(3);
  CHECK(gramian_closed_form(m.x, 1.0).matrix()(3, 3) == doctest::Approx(b * b));
  CHECK(gramian_closed_form(m.x, 2.5).matrix()(3, 3) == doctest::Approx(b * b * 2.5));
}

TEST_CASE("gramian polynomial is the integral of the backward kernel") {
  const LinearPlanarModel m = testutil::default_model();
  const double t = 2.0, t_n = 0.5;
  const Mat4 M = gramian_polynomial(m.x, t, t_n);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double q = integrate(
          [&](double s) {
            const Vec4 v = expm_planar(m.x.A, -s) * m.x.B;
            return v(i) * v(j);
          },
          t_n, t);
      CHECK(M(i, j) == doctest::Approx(q).epsilon(1e-10).scale(M.norm()));
    }
  }
  CHECK(gramian_polynomial(m.x, 1.3, 1.3).isZero(0.0));
}

TEST_CASE("degenerate durations are rejected") {
  const LinearPlanarModel m = testutil::default_model();
  CHECK_THROWS_AS(gramian_closed_form(m.x, 0.1), ConditioningError);
  MinControlOptions tight;
  tight.condition_cap = 10.0;
  CHECK_THROWS_AS(gramian_closed_form(m.x, 1.0, tight), ConditioningError);

  SegmentSolver solver(m);
  try {
    solver.solve({PlanarState{}, PlanarState::at_rest({1, 0}), 0.01});
    FAIL("expected a conditioning error");
  } catch (const ConditioningError& e) {
    CHECK(std::string(e.what()).find("axis x") != std::string::npos);
  }
}

TEST_CASE("minimum-norm transfer") {
  const LinearPlanarModel m = testutil::default_model();
  SegmentSolver solver(m);

  SUBCASE("zero residual gives zero control") {
    const PlanarState s = PlanarState::at_rest({4.0, 2.0});
    const auto law = solver.solve({s, s, 3.0});
    CHECK(segment_energy(law) == 0.0);
    CHECK(law.control(1.0).isZero(0.0));
  }

  SUBCASE("rest-to-rest translation reaches the target") {
    const double d = 12.0;
    const auto law = solver.solve({PlanarState{}, PlanarState::at_rest({d, 0}), 5.0}, 2.0);
    const PlanarControl u = [&](double t) { return law.control(t); };
    const auto out = simulate_linear(m, PlanarState{}, u, 2.0, 7.0, 1e-3);
    CHECK((out.back().state.x - law.end.x).norm() < 1e-6 * d);
    CHECK(out.back().state.y.norm() < 1e-6 * d);
  }

  SUBCASE("energy is quadratic in the displacement") {
    const double e1 = segment_energy(solver.solve({PlanarState{}, PlanarState::at_rest({3, 0}), 4.0}));
    const double e2 = segment_energy(solver.solve({PlanarState{}, PlanarState::at_rest({6, 0}), 4.0}));
    CHECK(e2 == doctest::Approx(4.0 * e1).epsilon(1e-12));
  }

  SUBCASE("energy is invariant under translation") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const PlanarState a = testutil::random_state(rng), b = testutil::random_state(rng);
      PlanarState a2 = a, b2 = b;
      a2.x(0) += 7.5;
      b2.x(0) += 7.5;
      const double e = segment_energy(solver.solve({a, b, 3.0}));
      CHECK(segment_energy(solver.solve({a2, b2, 3.0})) == doctest::Approx(e).epsilon(1e-9));
    }
  }

  SUBCASE("energy equals the integral of the squared control") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const double tau = std::uniform_real_distribution<double>(0.5, 15.0)(rng);
      const auto law = solver.solve({testutil::random_state(rng), testutil::random_state(rng), tau}, 1.0);
      CHECK(control_energy_by_quadrature(law) == doctest::Approx(segment_energy(law)).epsilon(1e-8));
    }
  }

  SUBCASE("Rayleigh bounds") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      const double tau = std::uniform_real_distribution<double>(0.5, 20.0)(rng);
      const auto law = solver.solve({testutil::random_state(rng), testutil::random_state(rng), tau});
      for (Axis a : {Axis::X, Axis::Y}) {
        const auto W = solver.gramian(a, tau);
        const Vec4& r = a == Axis::X ? law.residual_x : law.residual_y;
        const Vec4& w = a == Axis::X ? law.weight_x : law.weight_y;
        const double ratio = r.dot(w) / r.squaredNorm();
        CHECK(ratio >= (1.0 / W->max_eigenvalue()) * (1 - 1e-9));
        CHECK(ratio <= (1.0 / W->min_eigenvalue()) * (1 + 1e-9));
      }
    }
  }
}

TEST_CASE("closed-form propagation") {
  const LinearPlanarModel m = testutil::default_model();
  SegmentSolver solver(m);
  std::mt19937_64 rng(13);
  const PlanarState a = testutil::random_state(rng), b = testutil::random_state(rng);
  const auto law = solver.solve({a, b, 6.0}, 10.0);

  const PlanarState s0 = propagate_state(law, 10.0);
  CHECK((s0.x - a.x).norm() == 0.0);
  CHECK((s0.y - a.y).norm() == 0.0);
  const PlanarState s1 = propagate_state(law, 16.0);
  CHECK((s1.x - b.x).norm() < 1e-9 * (1 + b.x.norm()));
  CHECK((s1.y - b.y).norm() < 1e-9 * (1 + b.y.norm()));

  const PlanarControl u = [&](double t) { return law.control(t); };
  const auto mid = simulate_linear(m, a, u, 10.0, 13.0, 1e-3).back().state;
  const PlanarState p = propagate_state(law, 13.0);
  CHECK((p.x - mid.x).norm() < 1e-7 * (1 + mid.x.norm()));
  CHECK((p.y - mid.y).norm() < 1e-7 * (1 + mid.y.norm()));

  CHECK_THROWS_AS(propagate_state(law, 9.0), ParameterError);
  CHECK_THROWS_AS(propagate_state(law, 16.5), ParameterError);
}

TEST_CASE("sub-segments of an optimal segment are optimal") {
  const LinearPlanarModel m = testutil::default_model();
  SegmentSolver solver(m);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const double tau = 8.0;
    const auto law = solver.solve({testutil::random_state(rng), testutil::random_state(rng), tau});
    const double split = std::uniform_real_distribution<double>(1.0, tau - 1.0)(rng);
    const PlanarState mid = propagate_state(law, split);
    const double e = segment_energy(solver.solve({law.start, mid, split})) +
                     segment_energy(solver.solve({mid, law.end, tau - split}, split));
    CHECK(e == doctest::Approx(segment_energy(law)).epsilon(1e-8));
  }
}

TEST_CASE("gramian cache is shared and safe across threads") {
  SegmentSolver solver(testutil::default_model());
  const SegmentSolver copy = solver;
  const auto g1 = solver.gramian(Axis::X, 2.0);
  CHECK(copy.gramian(Axis::X, 2.0).get() == g1.get());
  // Same 1 ns bucket, different duration: must not reuse.
  const auto g2 = solver.gramian(Axis::X, 2.0 + 1e-12);
  CHECK(g2->tau() == 2.0 + 1e-12);

  std::vector<double> energies(8);
  std::vector<std::thread> pool;
  for (size_t i = 0; i < energies.size(); ++i) {
    pool.emplace_back([&, i] {
      double e = 0.0;
      for (int k = 0; k < 200; ++k) {
        const double tau = 1.0 + 0.01 * ((k * 7 + static_cast<int>(i)) % 50);
        e += segment_energy(solver.solve({PlanarState{}, PlanarState::at_rest({1, 1}), tau}));
      }
      energies[i] = e;
    });
  }
  for (auto& t : pool) t.join();
  SegmentSolver fresh(testutil::default_model());
  for (size_t i = 0; i < energies.size(); ++i) {
    double e = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double tau = 1.0 + 0.01 * ((k * 7 + static_cast<int>(i)) % 50);
      e += segment_energy(fresh.solve({PlanarState{}, PlanarState::at_rest({1, 1}), tau}));
    }
    CHECK(energies[i] == e);
  }
}
