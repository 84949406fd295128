#pragma once

#include <functional>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "commtraj/config.hpp"
#include "commtraj/cli.hpp"

namespace testutil {

using namespace commtraj;

inline LinearPlanarModel default_model() { return build_linear_model(QuadrotorParams{}); }

inline PlanarState random_state(std::mt19937_64& rng, double pos = 10.0, double rest = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PlanarState s;
  for (Vec4* v : {&s.x, &s.y}) {
    (*v)(0) = pos * u(rng);
    for (int k = 1; k < 4; ++k) (*v)(k) = rest * u(rng);
  }
  return s;
}

inline double rel_frobenius(const Mat4& a, const Mat4& b) {
  return (a - b).norm() / b.norm();
}

// Adaptive Gauss-Kronrod over [a, b], split at interior points to keep each
// piece smooth.
inline double integrate(const std::function<double(double)>& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  return gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14, &err);
}

// Gramian by quadrature of exp(A s) B B^T exp(A^T s), entry by entry.
inline Mat4 gramian_by_quadrature(const AxisModel& m, double tau) {
  Mat4 W;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      W(i, j) = integrate(
          [&](double s) {
            const Vec4 v = expm_planar(m.A, s) * m.B;
            return v(i) * v(j);
          },
          0.0, tau);
      W(j, i) = W(i, j);
    }
  }
  return W;
}

// Reference geometry with the map built once per process.
struct ReferenceSetup {
  RunConfig cfg = default_config();
  QuantizedRateMap map = build_rate_map(cfg);

  PlanningContext context(double lambda) const {
    RunConfig c = cfg;
    c.problem.lambda = lambda;
    return make_context(c, map);
  }
};

inline const ReferenceSetup& reference() {
  static const ReferenceSetup setup;
  return setup;
}

}  // namespace testutil
