#include "commtraj/dynamics.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "commtraj/errors.hpp"

namespace commtraj {

void QuadrotorParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ParameterError(std::string("quadrotor parameter '") + name +
                           "' must be positive and finite");
    }
  };
  positive(mass, "mass");
  positive(gravity, "gravity");
  positive(arm_length, "arm_length");
  positive(inertia, "inertia");
  positive(yaw_inertia, "yaw_inertia");
  positive(rotor_inertia, "rotor_inertia");
  positive(thrust_factor, "thrust_factor");
  positive(drag_factor, "drag_factor");
  // s^2 + a1 s + a2 is Hurwitz iff a1 > 0 and a2 > 0.
  positive(az1, "az1");
  positive(az2, "az2");
  positive(apsi1, "apsi1");
  positive(apsi2, "apsi2");
}

PlanarState PlanarState::at_rest(const Vec2& p) {
  PlanarState s;
  s.x(0) = p(0);
  s.y(0) = p(1);
  return s;
}

LinearPlanarModel build_linear_model(const QuadrotorParams& params) {
  params.validate();
  const double g = params.gravity;
  const double b = params.arm_length / params.inertia;

  LinearPlanarModel m;
  for (AxisModel* axis : {&m.x, &m.y}) {
    axis->A.setZero();
    axis->A(0, 1) = 1.0;
    axis->A(2, 3) = 1.0;
    axis->B << 0.0, 0.0, 0.0, b;
    axis->C << 1.0, 0.0, 0.0, 0.0;
  }
  m.x.A(1, 2) = g;
  m.y.A(1, 2) = -g;

  m.A_z << 0.0, 1.0, -params.az2, -params.az1;
  m.A_psi << 0.0, 1.0, -params.apsi2, -params.apsi1;
  return m;
}

Mat4 expm_planar(const Mat4& A, double t) {
  const Mat4 A2 = A * A;
  const Mat4 A3 = A2 * A;
  const Mat4 A4 = A3 * A;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if (A4.cwiseAbs().maxCoeff() > 1e-12 * std::pow(scale, 4)) {
    throw ParameterError("expm_planar: matrix is not nilpotent (A^4 != 0)");
  }
  return Mat4::Identity() + A * t + A2 * (t * t / 2.0) +
         A3 * (t * t * t / 6.0);
}

int controllability_rank(const AxisModel& axis) {
  Mat4 ctrb;
  Vec4 col = axis.B;
  for (int k = 0; k < 4; ++k) {
    ctrb.col(k) = col;
    col = axis.A * col;
  }
  Eigen::FullPivLU<Mat4> lu(ctrb);
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.rank());
}

std::vector<LinearSample> simulate_linear(const LinearPlanarModel& model,
                                          const PlanarState& initial,
                                          const PlanarControl& control,
                                          double t0, double t1, double dt) {
  if (!(dt > 0.0)) throw ParameterError("simulate_linear: dt must be positive");
  if (!(t1 >= t0)) throw ParameterError("simulate_linear: t1 < t0");

  auto rhs = [&](double t, const PlanarState& s) {
    const Vec2 u = control(t);
    PlanarState d;
    d.x = model.x.A * s.x + model.x.B * u(0);
    d.y = model.y.A * s.y + model.y.B * u(1);
    return d;
  };
  auto axpy = [](const PlanarState& s, double h, const PlanarState& d) {
    PlanarState r;
    r.x = s.x + h * d.x;
    r.y = s.y + h * d.y;
    return r;
  };

  const auto steps = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));
  std::vector<LinearSample> out;
  out.reserve(static_cast<size_t>(steps) + 1);
  PlanarState s = initial;
  double t = t0;
  out.push_back({t, s});
  for (long k = 0; k < steps; ++k) {
    const double t_next = (k + 1 == steps) ? t1 : t0 + (k + 1) * dt;
    const double h = t_next - t;
    const PlanarState k1 = rhs(t, s);
    const PlanarState k2 = rhs(t + h / 2, axpy(s, h / 2, k1));
    const PlanarState k3 = rhs(t + h / 2, axpy(s, h / 2, k2));
    const PlanarState k4 = rhs(t + h, axpy(s, h, k3));
    s.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    s.y += h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    t = t_next;
    out.push_back({t, s});
  }
  return out;
}

}  // namespace commtraj
