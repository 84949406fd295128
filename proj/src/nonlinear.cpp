#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "commtraj/dynamics.hpp"
#include "commtraj/errors.hpp"

namespace commtraj {
namespace {

// Arguments of q_x, q_y: (phi, theta, psi, z, zdot).
using QArgs = Eigen::Matrix<double, 5, 1>;

double altitude_factor(const QuadrotorParams& p, const QArgs& a) {
  return 1.0 - (p.az2 * a(3) + p.az1 * a(4)) / p.gravity;
}

double q_x(const QuadrotorParams& p, const QArgs& a) {
  const double sphi = std::sin(a(0)), cphi = std::cos(a(0));
  const double sth = std::sin(a(1)), cth = std::cos(a(1));
  const double spsi = std::sin(a(2)), cpsi = std::cos(a(2));
  return (sphi * spsi / (cphi * cth) + sth * cpsi / cth) *
             altitude_factor(p, a) -
         a(1);
}

double q_y(const QuadrotorParams& p, const QArgs& a) {
  const double sphi = std::sin(a(0)), cphi = std::cos(a(0));
  const double sth = std::sin(a(1)), cth = std::cos(a(1));
  const double spsi = std::sin(a(2)), cpsi = std::cos(a(2));
  return -(sth * spsi / cth - sphi * cpsi / (cphi * cth)) *
             altitude_factor(p, a) -
         a(0);
}

using QFn = double (*)(const QuadrotorParams&, const QArgs&);

// d/ds f(a + s v) at s = 0, 5-point central stencil.
double directional_first(QFn f, const QuadrotorParams& p, const QArgs& a,
                         const QArgs& v) {
  const double norm = v.cwiseAbs().maxCoeff();
  if (norm == 0.0) return 0.0;
  const double h = 1e-4 / std::max(1.0, norm);
  return (-f(p, a + 2 * h * v) + 8 * f(p, a + h * v) - 8 * f(p, a - h * v) +
          f(p, a - 2 * h * v)) /
         (12 * h);
}

// d^2/ds^2 f(a + s v) at s = 0, 5-point central stencil with step h.
double directional_second(QFn f, const QuadrotorParams& p, const QArgs& a,
                          const QArgs& v, double h) {
  if (v.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  return (-f(p, a + 2 * h * v) + 16 * f(p, a + h * v) - 30 * f(p, a) +
          16 * f(p, a - h * v) - f(p, a - 2 * h * v)) /
         (12 * h * h);
}

QArgs q_args(const FullState& s) {
  QArgs a;
  a << s.angles(0), s.angles(1), s.angles(2), s.position(2), s.velocity(2);
  return a;
}

double closed_loop_zddot(const QuadrotorParams& p, const FullState& s) {
  return -p.az2 * s.position(2) - p.az1 * s.velocity(2);
}

QArgs q_args_rate(const QuadrotorParams& p, const FullState& s) {
  QArgs v;
  v << s.rates(0), s.rates(1), s.rates(2), s.velocity(2),
      closed_loop_zddot(p, s);
  return v;
}

Mat4 mixer(const QuadrotorParams& p) {
  const double kb = p.thrust_factor, kt = p.drag_factor;
  Mat4 m;
  m << -kb, 0, kb, 0,   //
      0, kb, 0, -kb,    //
      kb, kb, kb, kb,   //
      kt, -kt, kt, -kt;
  return m;
}

// Indexes into the 12-vector used by the integrator.
enum : int { kPos = 0, kVel = 3, kAng = 6, kRate = 9 };
using Vec12 = Eigen::Matrix<double, 12, 1>;

Vec12 pack(const FullState& s) {
  Vec12 v;
  v << s.position, s.velocity, s.angles, s.rates;
  return v;
}

FullState unpack(const Vec12& v) {
  FullState s;
  s.position = v.segment<3>(kPos);
  s.velocity = v.segment<3>(kVel);
  s.angles = v.segment<3>(kAng);
  s.rates = v.segment<3>(kRate);
  return s;
}

struct Derivative {
  Vec12 dstate;
  Vec4 rotor_sq;
};

class ClosedLoop {
 public:
  ClosedLoop(const QuadrotorParams& p, const PlanarControl& control, double h2)
      : p_(p), control_(control), h2_(h2), mixer_inv_(mixer(p).inverse()) {}

  Derivative operator()(double t, const Vec12& x) const {
    const FullState s = unpack(x);
    const double g = p_.gravity;
    const double b = p_.arm_length / p_.inertia;
    const double cphi = std::cos(s.angles(0)), cth = std::cos(s.angles(1));

    // Pre-feedback on altitude and yaw.
    const double thrust_per_mass =
        (g - p_.az2 * s.position(2) - p_.az1 * s.velocity(2)) / (cphi * cth);
    const double u_z = p_.mass * thrust_per_mass;
    const double psi_ddot = -p_.apsi2 * s.angles(2) - p_.apsi1 * s.rates(2);
    const double u_psi = p_.yaw_inertia * psi_ddot;
    const double z_ddot = closed_loop_zddot(p_, s);
    const double z_dddot = -p_.az2 * s.velocity(2) - p_.az1 * z_ddot;

    const QArgs a = q_args(s);
    const QArgs v = q_args_rate(p_, s);
    const QArgs e_phi = QArgs::Unit(0);
    const QArgs e_theta = QArgs::Unit(1);

    // Parts of d^2q/dt^2 that do not depend on (u_x, u_y).
    const double curv_x = directional_second(q_x, p_, a, v, h2_);
    const double curv_y = directional_second(q_y, p_, a, v, h2_);
    const double dqx_dphi = directional_first(q_x, p_, a, e_phi);
    const double dqx_dth = directional_first(q_x, p_, a, e_theta);
    const double dqy_dphi = directional_first(q_y, p_, a, e_phi);
    const double dqy_dth = directional_first(q_y, p_, a, e_theta);

    const Vec2 ubar = control_(t);
    double spin = 0.0;
    Vec4 inputs;
    Perturbations q;
    for (int iter = 0; iter < 4; ++iter) {
      q = perturbations(p_, s, spin);
      QArgs accel0;
      accel0 << q.qphi, q.qtheta, psi_ddot, z_ddot, z_dddot;
      const double drift_x = directional_first(q_x, p_, a, accel0);
      const double drift_y = directional_first(q_y, p_, a, accel0);

      // u_i = ubar_i - (I/l) (q_i'' + q_{angle}); q_i'' is affine in u.
      Mat2 lhs;
      lhs << 1.0 + dqx_dth, dqx_dphi, dqy_dth, 1.0 + dqy_dphi;
      const Vec2 rhs(ubar(0) - (curv_x + drift_x + q.qtheta) / b,
                     ubar(1) - (curv_y + drift_y + q.qphi) / b);
      const Vec2 u = lhs.partialPivLu().solve(rhs);
      inputs << u(0), u(1), u_z, u_psi;
      const Vec4 w2 = mixer_inv_ * inputs;
      spin = std::sqrt(std::max(w2(0), 0.0)) - std::sqrt(std::max(w2(1), 0.0)) +
             std::sqrt(std::max(w2(2), 0.0)) - std::sqrt(std::max(w2(3), 0.0));
    }

    const double sphi = std::sin(s.angles(0)), sth = std::sin(s.angles(1));
    const double spsi = std::sin(s.angles(2)), cpsi = std::cos(s.angles(2));
    const double thrust_acc = u_z / p_.mass;

    Derivative d;
    d.dstate.segment<3>(kPos) = s.velocity;
    d.dstate(kVel + 0) = (cphi * sth * cpsi + sphi * spsi) * thrust_acc;
    d.dstate(kVel + 1) = (cphi * sth * spsi - sphi * cpsi) * thrust_acc;
    d.dstate(kVel + 2) = cphi * cth * thrust_acc - g;
    d.dstate.segment<3>(kAng) = s.rates;
    d.dstate(kRate + 0) = q.qphi + b * inputs(1);
    d.dstate(kRate + 1) = q.qtheta + b * inputs(0);
    d.dstate(kRate + 2) = u_psi / p_.yaw_inertia;
    d.rotor_sq = mixer_inv_ * inputs;
    return d;
  }

 private:
  const QuadrotorParams& p_;
  const PlanarControl& control_;
  double h2_;
  Mat4 mixer_inv_;
};

}  // namespace

FullState FullState::hover_at(const Vec2& p) {
  FullState s;
  s.position << p(0), p(1), 0.0;
  return s;
}

Perturbations perturbations(const QuadrotorParams& params, const FullState& s,
                            double rotor_spin) {
  const QArgs a = q_args(s);
  const double ratio = params.yaw_inertia / params.inertia - 1.0;
  const double jr = params.rotor_inertia / params.inertia;
  const double phi_dot = s.rates(0), th_dot = s.rates(1), psi_dot = s.rates(2);
  Perturbations q;
  q.qx = q_x(params, a);
  q.qy = q_y(params, a);
  q.qphi = -ratio * th_dot * psi_dot - jr * th_dot * rotor_spin;
  q.qtheta = ratio * phi_dot * psi_dot + jr * phi_dot * rotor_spin;
  return q;
}

Vec4 rotor_speeds_squared(const QuadrotorParams& params, const Vec4& inputs) {
  return mixer(params).inverse() * inputs;
}

PlanarState to_planar(const QuadrotorParams& params, const FullState& s) {
  const QArgs a = q_args(s);
  const QArgs v = q_args_rate(params, s);
  PlanarState z;
  z.x << s.position(0), s.velocity(0), s.angles(1) + q_x(params, a),
      s.rates(1) + directional_first(q_x, params, a, v);
  z.y << s.position(1), s.velocity(1), s.angles(0) + q_y(params, a),
      s.rates(0) + directional_first(q_y, params, a, v);
  return z;
}

NonlinearReport simulate_nonlinear_validated(const QuadrotorParams& params,
                                             const PlanarControl& control,
                                             const FullState& initial,
                                             double t0, double t1,
                                             const NonlinearOptions& opts) {
  params.validate();
  if (!(opts.dt > 0.0)) throw ParameterError("nonlinear validator: dt <= 0");
  if (!(t1 >= t0)) throw ParameterError("nonlinear validator: t1 < t0");
  if (!(opts.angle_bound > 0.0 && opts.angle_bound < std::numbers::pi / 2)) {
    throw ParameterError("nonlinear validator: angle bound must be in (0, pi/2)");
  }

  const double h2 = opts.fd_step > 0.0 ? opts.fd_step : opts.dt;
  const ClosedLoop f(params, control, h2);
  const LinearPlanarModel model = build_linear_model(params);
  const auto linear =
      simulate_linear(model, to_planar(params, initial), control, t0, t1, opts.dt);

  NonlinearReport report;
  report.samples.reserve(linear.size());
  report.min_rotor_speed_sq = std::numeric_limits<double>::infinity();

  auto check = [&](double t, const Vec12& x) {
    const double tilt =
        std::max(std::abs(x(kAng + 0)), std::abs(x(kAng + 1)));
    report.max_tilt = std::max(report.max_tilt, tilt);
    if (!(tilt <= opts.angle_bound)) {
      std::ostringstream msg;
      msg << "attitude bound " << opts.angle_bound << " rad exceeded at t = "
          << t << " s (tilt " << tilt << " rad)";
      throw ValidationError(msg.str(), t);
    }
  };
  auto record = [&](size_t k, const Vec12& x, const Vec4& rotor_sq) {
    const FullState s = unpack(x);
    const Vec2 lin = linear[k].state.position();
    report.samples.push_back({linear[k].t, s, lin});
    report.max_deviation = std::max(
        report.max_deviation, (s.position.head<2>() - lin).norm());
    report.min_rotor_speed_sq =
        std::min(report.min_rotor_speed_sq, rotor_sq.minCoeff());
    if (rotor_sq.minCoeff() < 0.0) report.realizable = false;
  };

  Vec12 x = pack(initial);
  check(t0, x);
  record(0, x, f(t0, x).rotor_sq);
  for (size_t k = 1; k < linear.size(); ++k) {
    const double t = linear[k - 1].t;
    const double h = linear[k].t - t;
    const Vec12 k1 = f(t, x).dstate;
    const Vec12 k2 = f(t + h / 2, x + h / 2 * k1).dstate;
    const Vec12 k3 = f(t + h / 2, x + h / 2 * k2).dstate;
    const Vec12 k4 = f(t + h, x + h * k3).dstate;
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check(linear[k].t, x);
    record(k, x, f(linear[k].t, x).rotor_sq);
  }

  for (size_t k = 1; k < linear.size(); ++k) {
    report.path_length +=
        (linear[k].state.position() - linear[k - 1].state.position()).norm();
  }
  return report;
}

}  // namespace commtraj
