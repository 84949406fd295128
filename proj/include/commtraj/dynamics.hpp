#pragma once

#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Core>

namespace commtraj {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

/// Physical constants of the quadrotor plus the altitude/yaw pre-feedback
/// gains. Roll and pitch inertia are equal by symmetry.
///
/// The defaults are representative small-quadrotor magnitudes, not the
/// parameters of any particular airframe.
struct QuadrotorParams {
  double mass = 0.5;             // kg
  double gravity = 9.81;         // m/s^2
  double arm_length = 0.2;       // m
  double inertia = 5e-3;         // kg m^2, roll/pitch
  double yaw_inertia = 9e-3;     // kg m^2
  double rotor_inertia = 3.4e-5; // kg m^2
  double thrust_factor = 3e-5;
  double drag_factor = 7.5e-7;
  double az1 = 4.0;
  double az2 = 4.0;
  double apsi1 = 4.0;
  double apsi2 = 4.0;

  /// Throws ParameterError unless every mass, inertia and length is
  /// positive and both closed-loop polynomials s^2 + a1 s + a2 are Hurwitz.
  void validate() const;
};

enum class Axis { X, Y };

/// One decoupled planar channel: zeta' = A zeta + B u, p = C zeta.
struct AxisModel {
  Mat4 A = Mat4::Zero();
  Vec4 B = Vec4::Zero();
  Eigen::RowVector4d C = Eigen::RowVector4d::Zero();
};

struct LinearPlanarModel {
  AxisModel x;
  AxisModel y;
  Mat2 A_z = Mat2::Zero();
  Mat2 A_psi = Mat2::Zero();

  const AxisModel& axis(Axis a) const { return a == Axis::X ? x : y; }
};

/// Planar state in the linearizing coordinates. Each 4-vector holds
/// (position, velocity, tilt-like, tilt-rate-like) for its axis.
struct PlanarState {
  Vec4 x = Vec4::Zero();
  Vec4 y = Vec4::Zero();

  Vec4& axis(Axis a) { return a == Axis::X ? x : y; }
  const Vec4& axis(Axis a) const { return a == Axis::X ? x : y; }
  Vec2 position() const { return {x(0), y(0)}; }
  Vec2 velocity() const { return {x(1), y(1)}; }

  /// Hover at rest at position p.
  static PlanarState at_rest(const Vec2& p);
};

LinearPlanarModel build_linear_model(const QuadrotorParams& params);

/// exp(A t) for a matrix with A^4 = 0, via the finite series
/// I + A t + A^2 t^2 / 2 + A^3 t^3 / 6. Throws ParameterError when A is not
/// nilpotent of index <= 4.
Mat4 expm_planar(const Mat4& A, double t);

/// Numerical rank of [B, AB, A^2 B, A^3 B].
int controllability_rank(const AxisModel& axis);

/// Time-indexed planar control ubar(t) = (ubar_x, ubar_y).
using PlanarControl = std::function<Vec2(double)>;

struct LinearSample {
  double t = 0.0;
  PlanarState state;
};

/// Fixed-step RK4 integration of both planar channels on [t0, t1]. The last
/// step is shortened so the final sample lands exactly on t1.
std::vector<LinearSample> simulate_linear(const LinearPlanarModel& model,
                                          const PlanarState& initial,
                                          const PlanarControl& control,
                                          double t0, double t1, double dt);

// ---------------------------------------------------------------------------
// Nonlinear closed-loop validator

/// Full rigid-body state. Angles are (roll phi, pitch theta, yaw psi) and
/// `rates` are their time derivatives.
struct FullState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 angles = Vec3::Zero();
  Vec3 rates = Vec3::Zero();

  static FullState hover_at(const Vec2& p);
};

/// The four perturbation signals of the pre-stabilized model.
struct Perturbations {
  double qx = 0.0;
  double qy = 0.0;
  double qphi = 0.0;
  double qtheta = 0.0;
};

/// Perturbations at a given state; `rotor_spin` is w1 - w2 + w3 - w4.
Perturbations perturbations(const QuadrotorParams& params, const FullState& s,
                            double rotor_spin);

/// Maps (u_x, u_y, u_z, u_psi) to squared rotor speeds through the inverse of
/// the mixer matrix.
Vec4 rotor_speeds_squared(const QuadrotorParams& params, const Vec4& inputs);

struct NonlinearOptions {
  double dt = 1e-3;
  double angle_bound = std::numbers::pi / 3.0;
  // Step of the 5-point stencil along the motion for second derivatives of
  // q_x, q_y; 0 means "use dt".
  double fd_step = 0.0;
};

struct NonlinearSample {
  double t = 0.0;
  FullState state;
  Vec2 linear_position = Vec2::Zero();
};

struct NonlinearReport {
  std::vector<NonlinearSample> samples;
  double max_deviation = 0.0;    // max |p_nonlinear - p_linear|, m
  double path_length = 0.0;      // of the linear trajectory, m
  double max_tilt = 0.0;         // max(|phi|, |theta|), rad
  double min_rotor_speed_sq = 0.0;
  bool realizable = true;        // every w_i^2 >= 0 along the run
};

/// Integrates the full nonlinear model under pre-feedback on altitude/yaw and
/// cancellation u_i = ubar_i - q*_i(x), and compares the planar position to
/// simulate_linear under the same ubar. Throws ValidationError with the time
/// of the first violation when |phi| or |theta| exceeds the angle bound.
NonlinearReport simulate_nonlinear_validated(const QuadrotorParams& params,
                                             const PlanarControl& control,
                                             const FullState& initial,
                                             double t0, double t1,
                                             const NonlinearOptions& opts = {});

/// Linearizing coordinates of a full state (zeta = x + [0 0 1 d/dt]^T q).
PlanarState to_planar(const QuadrotorParams& params, const FullState& s);

}  // namespace commtraj
