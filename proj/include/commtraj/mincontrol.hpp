#pragma once

#include <memory>

#include "commtraj/dynamics.hpp"

namespace commtraj {

struct MinControlOptions {
  double tau_min = 0.25;        // s; shorter legs are rejected
  double condition_cap = 1e12;  // on the diagonally equilibrated Gramian
};

/// Finite-horizon controllability Gramian
///   W(tau) = int_0^tau exp(A s) B B^T exp(A^T s) ds
/// stored with a factorization of its equilibrated form D^-1 W D^-1,
/// D = sqrt(diag W), so that solves stay accurate although the raw entries
/// span many orders of magnitude.
class Gramian {
 public:
  Gramian(const Mat4& W, double tau, const MinControlOptions& opts);

  const Mat4& matrix() const { return W_; }
  double tau() const { return tau_; }
  double min_eigenvalue() const { return eig_min_; }
  double max_eigenvalue() const { return eig_max_; }
  /// Condition number of the equilibrated matrix.
  double condition() const { return cond_; }

  Vec4 solve(const Vec4& r) const;
  Mat4 inverse() const;

 private:
  Mat4 W_;
  double tau_;
  Vec4 inv_scale_;
  Mat4 scaled_inv_;
  double eig_min_ = 0.0;
  double eig_max_ = 0.0;
  double cond_ = 0.0;
};

/// M(t; t_n): the degree-7 matrix polynomial
///   sum_{k,l} (-1)^{k+l} A^k B B^T (A^T)^l (t^{k+l+1} - t_n^{k+l+1})
///             / (k! l! (k+l+1))
/// i.e. int_{t_n}^t exp(-A s) B B^T exp(-A^T s) ds for nilpotent A.
Mat4 gramian_polynomial(const AxisModel& axis, double t, double t_n);

/// W(tau) = exp(A tau) M(tau; 0) exp(A^T tau). Throws ConditioningError when
/// tau < tau_min or the equilibrated condition number exceeds the cap.
Gramian gramian_closed_form(const AxisModel& axis, double tau,
                            const MinControlOptions& opts = {});

struct SegmentSpec {
  PlanarState start;
  PlanarState end;
  double tau = 0.0;
};

/// Minimum-norm control over one window [t_start, t_end]:
///   u_i(t) = B_i^T exp(A_i^T (t_end - t)) W_i^-1 r_i,
///   r_i = zeta_i(t_end) - exp(A_i tau) zeta_i(t_start).
struct SegmentControlLaw {
  double t_start = 0.0;
  double t_end = 0.0;
  double duration = 0.0;  // exact tau used for the Gramian
  PlanarState start;
  PlanarState end;
  Vec4 residual_x = Vec4::Zero();
  Vec4 residual_y = Vec4::Zero();
  Vec4 weight_x = Vec4::Zero();  // W_x^-1 r_x
  Vec4 weight_y = Vec4::Zero();  // W_y^-1 r_y
  AxisModel model_x;
  AxisModel model_y;

  double tau() const { return duration; }
  Vec2 control(double t) const;
};

/// Caches Gramians per (axis, tau) for one linear model. Copies share the
/// cache; concurrent use is safe and lookups never wait on another thread's
/// factorization (a miss computes outside the lock).
class SegmentSolver {
 public:
  explicit SegmentSolver(LinearPlanarModel model, MinControlOptions opts = {});

  const LinearPlanarModel& model() const { return model_; }
  const MinControlOptions& options() const { return opts_; }

  std::shared_ptr<const Gramian> gramian(Axis axis, double tau) const;
  SegmentControlLaw solve(const SegmentSpec& spec, double t_start = 0.0) const;

 private:
  struct Cache;
  LinearPlanarModel model_;
  MinControlOptions opts_;
  std::shared_ptr<Cache> cache_;
};

SegmentControlLaw min_norm_segment(const SegmentSpec& spec,
                                   const LinearPlanarModel& model,
                                   double t_start = 0.0,
                                   const MinControlOptions& opts = {});

/// sum over axes of r^T W^-1 r, equal to int ||u*||^2 dt over the window.
double segment_energy(const SegmentControlLaw& law);

/// Closed-form state along the optimal segment. Throws ParameterError for t
/// outside [t_start, t_end].
PlanarState propagate_state(const SegmentControlLaw& law, double t);

}  // namespace commtraj
