#include "commtraj/mincontrol.hpp"

#include <cmath>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "commtraj/errors.hpp"

namespace commtraj {
namespace {

constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0};

const char* axis_name(Axis a) { return a == Axis::X ? "x" : "y"; }

}  // namespace

Gramian::Gramian(const Mat4& W, double tau, const MinControlOptions& opts)
    : W_(W), tau_(tau) {
  const Vec4 diag = W.diagonal();
  if (!(diag.minCoeff() > 0.0)) {
    throw ConditioningError("Gramian has a non-positive diagonal entry");
  }
  inv_scale_ = diag.cwiseSqrt().cwiseInverse();
  const Mat4 scaled = inv_scale_.asDiagonal() * W * inv_scale_.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Mat4> scaled_eig(scaled);
  const double lo = scaled_eig.eigenvalues().minCoeff();
  const double hi = scaled_eig.eigenvalues().maxCoeff();
  cond_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond_ <= opts.condition_cap)) {
    std::ostringstream msg;
    msg << "Gramian condition number " << cond_ << " exceeds cap "
        << opts.condition_cap << " (tau = " << tau << " s)";
    throw ConditioningError(msg.str());
  }
  scaled_inv_ = scaled_eig.eigenvectors() *
                scaled_eig.eigenvalues().cwiseInverse().asDiagonal() *
                scaled_eig.eigenvectors().transpose();

  Eigen::SelfAdjointEigenSolver<Mat4> raw(W, Eigen::EigenvaluesOnly);
  eig_min_ = raw.eigenvalues().minCoeff();
  eig_max_ = raw.eigenvalues().maxCoeff();
}

Vec4 Gramian::solve(const Vec4& r) const {
  return inv_scale_.asDiagonal() *
         (scaled_inv_ * (inv_scale_.asDiagonal() * r));
}

Mat4 Gramian::inverse() const {
  return inv_scale_.asDiagonal() * scaled_inv_ * inv_scale_.asDiagonal();
}

Mat4 gramian_polynomial(const AxisModel& axis, double t, double t_n) {
  Vec4 AkB[4];
  AkB[0] = axis.B;
  for (int k = 1; k < 4; ++k) AkB[k] = axis.A * AkB[k - 1];

  Mat4 M = Mat4::Zero();
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l < 4; ++l) {
      const int p = k + l + 1;
      const double sign = ((k + l) % 2 == 0) ? 1.0 : -1.0;
      const double span = std::pow(t, p) - std::pow(t_n, p);
      M += (sign * span / (kFactorial[k] * kFactorial[l] * p)) *
           (AkB[k] * AkB[l].transpose());
    }
  }
  return M;
}

Gramian gramian_closed_form(const AxisModel& axis, double tau,
                            const MinControlOptions& opts) {
  // Durations normalized to sum to t_f may land a few ulps under tau_min.
  if (!(tau >= opts.tau_min * (1.0 - 1e-12))) {
    std::ostringstream msg;
    msg << "degenerate segment: tau = " << tau << " s below tau_min = "
        << opts.tau_min << " s";
    throw ConditioningError(msg.str());
  }
  const Mat4 E = expm_planar(axis.A, tau);
  Mat4 W = E * gramian_polynomial(axis, tau, 0.0) * E.transpose();
  W = 0.5 * (W + W.transpose());
  return Gramian(W, tau, opts);
}

Vec2 SegmentControlLaw::control(double t) const {
  const double back = duration - (t - t_start);
  const Vec2 u(model_x.B.dot(expm_planar(model_x.A, back).transpose() * weight_x),
               model_y.B.dot(expm_planar(model_y.A, back).transpose() * weight_y));
  return u;
}

struct SegmentSolver::Cache {
  static constexpr size_t kMaxEntries = 1 << 14;
  std::shared_mutex mutex;
  std::unordered_map<long long, std::shared_ptr<const Gramian>> entries[2];
};

SegmentSolver::SegmentSolver(LinearPlanarModel model, MinControlOptions opts)
    : model_(std::move(model)), opts_(opts), cache_(std::make_shared<Cache>()) {}

std::shared_ptr<const Gramian> SegmentSolver::gramian(Axis axis,
                                                      double tau) const {
  const long long key = std::llround(tau * 1e9);
  auto& table = cache_->entries[axis == Axis::X ? 0 : 1];
  {
    std::shared_lock lock(cache_->mutex);
    if (auto it = table.find(key); it != table.end()) {
      // Only an exact duration match may reuse the factorization; a
      // near-miss inside the same 1 ns bucket is computed fresh.
      if (it->second->tau() == tau) return it->second;
      lock.unlock();
      return std::make_shared<const Gramian>(
          gramian_closed_form(model_.axis(axis), tau, opts_));
    }
  }
  auto g = std::make_shared<const Gramian>(
      gramian_closed_form(model_.axis(axis), tau, opts_));
  std::unique_lock lock(cache_->mutex);
  if (table.size() >= Cache::kMaxEntries) table.clear();
  return table.emplace(key, std::move(g)).first->second;
}

SegmentControlLaw SegmentSolver::solve(const SegmentSpec& spec,
                                       double t_start) const {
  SegmentControlLaw law;
  law.t_start = t_start;
  law.t_end = t_start + spec.tau;
  law.duration = spec.tau;
  law.start = spec.start;
  law.end = spec.end;
  law.model_x = model_.x;
  law.model_y = model_.y;
  for (Axis a : {Axis::X, Axis::Y}) {
    std::shared_ptr<const Gramian> W;
    try {
      W = gramian(a, spec.tau);
    } catch (const ConditioningError& e) {
      throw ConditioningError(std::string("axis ") + axis_name(a) + ": " +
                              e.what());
    }
    const AxisModel& m = model_.axis(a);
    const Vec4 r = spec.end.axis(a) - expm_planar(m.A, spec.tau) * spec.start.axis(a);
    (a == Axis::X ? law.residual_x : law.residual_y) = r;
    (a == Axis::X ? law.weight_x : law.weight_y) = W->solve(r);
  }
  return law;
}

SegmentControlLaw min_norm_segment(const SegmentSpec& spec,
                                   const LinearPlanarModel& model,
                                   double t_start,
                                   const MinControlOptions& opts) {
  return SegmentSolver(model, opts).solve(spec, t_start);
}

double segment_energy(const SegmentControlLaw& law) {
  return law.residual_x.dot(law.weight_x) + law.residual_y.dot(law.weight_y);
}

PlanarState propagate_state(const SegmentControlLaw& law, double t) {
  const double slack = 1e-12 * std::max(1.0, std::abs(law.t_end));
  if (t < law.t_start - slack || t > law.t_end + slack) {
    std::ostringstream msg;
    msg << "propagate_state: t = " << t << " outside [" << law.t_start << ", "
        << law.t_end << "]";
    throw ParameterError(msg.str());
  }
  const double s = std::clamp(t - law.t_start, 0.0, law.tau());
  const double tau = law.tau();
  auto axis_state = [&](const AxisModel& m, const Vec4& z0, const Vec4& w) {
    const Mat4 Es = expm_planar(m.A, s);
    const Mat4 Et = expm_planar(m.A, tau);
    const Vec4 forced = Es * (gramian_polynomial(m, s, 0.0) * (Et.transpose() * w));
    return Vec4(Es * z0 + forced);
  };
  PlanarState out;
  out.x = axis_state(law.model_x, law.start.x, law.weight_x);
  out.y = axis_state(law.model_y, law.start.y, law.weight_y);
  return out;
}

}  // namespace commtraj
