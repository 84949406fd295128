#include "commtraj/channel.hpp"

#include <cmath>
#include <sstream>

#include "commtraj/errors.hpp"

namespace commtraj {
namespace {

double gaussian_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace

void ChannelParams::validate() const {
  if (!(path_loss_exponent > 0.0)) {
    throw ParameterError("channel: path_loss_exponent must be positive");
  }
  if (!(shadow_var_db >= 0.0)) {
    throw ParameterError("channel: shadow_var_db must be non-negative");
  }
  if (!(min_standoff > 0.0)) {
    throw ParameterError("channel: min_standoff must be positive");
  }
  if (!std::isfinite(snr_ref_db)) throw ParameterError("channel: snr_ref_db");
}

void RateLadder::validate() const {
  if (rates.size() < 2 || rates.size() != thresholds.size()) {
    throw ParameterError("rate ladder: need matching rates/thresholds, J >= 1");
  }
  if (rates[0] != 0.0 || thresholds[0] != 0.0) {
    throw ParameterError("rate ladder: R_0 and gamma_0 must be 0");
  }
  for (size_t j = 1; j < rates.size(); ++j) {
    if (!(rates[j] > rates[j - 1]) || !(thresholds[j] > thresholds[j - 1])) {
      throw ParameterError("rate ladder: rates and thresholds must strictly increase");
    }
  }
  if (!(symbol_rate > 0.0) || !(period > 0.0) || !(tx_time > 0.0) ||
      !(tx_time < period)) {
    throw ParameterError("rate ladder: need R_s > 0 and 0 < T_tx < T");
  }
}

double RateLadder::rate_for_snr(double s) const {
  for (size_t j = rates.size(); j-- > 1;) {
    if (s >= thresholds[j]) return rates[j];
  }
  return rates[0];
}

RateLadder RateLadder::qam(const std::vector<int>& bits, double target_ber,
                           double symbol_rate, double period, double tx_time) {
  RateLadder ladder;
  ladder.symbol_rate = symbol_rate;
  ladder.period = period;
  ladder.tx_time = tx_time;
  ladder.rates = {0.0};
  ladder.thresholds = {0.0};
  const auto gammas = qam_thresholds(target_ber, bits);
  for (size_t i = 0; i < bits.size(); ++i) {
    ladder.rates.push_back(bits[i] * symbol_rate);
    ladder.thresholds.push_back(gammas[i]);
  }
  ladder.validate();
  return ladder;
}

double mean_snr_db(double d, const ChannelParams& params) {
  return params.snr_ref_db - 10.0 * params.path_loss_exponent * std::log10(d);
}

double snr(const Vec2& p, double h, const ChannelParams& params) {
  const double d = params.distance(p);
  if (!(d >= params.min_standoff)) {
    std::ostringstream msg;
    msg << "snr: point within " << params.min_standoff
        << " m of the access point (d = " << d << ")";
    throw ParameterError(msg.str());
  }
  return h * h * std::pow(10.0, params.snr_ref_db / 10.0) /
         std::pow(d, params.path_loss_exponent);
}

double qam_ber(int k, double s) {
  const double M = std::pow(2.0, k);
  return (4.0 / k) * (1.0 - 1.0 / std::sqrt(M)) *
         gaussian_tail(std::sqrt(3.0 * std::max(s, 0.0) / (M - 1.0)));
}

double qam_threshold(double target_ber, int k) {
  if (!(target_ber > 0.0 && target_ber <= 0.5)) {
    throw ParameterError("qam_threshold: target BER must lie in (0, 0.5]");
  }
  if (k < 1) throw ParameterError("qam_threshold: bits per symbol must be >= 1");
  if (qam_ber(k, 0.0) <= target_ber) return 0.0;
  // Bisection in dB; BER is strictly decreasing in SNR.
  double lo = -40.0, hi = 80.0;
  if (qam_ber(k, std::pow(10.0, hi / 10.0)) > target_ber) {
    throw ParameterError("qam_threshold: target BER unreachable");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (qam_ber(k, std::pow(10.0, mid / 10.0)) <= target_ber) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::pow(10.0, hi / 10.0);
}

std::vector<double> qam_thresholds(double target_ber,
                                   const std::vector<int>& bits) {
  std::vector<double> out;
  out.reserve(bits.size());
  for (int k : bits) out.push_back(qam_threshold(target_ber, k));
  // At BER 1/2 every order already meets the target with no signal; the
  // all-zero list is the expected degenerate answer, not an inconsistency.
  if (target_ber == 0.5) return out;
  for (size_t i = 1; i < out.size(); ++i) {
    if (!(out[i] > out[i - 1])) {
      std::ostringstream msg;
      msg << "qam_thresholds: thresholds not strictly increasing at target BER "
          << target_ber;
      throw ConsistencyError(msg.str());
    }
  }
  return out;
}

double expected_rate_at_distance(double d, const ChannelParams& params,
                                 const RateLadder& ladder) {
  if (!(d >= params.min_standoff)) {
    throw ParameterError("expected_rate: point inside the minimum standoff");
  }
  const double mu = mean_snr_db(d, params);
  const double sigma = std::sqrt(params.shadow_var_db);
  // E[R] = sum_j (R_j - R_{j-1}) P[Gamma >= gamma_j], a telescoped form of
  // sum_j R_j P[gamma_j <= Gamma < gamma_{j+1}].
  double total = 0.0;
  for (size_t j = 1; j < ladder.rates.size(); ++j) {
    const double step = ladder.rates[j] - ladder.rates[j - 1];
    const double gamma = ladder.thresholds[j];
    double p_above;
    if (gamma <= 0.0) {
      p_above = 1.0;
    } else if (sigma == 0.0) {
      p_above = mu >= to_db(gamma) ? 1.0 : 0.0;
    } else {
      p_above = gaussian_tail((to_db(gamma) - mu) / sigma);
    }
    total += step * p_above;
  }
  return total;
}

double expected_rate(const Vec2& p, const ChannelParams& params,
                     const RateLadder& ladder) {
  return expected_rate_at_distance(params.distance(p), params, ladder);
}

double switch_radius(double gamma, const ChannelParams& params) {
  return std::pow(10.0, (params.snr_ref_db - to_db(gamma)) /
                            (10.0 * params.path_loss_exponent));
}

int QuantizedRateMap::level_at_distance(double d) const {
  // Level j covers (d_j, d_{j-1}], so the level is 1 + #{j : d <= d_j}.
  int level = 1;
  for (double r : radii) {
    if (d <= r) ++level;
  }
  return level;
}

double region_radius(const QuantizedRateMap& map, int j) {
  if (j < 1 || j > static_cast<int>(map.radii.size())) {
    std::ostringstream msg;
    msg << "region_radius: border index " << j << " outside [1, "
        << map.radii.size() << "]";
    throw ParameterError(msg.str());
  }
  return map.radii[static_cast<size_t>(j - 1)];
}

}  // namespace commtraj
