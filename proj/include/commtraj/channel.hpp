#pragma once

#include <cstdint>
#include <vector>

#include "commtraj/dynamics.hpp"

namespace commtraj {

/// Path loss plus lognormal shadowing towards a single access point.
///
/// Shadowing is Gaussian in the dB domain: 10 log10(h^2) ~ N(0, shadow_var_db).
struct ChannelParams {
  double path_loss_exponent = 2.0;
  double snr_ref_db = 40.0;     // 10 log10(P / sigma^2) at 1 m
  double shadow_var_db = 1.0;   // dB^2
  Vec2 ap_position = Vec2::Zero();
  double min_standoff = 1.0;    // m

  void validate() const;
  double distance(const Vec2& p) const { return (p - ap_position).norm(); }
};

/// Adaptive-modulation ladder. Index 0 is the "no transmission" rung:
/// rates[0] == 0 and thresholds[0] == 0. Thresholds are linear SNR.
/// A default-constructed ladder is empty; use qam() to build one.
struct RateLadder {
  std::vector<double> rates;
  std::vector<double> thresholds;
  double symbol_rate = 1.0;  // R_s
  double period = 1.0;       // duplexing period T, s
  double tx_time = 0.5;      // transmit phase T_tx, s

  void validate() const;
  int top() const { return static_cast<int>(rates.size()) - 1; }
  double max_rate() const { return rates.back(); }
  /// R_j for gamma_j <= snr < gamma_{j+1}.
  double rate_for_snr(double snr) const;

  /// Ladder of M-QAM schemes (bits per symbol each) with thresholds chosen
  /// for the target bit error rate; rates are bits * symbol_rate.
  static RateLadder qam(const std::vector<int>& bits_per_symbol,
                        double target_ber, double symbol_rate = 1.0,
                        double period = 1.0, double tx_time = 0.5);
};

/// Linear SNR at p for shadowing amplitude gain h. Throws ParameterError
/// inside the minimum standoff.
double snr(const Vec2& p, double h, const ChannelParams& params);

/// Mean SNR in dB at distance d (no shadowing).
double mean_snr_db(double d, const ChannelParams& params);

/// Gray-coded square M-QAM bit error approximation,
///   (4 / k) (1 - 1/sqrt(M)) Q(sqrt(3 snr / (M - 1))),  M = 2^k.
double qam_ber(int bits_per_symbol, double snr);

/// Smallest linear SNR with qam_ber <= target (0 when already met at 0).
double qam_threshold(double target_ber, int bits_per_symbol);

/// Thresholds for every scheme. Throws ParameterError outside
/// 0 < target_ber <= 0.5 and ConsistencyError when the result is not
/// strictly increasing. target_ber = 0.5 returns all zeros.
std::vector<double> qam_thresholds(double target_ber,
                                   const std::vector<int>& bits_per_symbol);

/// E[R(Gamma(p))] over the shadowing, in closed form.
double expected_rate(const Vec2& p, const ChannelParams& params,
                     const RateLadder& ladder);
double expected_rate_at_distance(double d, const ChannelParams& params,
                                 const RateLadder& ladder);

/// Piecewise-constant radial approximation f_Q of the expected rate.
///
/// Level j (1-based) holds on distances (radii[j-1], radii[j-2]] with the
/// conventions radii[-1] = +inf and radii[Q-1] = 0, so level 1 is the
/// outermost ring (rate 0) and level Q the disk around the access point
/// (rate max R_j). Radii are strictly decreasing.
struct QuantizedRateMap {
  std::vector<double> radii;   // d_1 > d_2 > ... > d_{Q-1}
  std::vector<double> levels;  // R^Q_1 .. R^Q_Q
  double error = 0.0;          // integrated squared error E_Q
  double domain_radius = 0.0;
  /// Q exceeds the distinguishable plateaus: two adjacent levels coincide or
  /// a ring is thinner than one integration cell.
  bool duplicated_levels = false;
  Vec2 ap_position = Vec2::Zero();

  int size() const { return static_cast<int>(levels.size()); }
  /// 1-based level index of a distance.
  int level_at_distance(double d) const;
  int level_at(const Vec2& p) const { return level_at_distance((p - ap_position).norm()); }
  double rate(int level) const { return levels.at(static_cast<size_t>(level - 1)); }
  double value_at_distance(double d) const { return rate(level_at_distance(d)); }
  double value(const Vec2& p) const { return rate(level_at(p)); }
};

struct QuantizerConfig {
  int grid_intervals = 2000;  // Simpson cells on [0, domain_radius]
  int dp_intervals = 400;     // coarse grid for the initial partition
  int sa_iterations = 3000;
  double cooling = 0.997;
  std::uint64_t seed = 0;
};

/// Optimizes the Q-1 radii and Q-2 interior levels minimizing
///   E_Q = int_0^D (f_Q(nu) - E[R](nu))^2 dnu,
/// with the outermost level pinned to 0 and the innermost to max R_j.
/// Throws ParameterError for Q < 2 or a non-positive domain radius.
QuantizedRateMap quantize_expected_rate(const ChannelParams& params,
                                        const RateLadder& ladder, int Q,
                                        double domain_radius,
                                        const QuantizerConfig& cfg = {});

/// Radius of the j-th border (between levels j and j+1), 1 <= j <= Q-1.
double region_radius(const QuantizedRateMap& map, int j);

/// Distance at which the deterministic SNR equals gamma (linear).
double switch_radius(double gamma, const ChannelParams& params);

}  // namespace commtraj
