#pragma once

#include <stdexcept>

#include "uavnet/core/rng.hpp"

namespace uavnet::netsim {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Log-distance path loss with optional Nakagami-m fading.
struct ChannelParams {
  double pl0_db = 40.05;  // at d0
  double d0_m = 1.0;
  double exponent = 3.0;
  double nakagami_m = 0.0;  // 0 disables fading
  double noise_floor_dbm = -94.0;

  /// Throws NetError on out-of-domain values.
  void validate() const;
};

double path_loss_db(double d_m, const ChannelParams& ch);

/// Received power. Distances below d0 clamp to d0. `rng` is only drawn from
/// when fading is enabled.
double rss_dbm(double tx_dbm, double d_m, const ChannelParams& ch, Rng* rng = nullptr);

/// Unit-mean fading power gain G ~ Gamma(m, 1/m).
double fading_gain(double m, Rng& rng);

/// Largest distance at which the deterministic RSS stays at or above
/// `threshold_dbm`.
double range_m(double tx_dbm, double threshold_dbm, const ChannelParams& ch);

}  // namespace uavnet::netsim
