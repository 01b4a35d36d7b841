#include "uavnet/netsim/channel.hpp"

#include <cmath>
#include <random>

namespace uavnet::netsim {

void ChannelParams::validate() const {
  if (!(d0_m > 0.0)) throw NetError("channel.d0_m must be > 0");
  if (!(exponent > 0.0)) throw NetError("channel.exponent must be > 0");
  if (!(nakagami_m == 0.0 || nakagami_m >= 0.5))
    throw NetError("channel.nakagami_m must be 0 or >= 0.5");
  if (!std::isfinite(pl0_db) || !std::isfinite(noise_floor_dbm))
    throw NetError("channel constants must be finite");
}

double path_loss_db(double d_m, const ChannelParams& ch) {
  const double d = std::max(d_m, ch.d0_m);
  return ch.pl0_db + 10.0 * ch.exponent * std::log10(d / ch.d0_m);
}

double fading_gain(double m, Rng& rng) {
  std::gamma_distribution<double> g(m, 1.0 / m);
  return g(rng);
}

double rss_dbm(double tx_dbm, double d_m, const ChannelParams& ch, Rng* rng) {
  double rss = tx_dbm - path_loss_db(d_m, ch);
  if (ch.nakagami_m > 0.0) {
    if (rng == nullptr) throw NetError("fading enabled but no rng supplied");
    rss += 10.0 * std::log10(fading_gain(ch.nakagami_m, *rng));
  }
  return rss;
}

double range_m(double tx_dbm, double threshold_dbm, const ChannelParams& ch) {
  const double budget = tx_dbm - threshold_dbm - ch.pl0_db;
  return ch.d0_m * std::pow(10.0, budget / (10.0 * ch.exponent));
}

}  // namespace uavnet::netsim
