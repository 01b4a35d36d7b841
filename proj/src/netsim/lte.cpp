#include "uavnet/netsim/lte.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "uavnet/netsim/channel.hpp"

namespace uavnet::netsim {

void LteParams::validate() const {
  if (!(ul_bw_hz > 0.0) || !(dl_bw_hz > 0.0)) throw NetError("lte bandwidth must be > 0");
  if (max_grant_period_ms < 1) throw NetError("lte.max_grant_period_ms must be >= 1");
  if (core_delay_ns < 0) throw NetError("lte.core_delay must be >= 0");
  if (cqi_table.empty()) throw NetError("lte.cqi_table must not be empty");
  for (std::size_t i = 1; i < cqi_table.size(); ++i) {
    if (!(cqi_table[i].min_sinr_db > cqi_table[i - 1].min_sinr_db))
      throw NetError("lte.cqi_table thresholds must be strictly increasing");
    if (!(cqi_table[i].efficiency > cqi_table[i - 1].efficiency))
      throw NetError("lte.cqi_table efficiencies must be strictly increasing");
  }
}

Nanos LteParams::grant_period_ns(int n_ue) const {
  return static_cast<Nanos>(std::clamp(n_ue, 1, max_grant_period_ms)) * kNsPerMs;
}

std::optional<double> LteParams::efficiency_for(double sinr_db) const {
  std::optional<double> eff;
  for (const auto& t : cqi_table)
    if (sinr_db >= t.min_sinr_db) eff = t.efficiency;
  return eff;
}

LteResult lte_transfer(std::size_t bytes, LteDirection dir, int n_ue, double rss_dbm,
                       double noise_floor_dbm, const LteParams& p, Rng& rng) {
  LteResult r;
  if (n_ue > p.max_ues) throw NetError("lte cell exceeds periodicity cap " + std::to_string(p.max_ues));
  const auto eff = p.efficiency_for(rss_dbm - noise_floor_dbm);
  if (rss_dbm < p.sensitivity_dbm || !eff) {
    r.reason = "no-attach";
    return r;
  }
  const double bw = (dir == LteDirection::Ul ? p.ul_bw_hz : p.dl_bw_hz) / std::max(1, n_ue);
  std::uniform_int_distribution<Nanos> grant(0, p.grant_period_ns(n_ue));
  r.grant_wait_ns = grant(rng);
  r.serialization_ns =
      static_cast<Nanos>(std::llround(static_cast<double>(bytes) * 8.0 / (*eff * bw) * 1e9));
  r.delta_ns = r.grant_wait_ns + r.serialization_ns + p.core_delay_ns;
  r.delivered = true;
  return r;
}

}  // namespace uavnet::netsim
