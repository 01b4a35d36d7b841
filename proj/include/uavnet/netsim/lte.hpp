#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "uavnet/core/clock.hpp"
#include "uavnet/core/rng.hpp"

namespace uavnet::netsim {

struct CqiTier {
  double min_sinr_db;
  double efficiency;  // bit/s/Hz
};

/// Grant-wait + serialization + core-delay abstraction of an LTE-FDD cell.
struct LteParams {
  double ul_bw_hz = 20e6;
  double dl_bw_hz = 20e6;
  Nanos tti_ns = kNsPerMs;
  int max_grant_period_ms = 40;
  int max_ues = 40;
  Nanos core_delay_ns = 10 * kNsPerMs;
  std::vector<CqiTier> cqi_table{{-6.0, 0.15}, {0.0, 0.6}, {6.0, 1.4}, {12.0, 2.7}, {18.0, 4.5}};
  double ue_tx_dbm = 23.0;
  double enb_tx_dbm = 23.0;
  double sensitivity_dbm = -100.0;

  void validate() const;
  /// max(1, n_ue) ms capped at the periodicity limit.
  Nanos grant_period_ns(int n_ue) const;
  /// Spectral efficiency of the highest tier the SINR reaches; nullopt
  /// below the lowest tier.
  std::optional<double> efficiency_for(double sinr_db) const;
};

enum class LteDirection { Ul, Dl };

struct LteResult {
  bool delivered = false;
  Nanos grant_wait_ns = 0;
  Nanos serialization_ns = 0;
  Nanos delta_ns = 0;
  const char* reason = "";
};

/// One transfer between a UE and the core. `sinr_db` = RSS − noise floor.
LteResult lte_transfer(std::size_t bytes, LteDirection dir, int n_ue, double rss_dbm,
                       double noise_floor_dbm, const LteParams& p, Rng& rng);

}  // namespace uavnet::netsim
