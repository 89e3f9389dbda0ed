#pragma once

#include <span>
#include <vector>

#include "uavgrid/geometry.hpp"
#include "uavgrid/scenario.hpp"

namespace uavgrid::radio {

using scenario::LosGeometry;
using scenario::RadioParams;
using scenario::TrafficModel;
using scenario::Uav;

/// One user-link observation. spectral_eff_bps_hz is always derived from
/// sinr, never stored independently.
struct LinkSample {
  Vec2 user_pos_m;
  int serving_uav = -1;   // transmitter id, -1 when unserved
  double distance_m = 0.0;
  double sinr = 0.0;
  double spectral_eff_bps_hz = 0.0;

  static LinkSample make(Vec2 pos, int serving, double distance, double sinr);
};

/// Thermal noise power in watts for a density in dBm/Hz over a bandwidth.
double noise_power_w(double psd_dbm_hz, double bandwidth_hz);

/// Received SINR at a ground point served by one drone, with every other
/// available drone as an interferer. Throws std::domain_error when the
/// serving distance is zero.
double sinr(Vec2 user_pos, const Uav& serving, std::span<const Uav> fleet,
            const RadioParams& radio);

/// Fraction of the shared channel one user's traffic occupies at a given
/// SINR. Positive SINR required.
double user_load(const RadioParams& radio, const TrafficModel& traffic, double sinr);

/// Per-user throughput under equal time sharing among active users, bit/s.
double effective_throughput(double sinr, int active_users, const RadioParams& radio);

/// True when a ground point falls inside the drone's visibility cone.
bool los_visible(Vec2 user_pos, const Uav& uav, const LosGeometry& los);

struct AreaLoadResult {
  double load = 0.0;            // integrated channel-fraction demand
  double unserved_area_m2 = 0.0;// disc area with no drone in line of sight
};

/// Midpoint-rule integral of the per-point load density over the area's
/// service disc. Each point is attributed to the nearest visible available
/// drone; points no drone can see contribute to unserved_area_m2 instead.
AreaLoadResult area_load(Vec2 area_center, std::span<const Uav> fleet,
                         const RadioParams& radio, const TrafficModel& traffic,
                         const LosGeometry& los, int grid_res);

/// Fraction of samples whose spectral efficiency clears the threshold.
/// Empty input throws std::invalid_argument.
double throughput_coverage(std::span<const LinkSample> samples,
                           double threshold_bps_hz);

}  // namespace uavgrid::radio
