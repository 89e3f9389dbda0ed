#include "uavgrid/radio.hpp"

#include <cmath>
#include <stdexcept>

namespace uavgrid::radio {

LinkSample LinkSample::make(Vec2 pos, int serving, double distance, double sinr_v) {
  if (sinr_v < 0.0) throw std::domain_error("sinr must be nonnegative");
  LinkSample s;
  s.user_pos_m = pos;
  s.serving_uav = serving;
  s.distance_m = distance;
  s.sinr = sinr_v;
  s.spectral_eff_bps_hz = std::log2(1.0 + sinr_v);
  return s;
}

double noise_power_w(double psd_dbm_hz, double bandwidth_hz) {
  if (!(bandwidth_hz > 0.0)) throw std::domain_error("bandwidth must be positive");
  const double total_dbm = psd_dbm_hz + 10.0 * std::log10(bandwidth_hz);
  return std::pow(10.0, (total_dbm - 30.0) / 10.0);
}

namespace {

inline double rx_power(double tx_w, double geom, double dist_m, double beta) {
  return tx_w * geom / std::pow(dist_m, beta);
}

}  // namespace

double sinr(Vec2 user_pos, const Uav& serving, std::span<const Uav> fleet,
            const RadioParams& radio) {
  const double d = dist3d(user_pos, serving.position_m, serving.altitude_m);
  if (!(d > 0.0)) throw std::domain_error("serving distance is zero");
  const double signal =
      rx_power(radio.tx_power_w, radio.geometry_const, d, radio.path_loss_exp);
  double interference = 0.0;
  for (const Uav& u : fleet) {
    if (u.id == serving.id || !u.available) continue;
    const double di = dist3d(user_pos, u.position_m, u.altitude_m);
    if (!(di > 0.0)) throw std::domain_error("interferer distance is zero");
    interference +=
        rx_power(radio.tx_power_w, radio.geometry_const, di, radio.path_loss_exp);
  }
  const double noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz);
  return signal / (interference + noise);
}

double user_load(const RadioParams& radio, const TrafficModel& traffic,
                 double sinr_v) {
  if (!(sinr_v > 0.0)) throw std::domain_error("sinr must be positive");
  const double rate = radio.bandwidth_hz * std::log2(1.0 + sinr_v);
  return traffic.arrival_rate_req_s * traffic.mean_packet_bits / rate;
}

double effective_throughput(double sinr_v, int active_users,
                            const RadioParams& radio) {
  if (active_users <= 0) throw std::domain_error("active_users must be positive");
  if (sinr_v < 0.0) throw std::domain_error("sinr must be nonnegative");
  return radio.bandwidth_hz * std::log2(1.0 + sinr_v) /
         static_cast<double>(active_users);
}

bool los_visible(Vec2 user_pos, const Uav& uav, const LosGeometry& los) {
  const double horiz = dist2d(user_pos, uav.position_m);
  if (horiz > los.max_radius_m) return false;
  const double elev = std::atan2(uav.altitude_m, horiz);
  return elev >= los.min_elev_rad && elev <= los.max_elev_rad;
}

AreaLoadResult area_load(Vec2 area_center, std::span<const Uav> fleet,
                         const RadioParams& radio, const TrafficModel& traffic,
                         const LosGeometry& los, int grid_res) {
  if (grid_res < 2) throw std::invalid_argument("grid_res must be at least 2");
  const double R = los.max_radius_m;
  const double cell = 2.0 * R / grid_res;
  const double cell_area = cell * cell;

  AreaLoadResult out;
  for (int iy = 0; iy < grid_res; ++iy) {
    for (int ix = 0; ix < grid_res; ++ix) {
      // midpoint of the grid cell
      const Vec2 p{area_center.x - R + (ix + 0.5) * cell,
                   area_center.y - R + (iy + 0.5) * cell};
      if (dist2d(p, area_center) > R) continue;  // outside the service disc

      // nearest visible available drone serves the point
      const Uav* best = nullptr;
      double best_d = 0.0;
      for (const Uav& u : fleet) {
        if (!u.available) continue;
        if (!los_visible(p, u, los)) continue;
        const double d = dist3d(p, u.position_m, u.altitude_m);
        if (!best || d < best_d) {
          best = &u;
          best_d = d;
        }
      }
      if (!best) {
        out.unserved_area_m2 += cell_area;
        continue;
      }
      const double s = sinr(p, *best, fleet, radio);
      if (s > 0.0) out.load += user_load(radio, traffic, s) * cell_area;
    }
  }
  return out;
}

double throughput_coverage(std::span<const LinkSample> samples,
                           double threshold_bps_hz) {
  if (samples.empty()) throw std::invalid_argument("no link samples");
  if (threshold_bps_hz < 0.0)
    throw std::invalid_argument("threshold must be nonnegative");
  std::size_t covered = 0;
  for (const LinkSample& s : samples)
    if (s.spectral_eff_bps_hz >= threshold_bps_hz) ++covered;
  return static_cast<double>(covered) / static_cast<double>(samples.size());
}

}  // namespace uavgrid::radio
