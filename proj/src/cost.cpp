#include "uavgrid/cost.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "uavgrid/radio.hpp"
#include "uavgrid/rng.hpp"

namespace uavgrid::cost {

EnergyBreakdown EnergyBreakdown::make(double e_bs, double e_uav, double e_travel,
                                      double e_comm, const CostWeights& w) {
  EnergyBreakdown b;
  b.e_bs = e_bs;
  b.e_uav = e_uav;
  b.e_travel = e_travel;
  b.e_comm = e_comm;
  // station savings enter negatively: offloading that spares the station
  // battery reduces the area-side total
  b.e_total_area = -w.w_bs * e_bs + w.w_travel * e_travel + w.w_comm * e_comm;
  b.e_total_uav = w.w_uav * e_uav + w.w_travel * e_travel + w.w_comm * e_comm;
  return b;
}

int n_req(int deficit_reqs, int uav_capacity) {
  if (uav_capacity <= 0) throw std::domain_error("uav_capacity must be positive");
  if (deficit_reqs < 0) throw std::domain_error("deficit must be nonnegative");
  return (deficit_reqs + uav_capacity - 1) / uav_capacity;
}

double log_poisson_pmf(int k, double mean) {
  if (k < 0 || mean < 0.0) throw std::domain_error("poisson needs k, mean >= 0");
  if (mean == 0.0)
    return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return k * std::log(mean) - mean - std::lgamma(static_cast<double>(k) + 1.0);
}

double poisson_pmf(int k, double mean) { return std::exp(log_poisson_pmf(k, mean)); }

double phi_area(const DemandSnapshot& area, const BaseStation& bs) {
  if (bs.user_capacity <= 0) throw std::domain_error("station capacity must be positive");
  const double mean_util =
      static_cast<double>(area.active_users) / static_cast<double>(bs.user_capacity);
  return poisson_pmf(area.service_requests, mean_util);
}

double phi_uav(double area_load, int fleet_size, int uav_capacity) {
  if (fleet_size <= 0) throw std::domain_error("fleet_size must be positive");
  if (area_load < 0.0) throw std::domain_error("area_load must be nonnegative");
  const double mean_share = area_load / static_cast<double>(fleet_size);
  return poisson_pmf(uav_capacity, mean_share);
}

DensityCheck density_constraint(std::span<const double> shares,
                                std::span<const std::uint8_t> drops) {
  if (shares.empty() || shares.size() != drops.size())
    throw std::invalid_argument("shares and drops must have equal nonzero length");
  double acc = 0.0;
  double mean_share = 0.0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double diff = shares[i] - static_cast<double>(drops[i]);
    acc += diff * diff;
    mean_share += shares[i];
  }
  DensityCheck c;
  c.lhs = std::sqrt(acc / static_cast<double>(shares.size()));
  c.rhs = mean_share / static_cast<double>(shares.size());
  c.ok = c.lhs <= c.rhs;
  return c;
}

DensityCheck density_constraint(const DemandSnapshot& area, const BaseStation& bs,
                                std::uint64_t seed) {
  if (area.service_requests <= 0) {
    // nothing offered, trivially satisfied
    return {true, 0.0, 0.0};
  }
  const double share =
      static_cast<double>(area.active_users) / static_cast<double>(bs.user_capacity);
  std::vector<double> shares(static_cast<std::size_t>(area.service_requests), share);
  std::vector<std::uint8_t> drops(shares.size());
  Rng rng(derive_seed(seed, "density.drops",
                      (static_cast<std::uint64_t>(area.area_id) << 32) ^
                          static_cast<std::uint64_t>(area.hour)));
  for (auto& d : drops) d = rng.bernoulli(bs.packet_loss_frac) ? 1 : 0;
  return density_constraint(shares, drops);
}

double energy_bs_terms(double e_per_load, double l_a, double e_gen,
                       double t_charge_j) {
  return e_per_load * (l_a + e_gen - t_charge_j);
}

double energy_bs(const BaseStation& bs, double offloaded_j, int hour) {
  const double e_gen =
      bs.solar_trace.empty()
          ? 0.0
          : bs.solar_trace[static_cast<std::size_t>(hour) % bs.solar_trace.size()];
  return energy_bs_terms(bs.energy_per_load, offloaded_j, e_gen, bs.charge_energy_j());
}

double energy_uav(const UavEnergyParams& p, double travel_dist_m,
                  double service_time_s, double load_units) {
  if (travel_dist_m < 0.0 || service_time_s < 0.0 || load_units < 0.0)
    throw std::domain_error("sortie terms must be nonnegative");
  return p.e_per_m * travel_dist_m + p.e_per_s * service_time_s +
         p.e_per_load * load_units - p.e_per_s * p.charge_time_h * 3600.0;
}

double energy_travel(const UavEnergyParams& p, double dist_m, double mobility_s) {
  if (dist_m < 0.0 || mobility_s < 0.0)
    throw std::domain_error("travel terms must be nonnegative");
  return p.e_travel_per_m * dist_m * mobility_s;
}

double energy_comm(const RadioParams& radio) {
  const double gain = std::pow(10.0, radio.channel_gain_db / 10.0);
  const double noise = radio::noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz);
  const double per_link =
      radio.tx_power_w * std::log2(1.0 + gain * radio.tx_power_w / noise);
  return radio.comm_energy_coeff * radio.n_links * per_link;
}

double cost_area(const DemandSnapshot& area, const BaseStation& bs,
                 double area_load, const EnergyBreakdown& e,
                 const CostWeights& w, bool available) {
  if (!available) return 0.0;
  const double bracket = w.zeta1 * area.service_requests +
                         w.zeta2 * bs.user_capacity + e.e_total_area;
  return phi_area(area, bs) * area_load * bracket;
}

double cost_uav(const DemandSnapshot& area, const Uav& uav, double distance_m,
                double phi_u, const EnergyBreakdown& e, const CostWeights& w,
                double path_loss_exp, bool available) {
  if (distance_m < 0.0) throw std::domain_error("distance must be nonnegative");
  if (!available) return 0.0;
  (void)uav;
  const double bracket = w.zeta1 * area.service_requests +
                         w.zeta2 * area.active_users + e.e_total_uav;
  return phi_u * std::pow(distance_m, path_loss_exp) * bracket;
}

double cost_overall(std::span<const double> uav_costs,
                    std::span<const double> area_costs,
                    std::span<const double> p_lstm, const CostWeights& w,
                    int fleet_in_area) {
  if (uav_costs.empty() || area_costs.empty())
    throw std::invalid_argument("cost lists must be nonempty");
  if (p_lstm.size() != area_costs.size())
    throw std::invalid_argument("one prediction per area required");
  if (fleet_in_area < 1) throw std::domain_error("fleet_in_area must be >= 1");

  double drone_term = 0.0;
  for (double c : uav_costs) drone_term += c + w.backend_cost;
  drone_term /= static_cast<double>(uav_costs.size());

  double area_term = 0.0;
  for (std::size_t j = 0; j < area_costs.size(); ++j)
    area_term += area_costs[j] + p_lstm[j];
  area_term /= static_cast<double>(fleet_in_area);

  return drone_term + area_term;
}

}  // namespace uavgrid::cost
