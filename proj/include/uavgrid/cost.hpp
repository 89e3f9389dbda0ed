#pragma once

#include <cstdint>
#include <span>

#include "uavgrid/scenario.hpp"

namespace uavgrid::cost {

using scenario::BaseStation;
using scenario::CostWeights;
using scenario::DemandSnapshot;
using scenario::RadioParams;
using scenario::Uav;
using scenario::UavEnergyParams;

/// Energy terms for one area/drone pairing in one hour, plus the two
/// weighted aggregates built from them. Kept together so a single audit
/// can recompute the aggregates from the raw terms.
struct EnergyBreakdown {
  double e_bs = 0.0;
  double e_uav = 0.0;
  double e_travel = 0.0;
  double e_comm = 0.0;
  double e_total_area = 0.0; // -w_bs*e_bs + w_travel*e_travel + w_comm*e_comm
  double e_total_uav = 0.0;  //  w_uav*e_uav + w_travel*e_travel + w_comm*e_comm

  static EnergyBreakdown make(double e_bs, double e_uav, double e_travel,
                              double e_comm, const CostWeights& w);
};

/// Drones needed to absorb a request deficit at a given per-drone capacity.
/// Zero deficit needs zero drones; capacity must be positive.
int n_req(int deficit_reqs, int uav_capacity);

/// log of the Poisson pmf at integer k >= 0. mean == 0 gives 0 at k == 0
/// and -inf otherwise; negative mean or k throws std::domain_error.
double log_poisson_pmf(int k, double mean);
double poisson_pmf(int k, double mean);

/// Demand-side density factor: Poisson pmf of the hourly request volume at
/// the station's mean per-user utilisation. Evaluated in log space and
/// exponentiated, so extreme operating points underflow to 0 rather than NaN.
double phi_area(const DemandSnapshot& area, const BaseStation& bs);

/// Fleet-side density factor: Poisson pmf of one drone's request capacity
/// at the mean per-drone share of the area load.
double phi_uav(double area_load, int fleet_size, int uav_capacity);

struct DensityCheck {
  bool ok = false;
  double lhs = 0.0; // rms utilisation/drop residual
  double rhs = 0.0; // mean per-user utilisation share
};

/// Root-mean-square residual between per-request utilisation shares and
/// drop indicators, tested against the mean share. shares and drops must
/// have equal nonzero length; drops entries are 0/1.
DensityCheck density_constraint(std::span<const double> shares,
                                std::span<const std::uint8_t> drops);

/// Convenience form: shares are the station's uniform utilisation share
/// u_a/capacity replicated per request; drop indicators are Bernoulli draws
/// from a stream derived from (seed, area, hour).
DensityCheck density_constraint(const DemandSnapshot& area, const BaseStation& bs,
                                std::uint64_t seed);

/// Station energy bracket: e_per_load * (l_a + e_gen - t_charge_j), every
/// operand in joule-equivalents. The leading factor weights the bracket by
/// the station's per-load energy price; callers wanting raw joules pass 1.
double energy_bs_terms(double e_per_load, double l_a, double e_gen, double t_charge_j);

/// Wrapper applying the station's charging convention at a trace hour.
/// offloaded_j is the load handed to the fleet this hour, in joules.
double energy_bs(const BaseStation& bs, double offloaded_j, int hour);

/// Drone sortie energy: travel + service time + carried load, less the
/// recharge credit earned back on the pad. load_units is in request
/// units; the per-load price is applied inside.
double energy_uav(const UavEnergyParams& p, double travel_dist_m,
                  double service_time_s, double load_units);

/// Relocation energy for a leg flown at mobility duty.
double energy_travel(const UavEnergyParams& p, double dist_m, double mobility_s);

/// Hourly backhaul relay energy across the configured links.
double energy_comm(const RadioParams& radio);

/// Per-area hourly cost. available is the assignment bit of the candidate
/// drone; area_load is the integrated channel demand for the hour.
double cost_area(const DemandSnapshot& area, const BaseStation& bs,
                 double area_load, const EnergyBreakdown& e,
                 const CostWeights& w, bool available);

/// Per-drone hourly cost for serving an area from distance_m away.
/// phi_u is the fleet-side density factor for the area.
double cost_uav(const DemandSnapshot& area, const Uav& uav, double distance_m,
                double phi_u, const EnergyBreakdown& e, const CostWeights& w,
                double path_loss_exp, bool available);

/// Network objective: mean drone cost (plus backend overhead) and the
/// forecast-adjusted area sum normalized by the deployed-fleet size.
/// p_lstm holds one scaled prediction per area; fleet_in_area >= 1.
double cost_overall(std::span<const double> uav_costs,
                    std::span<const double> area_costs,
                    std::span<const double> p_lstm, const CostWeights& w,
                    int fleet_in_area);

}  // namespace uavgrid::cost
