#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uavgrid/geometry.hpp"

namespace uavgrid::scenario {

/// Link-budget constants shared by every transmitter in a run.
struct RadioParams {
  double bandwidth_hz = 20e6;       // shared channel bandwidth
  double tx_power_w = 10.0;         // per-transmitter radiated power
  double geometry_const = 1.5;      // antenna/propagation geometry factor
  double path_loss_exp = 3.0;
  double noise_psd_dbm_hz = -174.0; // thermal noise density
  double channel_gain_db = 10.0;    // backhaul link gain
  double comm_energy_coeff = 0.5;   // backhaul energy proportionality
  int n_links = 3;                  // backhaul links per relay

  void validate() const;
  friend bool operator==(const RadioParams&, const RadioParams&) = default;
};

struct TrafficModel {
  double arrival_rate_req_s = 2.0;  // per-user request rate
  double mean_packet_bits = 1600.0; // mean request payload
  int extra_users = 0;              // uniform surplus load added to each area

  void validate() const;
  friend bool operator==(const TrafficModel&, const TrafficModel&) = default;
};

/// Weights for the combined energy/cost objective. zeta1/zeta2 trade request
/// volume against user count inside the per-area and per-drone brackets;
/// the w_* factors scale the energy terms onto a common magnitude.
struct CostWeights {
  double zeta1 = 1.0;
  double zeta2 = 1.0;
  double w_bs = 1e-4;
  double w_uav = 1e-4;
  double w_travel = 1e-4;
  double w_comm = 1e-3;
  double backend_cost = 1.0;    // fixed per-drone coordination overhead
  double penalty_weight = 10.0; // constraint-violation multiplier in search
  double lstm_weight = 1.0;     // forecast mixing factor in the overall cost

  void validate() const;
  friend bool operator==(const CostWeights&, const CostWeights&) = default;
};

/// Air-to-ground visibility cone. A ground point is in line of sight of a
/// drone when its elevation angle lies in [min_elev, max_elev] and its
/// horizontal offset is at most max_radius_m.
struct LosGeometry {
  double altitude_m = 150.0;
  double min_elev_rad = 0.35;
  double max_elev_rad = 1.40;
  double max_radius_m = 100.0;
  double cell_length_m = 500.0; // spacing of station sites along the strip

  void validate() const;
  friend bool operator==(const LosGeometry&, const LosGeometry&) = default;
};

struct UavEnergyParams {
  double e_per_m = 0.02;       // J per metre flown
  double e_per_s = 1.0;        // J per second hovering/serving
  double e_per_load = 100.0;   // J per load unit carried
  double e_travel_per_m = 0.02;// J per metre, relocation legs
  double charge_time_h = 2.0;  // pad recharge time credited against a sortie

  void validate() const;
  friend bool operator==(const UavEnergyParams&, const UavEnergyParams&) = default;
};

/// Per-station defaults applied when building a world.
struct BsEnergyParams {
  int user_capacity = 300;          // concurrent users a station can carry
  double battery_capacity_j = 7.2e6;
  double energy_per_load = 400.0;   // J per served request
  double charge_time_h = 2.0;
  double charge_power_w = 250.0;    // grid trickle while parked on the pad
  double packet_loss_frac = 0.05;

  void validate() const;
  friend bool operator==(const BsEnergyParams&, const BsEnergyParams&) = default;
};

struct FleetParams {
  int capacity_reqs = 50;          // requests one drone can absorb per hour
  double speed_m_s = 20.0;
  double battery_capacity_j = 1.8e6;

  void validate() const;
  friend bool operator==(const FleetParams&, const FleetParams&) = default;
};

/// Knobs for the built-in trace generators.
struct SynthParams {
  int base_users = 260;        // peak-hour users per area before surplus
  double solar_peak_j = 1.6e5; // clear-sky harvest at solar noon, J per hour
  int grid_res = 32;           // quadrature resolution for area integrals

  void validate() const;
  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

struct ScenarioConfig {
  int n_uavs = 10;
  int n_areas = 5;
  int horizon_hours = 1344; // eight weeks
  std::uint64_t rng_seed = 42;
  RadioParams radio;
  TrafficModel traffic;
  CostWeights weights;
  LosGeometry los;
  UavEnergyParams uav_energy;
  BsEnergyParams bs_defaults;
  FleetParams fleet;
  SynthParams synth;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct BaseStation {
  int id = 0;
  Vec2 position_m;
  int user_capacity = 300;
  int active_users = 0;
  double battery_j = 0.0;
  double battery_capacity_j = 7.2e6;
  double energy_per_load = 400.0;
  double charge_time_h = 2.0;
  double charge_power_w = 250.0;
  double packet_loss_frac = 0.05;
  std::vector<double> solar_trace; // J harvested per trace hour

  double charge_energy_j() const { return charge_power_w * charge_time_h * 3600.0; }
};

struct Uav {
  int id = 0;
  Vec2 position_m;
  double altitude_m = 150.0;
  int capacity_reqs = 50;
  double battery_j = 1.8e6;
  double battery_capacity_j = 1.8e6;
  double speed_m_s = 20.0;
  bool available = true;
  int home_station = 0;
};

/// One area-hour of realized demand.
struct DemandSnapshot {
  int area_id = 0;
  int hour = 0;
  int service_requests = 0; // hourly request volume R_s
  int active_users = 0;
  std::vector<Vec2> user_positions_m;
};

// --- persistence -----------------------------------------------------------

ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const ScenarioConfig& cfg, const std::filesystem::path& path);

/// Reads a harvest trace CSV with header `station,day,hour,energy_j`.
/// Requires a dense year (365 days x 24 hours) for exactly station_count
/// stations; rows may arrive in any order. Duplicate (station,day,hour)
/// rows raise DuplicationError, coverage gaps or a station-count mismatch
/// raise ShapeError, malformed fields raise ParseError with the line number.
std::vector<std::vector<double>> load_solar_trace(const std::filesystem::path& path,
                                                  int station_count);

void write_solar_trace(const std::vector<std::vector<double>>& traces,
                       const std::filesystem::path& path);

// --- synthesis -------------------------------------------------------------

/// Deterministic synthetic harvest trace: zero outside 06:00-18:00, a
/// half-sinusoid bump inside it, day-to-day weather drawn from the seed.
std::vector<double> synth_solar(std::uint64_t seed, int days, double peak_j);

/// Deterministic synthetic demand: diurnal user counts peaking in the
/// evening, uniform user placement inside each area's service disc,
/// request volume correlated with the user count.
std::vector<DemandSnapshot> synth_demand(std::uint64_t seed, int n_areas, int hours,
                                         const SynthParams& synth,
                                         const TrafficModel& traffic,
                                         const LosGeometry& los);

void write_demand_csv(const std::vector<DemandSnapshot>& snaps,
                      const std::filesystem::path& path);

/// Reads the write_demand_csv format (`area,hour,users,requests`). Rows may
/// arrive in any order but must densely cover hours 0..H-1 for every area
/// 0..A-1; the result is hour-major. User positions are not part of the
/// format and come back empty. Duplicates raise DuplicationError, coverage
/// gaps ShapeError, malformed fields ParseError with the line number.
std::vector<DemandSnapshot> load_demand_csv(const std::filesystem::path& path);

// --- world construction ----------------------------------------------------

/// Stations sit on a line at cell_length_m spacing, batteries start full.
std::vector<BaseStation> make_stations(const ScenarioConfig& cfg,
                                       const std::vector<std::vector<double>>& traces);

/// Drones start on their home pads (round-robin over stations) at the
/// configured altitude with full batteries.
std::vector<Uav> make_fleet(const ScenarioConfig& cfg,
                            const std::vector<BaseStation>& stations);

inline Vec2 area_center(const LosGeometry& los, int area_id) {
  return {los.cell_length_m * static_cast<double>(area_id), 0.0};
}

/// Hover position for the slot-th of slots drones serving an area: drones
/// stagger along the strip one service radius apart so they do not sit in
/// each other's strongest interference footprint.
inline Vec2 hover_point(const LosGeometry& los, int area_id, int slot, int slots) {
  Vec2 c = area_center(los, area_id);
  c.x += (static_cast<double>(slot) - (static_cast<double>(slots) - 1.0) / 2.0) *
         los.max_radius_m;
  return c;
}

}  // namespace uavgrid::scenario
