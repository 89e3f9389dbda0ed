#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uavgrid/forecaster.hpp"
#include "uavgrid/scenario.hpp"

namespace uavgrid::sim {

using scenario::BaseStation;
using scenario::DemandSnapshot;
using scenario::ScenarioConfig;
using scenario::Uav;

enum class UavState { idle, traveling, serving, returning, charging };

const char* to_string(UavState s);

struct UavRuntime {
  Uav unit;
  UavState state = UavState::idle;
  int target_area = -1;   // meaningful while traveling/serving
  int arrival_hour = -1;  // while traveling
  double hover_offset_m = 0.0; // lateral stagger of the service point
};

struct OutageEvent {
  int station = 0;
  int hour = 0;
};

/// One station-hour of the energy/service ledger. battery_after is defined
/// to equal clamp(battery_before + harvested_j - e_per_load*served_bs,
/// 0, capacity) exactly, with no other writes to the battery in between.
struct HourLedger {
  int hour = 0;
  int station = 0;
  double battery_before_j = 0.0;
  double harvested_j = 0.0;
  int offered_reqs = 0;
  int active_users = 0;
  int served_bs = 0;
  int served_uav = 0;
  int unserved = 0;
  double battery_after_j = 0.0;
  bool outage = false;
};

struct WorldState {
  int hour = 0;
  std::vector<BaseStation> stations;
  std::vector<UavRuntime> fleet;
  std::vector<OutageEvent> outages;
  std::vector<HourLedger> ledger;
};

/// Directive to send one idle drone to one area this hour.
struct Dispatch {
  int uav = 0;
  int area = 0;
};

struct AreaDeficit {
  int area = 0;
  int unserved_reqs = 0;     // realized this hour after BS service
  double predicted_gap_j = 0.0; // forecast shortfall for the next hour
  int service_requests = 0;  // the hour's offered volume, for pair pricing
  int active_users = 0;
};

/// Policy sees the world after BS service and decides which idle drones to
/// launch. Must only reference drones flagged dispatchable in the deficit
/// report's companion list.
using DispatchPolicy =
    std::function<std::vector<Dispatch>(const WorldState&, std::span<const AreaDeficit>,
                                        const ScenarioConfig&)>;

/// Cost-greedy policy: drones per area from the unserved request count,
/// pair prices from the drone-area cost model.
DispatchPolicy greedy_policy();

/// Never launches; baseline.
DispatchPolicy null_policy();

struct HourCoverage {
  int hour = 0;
  double coverage = 0.0; // fraction of users above the share threshold
};

struct MetricsReport {
  std::vector<double> outage_pct_per_week;    // % of station-hours in outage
  std::vector<HourCoverage> coverage_per_hour;
  double mean_coverage = 0.0;
  int outage_hours = 0;
  double mean_hours_between_outages = 0.0;    // station-hours / (outages + 1)
  double served_reqs = 0.0;
  double offered_reqs = 0.0;
};

struct SimOptions {
  double coverage_threshold_bps_hz = 0.045;
  int coverage_stride_hours = 8;       // link coverage every Nth hour; <= 0 disables
  const forecast::LstmModel* model = nullptr; // optional dispatch forecaster
  int forecast_window_hours = 24;      // lookback handed to the model
  std::function<void(const WorldState&, const HourLedger&)> on_ledger = {};
};

struct SimResult {
  MetricsReport metrics;
  WorldState world; // final state, full ledger and outage log inside
};

/// Build a world from config (synthetic traces unless solar traces are
/// supplied), then step it through the horizon.
WorldState make_world(const ScenarioConfig& cfg,
                      const std::vector<std::vector<double>>* solar = nullptr);

/// Advance one hour: harvest, BS service, deficit detection, dispatch,
/// fleet service, recharge, outage accounting. snaps holds this hour's
/// demand for every area, ordered by area id.
void step(WorldState& world, std::span<const DemandSnapshot> snaps,
          const DispatchPolicy& policy, const ScenarioConfig& cfg,
          const SimOptions& opts);

SimResult run_sim(const ScenarioConfig& cfg, const DispatchPolicy& policy,
                  const SimOptions& opts = {},
                  const std::vector<std::vector<double>>* solar = nullptr,
                  const std::vector<DemandSnapshot>* demand = nullptr);

// --- sweeps ----------------------------------------------------------------

struct CoveragePoint {
  std::string config;  // "no-uav" or the altitude label
  int extra_users = 0;
  double coverage = 0.0;
};

/// Link-level coverage versus surplus users for a no-fleet baseline and one
/// curve per altitude. Users are nested across sweep points so each curve
/// is monotone apart from integer effects.
std::vector<CoveragePoint> sweep_extra_users(const ScenarioConfig& cfg,
                                             std::span<const int> extra_counts,
                                             std::span<const double> altitudes,
                                             const SimOptions& opts = {});

struct FleetPoint {
  int fleet_size = 0;
  int outage_hours = 0;
  double mean_hours_between_outages = 0.0;
};

std::vector<FleetPoint> sweep_fleet(const ScenarioConfig& cfg,
                                    std::span<const int> sizes,
                                    const SimOptions& opts = {});

struct DensityPoint {
  double density_factor = 0.0;
  double coverage_fleet = 0.0;   // fraction of area-hours fully served
  double coverage_baseline = 0.0;
};

std::vector<DensityPoint> sweep_density(const ScenarioConfig& cfg,
                                        std::span<const double> factors,
                                        const SimOptions& opts = {});

// --- outputs ---------------------------------------------------------------

void write_outage_csv(const MetricsReport& m, const std::filesystem::path& path);
void write_coverage_csv(std::span<const CoveragePoint> pts,
                        const std::filesystem::path& path);
void write_fleet_csv(std::span<const FleetPoint> pts,
                     const std::filesystem::path& path);
void write_density_csv(std::span<const DensityPoint> pts,
                       const std::filesystem::path& path);
void write_summary_json(const MetricsReport& m, const ScenarioConfig& cfg,
                        const std::filesystem::path& path);
void write_trace_ndjson(const WorldState& world, const std::filesystem::path& path);

}  // namespace uavgrid::sim
