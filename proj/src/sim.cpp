#include "uavgrid/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "uavgrid/cost.hpp"
#include "uavgrid/csv.hpp"
#include "uavgrid/errors.hpp"
#include "uavgrid/evolution.hpp"
#include "uavgrid/radio.hpp"
#include "uavgrid/rng.hpp"

namespace uavgrid::sim {

namespace {

constexpr double kHourSeconds = 3600.0;
constexpr int kWeekHours = 168;

// Lateral hover offsets 0, +R, -R, +2R, ... keep co-area drones a service
// radius apart so their interference footprints stay separated.
double stagger_offset(const scenario::LosGeometry& los, int slot) {
  const double step = static_cast<double>((slot + 1) / 2) * los.max_radius_m;
  return slot % 2 == 1 ? step : -step;
}

// Station downlink runs on the licensed carrier: noise-limited, no fleet
// interference.
double station_sinr(Vec2 user, Vec2 bs_pos, const scenario::RadioParams& radio) {
  const double d = std::max(1.0, dist2d(user, bs_pos));
  const double signal =
      radio.tx_power_w * radio.geometry_const / std::pow(d, radio.path_loss_exp);
  return signal / radio::noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz);
}

// Admission sweep: each user asks its station first, then visible drones by
// distance. A transmitter admits while every admitted user's equal-time
// share would stay above the threshold, so the slowest member's rate caps
// the head count (stations also respect their concurrent-user cap). The
// final per-user throughput divides the link rate by the transmitter's
// closing head count.
std::vector<radio::LinkSample> admit_links(std::span<const DemandSnapshot> snaps,
                                           std::span<const BaseStation> stations,
                                           std::span<const scenario::Uav> deployed,
                                           const ScenarioConfig& cfg,
                                           double threshold) {
  struct Pending {
    Vec2 pos;
    int tx = -1;  // < 0 unattached, station j encoded as -(j+2), drone by id
    double se = 0.0;
    double dist = 0.0;
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Pending> users;
  std::vector<int> bs_heads(stations.size(), 0);
  std::vector<double> bs_min(stations.size(), kInf);
  std::vector<int> uav_heads;
  int max_uav_id = -1;
  for (const auto& u : deployed) max_uav_id = std::max(max_uav_id, u.id);
  uav_heads.assign(static_cast<std::size_t>(max_uav_id + 1), 0);
  std::vector<double> uav_min(uav_heads.size(), kInf);

  for (const auto& snap : snaps) {
    const std::size_t j = static_cast<std::size_t>(snap.area_id);
    if (j >= stations.size()) throw ShapeError("snapshot area out of range");
    for (const Vec2& pos : snap.user_positions_m) {
      Pending p;
      p.pos = pos;

      const double se_bs = std::log2(1.0 + station_sinr(pos, stations[j].position_m,
                                                        cfg.radio));
      const double floor_bs = std::min(se_bs, bs_min[j]);
      if (bs_heads[j] + 1 <= stations[j].user_capacity &&
          floor_bs >= (bs_heads[j] + 1) * threshold) {
        ++bs_heads[j];
        bs_min[j] = floor_bs;
        p.tx = -(snap.area_id + 2);
        p.se = se_bs;
        p.dist = dist2d(pos, stations[j].position_m);
        users.push_back(p);
        continue;
      }

      // visible drones, nearest first
      std::vector<std::size_t> cand;
      for (std::size_t k = 0; k < deployed.size(); ++k)
        if (radio::los_visible(pos, deployed[k], cfg.los)) cand.push_back(k);
      std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
        return dist3d(pos, deployed[a].position_m, deployed[a].altitude_m) <
               dist3d(pos, deployed[b].position_m, deployed[b].altitude_m);
      });
      for (std::size_t k : cand) {
        const std::size_t id = static_cast<std::size_t>(deployed[k].id);
        const double se_u =
            std::log2(1.0 + radio::sinr(pos, deployed[k], deployed, cfg.radio));
        const double floor_u = std::min(se_u, uav_min[id]);
        if (floor_u >= (uav_heads[id] + 1) * threshold) {
          ++uav_heads[id];
          uav_min[id] = floor_u;
          p.tx = deployed[k].id;
          p.se = se_u;
          p.dist = dist3d(pos, deployed[k].position_m, deployed[k].altitude_m);
          break;
        }
      }
      users.push_back(p);
    }
  }

  std::vector<radio::LinkSample> out;
  out.reserve(users.size());
  for (const auto& p : users) {
    if (p.tx == -1) {
      out.push_back(radio::LinkSample::make(p.pos, -1, 0.0, 0.0));
      continue;
    }
    const int heads = p.tx <= -2
                          ? bs_heads[static_cast<std::size_t>(-p.tx - 2)]
                          : uav_heads[static_cast<std::size_t>(p.tx)];
    const double eff_sinr = std::exp2(p.se / std::max(1, heads)) - 1.0;
    out.push_back(radio::LinkSample::make(p.pos, p.tx, p.dist, eff_sinr));
  }
  return out;
}

double admission_coverage(std::span<const DemandSnapshot> snaps,
                          std::span<const BaseStation> stations,
                          std::span<const scenario::Uav> deployed,
                          const ScenarioConfig& cfg, double threshold) {
  const auto samples = admit_links(snaps, stations, deployed, cfg, threshold);
  if (samples.empty()) return 1.0;
  return radio::throughput_coverage(samples, threshold);
}

// Next-hour expenditure forecast minus the energy the station is known to
// have on hand; positive values flag a brewing shortfall.
double predicted_gap(const WorldState& world, int station, double battery_after,
                     std::span<const DemandSnapshot> snaps,
                     const ScenarioConfig& cfg, const SimOptions& opts) {
  const int w = opts.forecast_window_hours;
  if (w < 1 || world.hour < w - 1) return 0.0;
  const int n = static_cast<int>(world.stations.size());
  const auto& bs = world.stations[static_cast<std::size_t>(station)];
  const double cap = static_cast<double>(bs.user_capacity);

  forecast::StationSeries s;
  s.station = station;
  constexpr double kTau = 2.0 * std::numbers::pi;
  for (int t = world.hour - w + 1; t <= world.hour; ++t) {
    int offered, active;
    if (t == world.hour) {
      offered = snaps[static_cast<std::size_t>(station)].service_requests;
      active = snaps[static_cast<std::size_t>(station)].active_users;
    } else {
      const auto& row =
          world.ledger[static_cast<std::size_t>(t) * n + static_cast<std::size_t>(station)];
      offered = row.offered_reqs;
      active = row.active_users;
    }
    const double hod = static_cast<double>(t % 24);
    s.features.push_back({static_cast<double>(active) / cap,
                          bs.energy_per_load * std::min(offered, bs.user_capacity),
                          std::sin(kTau * hod / 24.0), std::cos(kTau * hod / 24.0)});
    s.target.push_back(0.0);
  }
  const double pred = forecast::predict_next(*opts.model, s, w);
  const auto& tr = bs.solar_trace;
  const double next_harvest =
      tr.empty() ? 0.0
                 : tr[static_cast<std::size_t>(world.hour + 1) % tr.size()];
  (void)cfg;
  return std::max(0.0, pred - next_harvest - battery_after);
}

}  // namespace

const char* to_string(UavState s) {
  switch (s) {
    case UavState::idle: return "idle";
    case UavState::traveling: return "traveling";
    case UavState::serving: return "serving";
    case UavState::returning: return "returning";
    case UavState::charging: return "charging";
  }
  return "unknown";
}

WorldState make_world(const ScenarioConfig& cfg,
                      const std::vector<std::vector<double>>* solar) {
  cfg.validate();
  std::vector<std::vector<double>> traces;
  if (solar) {
    traces = *solar;
  } else {
    const int days = std::max(1, (cfg.horizon_hours + 23) / 24);
    traces.reserve(static_cast<std::size_t>(cfg.n_areas));
    for (int i = 0; i < cfg.n_areas; ++i)
      traces.push_back(scenario::synth_solar(
          derive_seed(cfg.rng_seed, "solar", static_cast<std::uint64_t>(i)), days,
          cfg.synth.solar_peak_j));
  }
  WorldState w;
  w.stations = scenario::make_stations(cfg, traces);
  for (const auto& u : scenario::make_fleet(cfg, w.stations)) {
    UavRuntime r;
    r.unit = u;
    w.fleet.push_back(r);
  }
  return w;
}

void step(WorldState& world, std::span<const DemandSnapshot> snaps,
          const DispatchPolicy& policy, const ScenarioConfig& cfg,
          const SimOptions& opts) {
  const int n = static_cast<int>(world.stations.size());
  if (static_cast<int>(snaps.size()) != n)
    throw ShapeError("one demand snapshot per station required");
  const int hour = world.hour;

  // harvest arrives with the hour; the battery write happens once, below
  std::vector<double> harvested(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const auto& tr = world.stations[static_cast<std::size_t>(j)].solar_trace;
    if (!tr.empty())
      harvested[static_cast<std::size_t>(j)] =
          tr[static_cast<std::size_t>(hour) % tr.size()];
  }

  // station service, bounded by capacity and by what the energy pool funds
  std::vector<int> served_bs(static_cast<std::size_t>(n), 0);
  std::vector<double> after(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    auto& bs = world.stations[static_cast<std::size_t>(j)];
    const auto& snap = snaps[static_cast<std::size_t>(j)];
    if (snap.area_id != j)
      throw ShapeError("snapshots must arrive in area order");
    const int offered = snap.service_requests;
    const double pool = bs.battery_j + harvested[static_cast<std::size_t>(j)];
    const int fundable =
        bs.energy_per_load > 0.0
            ? static_cast<int>(
                  std::min(static_cast<double>(offered),
                           std::floor(pool / bs.energy_per_load)))
            : offered;
    served_bs[static_cast<std::size_t>(j)] =
        std::min({offered, bs.user_capacity, std::max(0, fundable)});
    // the ledger identity, verbatim; nothing else touches the battery
    after[static_cast<std::size_t>(j)] = std::clamp(
        bs.battery_j + harvested[static_cast<std::size_t>(j)] -
            bs.energy_per_load * served_bs[static_cast<std::size_t>(j)],
        0.0, bs.battery_capacity_j);
    bs.active_users = snap.active_users;
  }

  // deficit report for the dispatcher
  std::vector<AreaDeficit> deficits;
  for (int j = 0; j < n; ++j) {
    AreaDeficit d;
    d.area = j;
    d.unserved_reqs = snaps[static_cast<std::size_t>(j)].service_requests -
                      served_bs[static_cast<std::size_t>(j)];
    d.service_requests = snaps[static_cast<std::size_t>(j)].service_requests;
    d.active_users = snaps[static_cast<std::size_t>(j)].active_users;
    if (opts.model)
      d.predicted_gap_j = predicted_gap(world, j, after[static_cast<std::size_t>(j)],
                                        snaps, cfg, opts);
    if (d.unserved_reqs > 0 || d.predicted_gap_j > 0.0) deficits.push_back(d);
  }

  // launch
  if (!deficits.empty() && policy) {
    const auto dispatches = policy(world, deficits, cfg);
    std::vector<int> slots(static_cast<std::size_t>(n), 0);
    for (const auto& r : world.fleet)
      if ((r.state == UavState::traveling || r.state == UavState::serving) &&
          r.target_area >= 0 && r.target_area < n)
        ++slots[static_cast<std::size_t>(r.target_area)];
    for (const auto& d : dispatches) {
      if (d.uav < 0 || d.uav >= static_cast<int>(world.fleet.size()))
        throw std::invalid_argument("dispatch names an unknown drone");
      if (d.area < 0 || d.area >= n)
        throw std::invalid_argument("dispatch names an unknown area");
      auto& r = world.fleet[static_cast<std::size_t>(d.uav)];
      if (r.state != UavState::idle || !r.unit.available)
        throw std::invalid_argument("dispatch names a busy drone");
      const double offset =
          stagger_offset(cfg.los, slots[static_cast<std::size_t>(d.area)]);
      Vec2 target = scenario::area_center(cfg.los, d.area);
      target.x += offset;
      const double dist = dist2d(r.unit.position_m, target);
      const double travel_s =
          r.unit.speed_m_s > 0.0 ? dist / r.unit.speed_m_s : 0.0;
      r.unit.battery_j =
          std::max(0.0, r.unit.battery_j - cfg.uav_energy.e_per_m * dist);
      r.state = UavState::traveling;
      r.target_area = d.area;
      r.hover_offset_m = offset;
      r.arrival_hour = hour + static_cast<int>(travel_s / kHourSeconds);
      ++slots[static_cast<std::size_t>(d.area)];
    }
  }

  // arrivals, then service in id order
  std::vector<int> served_uav(static_cast<std::size_t>(n), 0);
  for (auto& r : world.fleet)
    if (r.state == UavState::traveling && r.arrival_hour <= hour) {
      Vec2 pos = scenario::area_center(cfg.los, r.target_area);
      pos.x += r.hover_offset_m;
      r.unit.position_m = pos;
      r.state = UavState::serving;
    }
  for (auto& r : world.fleet) {
    if (r.state != UavState::serving) continue;
    const auto& pe = cfg.uav_energy;
    const int j = r.target_area;
    const double home_leg = dist2d(
        r.unit.position_m,
        world.stations[static_cast<std::size_t>(r.unit.home_station)].position_m);
    const double hover = pe.e_per_s * kHourSeconds;
    const double reserve = pe.e_per_m * home_leg;
    int remaining = 0;
    if (j >= 0 && j < n)
      remaining = snaps[static_cast<std::size_t>(j)].service_requests -
                  served_bs[static_cast<std::size_t>(j)] -
                  served_uav[static_cast<std::size_t>(j)];
    bool stay = remaining > 0 && r.unit.battery_j >= hover + reserve;
    if (stay) {
      const int by_energy =
          pe.e_per_load > 0.0
              ? static_cast<int>(
                    std::floor((r.unit.battery_j - hover - reserve) / pe.e_per_load))
              : remaining;
      const int srv = std::min({remaining, r.unit.capacity_reqs,
                                std::max(0, by_energy)});
      served_uav[static_cast<std::size_t>(j)] += srv;
      r.unit.battery_j -= hover + pe.e_per_load * srv;
      // head home once the tank cannot fund another full hour on station
      if (r.unit.battery_j <
          hover + reserve + pe.e_per_load * r.unit.capacity_reqs)
        stay = false;
    }
    if (!stay) {
      r.unit.battery_j = std::max(0.0, r.unit.battery_j - pe.e_per_m * home_leg);
      r.unit.position_m =
          world.stations[static_cast<std::size_t>(r.unit.home_station)].position_m;
      r.state = UavState::returning;
      r.target_area = -1;
    }
  }

  // pad turnaround
  for (auto& r : world.fleet) {
    if (r.state == UavState::returning) {
      r.state = UavState::charging;
      r.arrival_hour =
          hour + std::max(1, static_cast<int>(std::ceil(cfg.uav_energy.charge_time_h)));
    } else if (r.state == UavState::charging && hour >= r.arrival_hour) {
      r.unit.battery_j = r.unit.battery_capacity_j;
      r.state = UavState::idle;
    }
  }

  // settle the ledger
  for (int j = 0; j < n; ++j) {
    auto& bs = world.stations[static_cast<std::size_t>(j)];
    HourLedger row;
    row.hour = hour;
    row.station = j;
    row.battery_before_j = bs.battery_j;
    row.harvested_j = harvested[static_cast<std::size_t>(j)];
    row.offered_reqs = snaps[static_cast<std::size_t>(j)].service_requests;
    row.active_users = snaps[static_cast<std::size_t>(j)].active_users;
    row.served_bs = served_bs[static_cast<std::size_t>(j)];
    row.served_uav = served_uav[static_cast<std::size_t>(j)];
    row.unserved = row.offered_reqs - row.served_bs - row.served_uav;
    row.battery_after_j = after[static_cast<std::size_t>(j)];
    row.outage = row.unserved > 0 && row.battery_after_j < bs.energy_per_load;
    bs.battery_j = after[static_cast<std::size_t>(j)];
    if (row.outage) world.outages.push_back({j, hour});
    world.ledger.push_back(row);
    if (opts.on_ledger) opts.on_ledger(world, row);
  }
  ++world.hour;
}

DispatchPolicy null_policy() {
  return [](const WorldState&, std::span<const AreaDeficit>,
            const ScenarioConfig&) { return std::vector<Dispatch>{}; };
}

DispatchPolicy greedy_policy() {
  return [](const WorldState& world, std::span<const AreaDeficit> deficits,
            const ScenarioConfig& cfg) {
    std::vector<Dispatch> out;
    if (deficits.empty() || world.fleet.empty()) return out;
    const int n_areas = static_cast<int>(world.stations.size());
    const auto& pe = cfg.uav_energy;

    // drones each deficit area still wants, after in-flight capacity
    std::vector<int> want(static_cast<std::size_t>(n_areas), 0);
    for (const auto& d : deficits) {
      int reqs = d.unserved_reqs;
      if (d.predicted_gap_j > 0.0 && cfg.bs_defaults.energy_per_load > 0.0)
        reqs += static_cast<int>(
            std::lround(d.predicted_gap_j / cfg.bs_defaults.energy_per_load));
      int committed = 0;
      for (const auto& r : world.fleet)
        if ((r.state == UavState::traveling || r.state == UavState::serving) &&
            r.target_area == d.area)
          committed += r.unit.capacity_reqs;
      reqs = std::max(0, reqs - committed);
      if (reqs > 0)
        want[static_cast<std::size_t>(d.area)] =
            cost::n_req(reqs, cfg.fleet.capacity_reqs);
    }
    if (std::all_of(want.begin(), want.end(), [](int w) { return w == 0; }))
      return out;

    // dispatchable copies; a drone must fund the worst round trip plus a
    // full-load service hour before it may launch
    std::vector<scenario::Uav> units;
    units.reserve(world.fleet.size());
    for (const auto& r : world.fleet) {
      scenario::Uav u = r.unit;
      double worst_leg = 0.0;
      for (const auto& d : deficits)
        worst_leg = std::max(
            worst_leg, dist2d(u.position_m, scenario::area_center(cfg.los, d.area)));
      const double sortie = pe.e_per_m * 2.0 * worst_leg +
                            pe.e_per_s * kHourSeconds +
                            pe.e_per_load * u.capacity_reqs;
      u.available = r.unit.available && r.state == UavState::idle &&
                    u.battery_j >= sortie;
      units.push_back(u);
    }

    // pair prices from the drone cost model with the fleet-density factor
    // held at one
    const double e_comm = cost::energy_comm(cfg.radio);
    std::vector<double> price(units.size() * static_cast<std::size_t>(n_areas), 0.0);
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (!units[i].available) continue;
      for (const auto& d : deficits) {
        const Vec2 c = scenario::area_center(cfg.los, d.area);
        const double ground = dist2d(units[i].position_m, c);
        const double d3 = dist3d(units[i].position_m, c, units[i].altitude_m);
        const double mobility =
            units[i].speed_m_s > 0.0 ? ground / units[i].speed_m_s / kHourSeconds
                                     : 0.0;
        const double load_req = std::min(d.unserved_reqs, units[i].capacity_reqs);
        const auto bd = cost::EnergyBreakdown::make(
            0.0, cost::energy_uav(pe, ground, kHourSeconds, load_req),
            cost::energy_travel(pe, ground, mobility), e_comm, cfg.weights);
        DemandSnapshot stub;
        stub.area_id = d.area;
        stub.service_requests = d.service_requests;
        stub.active_users = d.active_users;
        price[i * static_cast<std::size_t>(n_areas) +
              static_cast<std::size_t>(d.area)] =
            cost::cost_uav(stub, units[i], d3, 1.0, bd, cfg.weights,
                           cfg.radio.path_loss_exp, true);
      }
    }

    const auto chosen = evo::allocate_greedy(want, price, units, n_areas);
    for (const auto& [area, ids] : chosen)
      for (int id : ids) out.push_back({id, area});
    std::sort(out.begin(), out.end(), [](const Dispatch& a, const Dispatch& b) {
      return a.uav < b.uav;
    });
    return out;
  };
}

SimResult run_sim(const ScenarioConfig& cfg, const DispatchPolicy& policy,
                  const SimOptions& opts,
                  const std::vector<std::vector<double>>* solar,
                  const std::vector<DemandSnapshot>* demand) {
  cfg.validate();
  WorldState world = make_world(cfg, solar);

  std::vector<DemandSnapshot> synthesized;
  const std::vector<DemandSnapshot>* snaps = demand;
  if (!snaps) {
    synthesized = scenario::synth_demand(cfg.rng_seed, cfg.n_areas,
                                         cfg.horizon_hours, cfg.synth,
                                         cfg.traffic, cfg.los);
    snaps = &synthesized;
  }
  if (static_cast<int>(snaps->size()) != cfg.horizon_hours * cfg.n_areas)
    throw ShapeError("demand must cover horizon_hours x n_areas rows");

  SimResult res;
  auto& m = res.metrics;
  for (int h = 0; h < cfg.horizon_hours; ++h) {
    const std::span<const DemandSnapshot> hour_snaps(
        snaps->data() + static_cast<std::size_t>(h) * cfg.n_areas,
        static_cast<std::size_t>(cfg.n_areas));
    step(world, hour_snaps, policy, cfg, opts);
    if (opts.coverage_stride_hours > 0 && h % opts.coverage_stride_hours == 0) {
      std::vector<scenario::Uav> deployed;
      for (const auto& r : world.fleet)
        if (r.state == UavState::serving) deployed.push_back(r.unit);
      m.coverage_per_hour.push_back(
          {h, admission_coverage(hour_snaps, world.stations, deployed, cfg,
                                 opts.coverage_threshold_bps_hz)});
    }
  }

  m.outage_hours = static_cast<int>(world.outages.size());
  const double station_hours =
      static_cast<double>(cfg.n_areas) * cfg.horizon_hours;
  m.mean_hours_between_outages = station_hours / (m.outage_hours + 1);
  for (const auto& row : world.ledger) {
    m.served_reqs += row.served_bs + row.served_uav;
    m.offered_reqs += row.offered_reqs;
  }

  const int weeks = (cfg.horizon_hours + kWeekHours - 1) / kWeekHours;
  std::vector<int> week_outages(static_cast<std::size_t>(weeks), 0);
  for (const auto& ev : world.outages)
    ++week_outages[static_cast<std::size_t>(ev.hour / kWeekHours)];
  m.outage_pct_per_week.resize(static_cast<std::size_t>(weeks));
  for (int w = 0; w < weeks; ++w) {
    const int hours_w = std::min(kWeekHours, cfg.horizon_hours - w * kWeekHours);
    m.outage_pct_per_week[static_cast<std::size_t>(w)] =
        100.0 * week_outages[static_cast<std::size_t>(w)] /
        (static_cast<double>(cfg.n_areas) * hours_w);
  }

  if (!m.coverage_per_hour.empty()) {
    double sum = 0.0;
    for (const auto& c : m.coverage_per_hour) sum += c.coverage;
    m.mean_coverage = sum / static_cast<double>(m.coverage_per_hour.size());
  }
  res.world = std::move(world);
  return res;
}

// --- sweeps ----------------------------------------------------------------

namespace {

std::string altitude_label(double altitude_m) {
  return csv::num(altitude_m) + "m";
}

std::vector<scenario::Uav> static_deployment(const ScenarioConfig& cfg,
                                             double altitude_m, int per_area) {
  std::vector<scenario::Uav> out;
  out.reserve(static_cast<std::size_t>(cfg.n_areas) * per_area);
  int id = 0;
  for (int j = 0; j < cfg.n_areas; ++j)
    for (int k = 0; k < per_area; ++k) {
      scenario::Uav u;
      u.id = id++;
      u.position_m = scenario::hover_point(cfg.los, j, k, per_area);
      u.altitude_m = altitude_m;
      u.capacity_reqs = cfg.fleet.capacity_reqs;
      u.home_station = j;
      out.push_back(u);
    }
  return out;
}

}  // namespace

std::vector<CoveragePoint> sweep_extra_users(const ScenarioConfig& cfg,
                                             std::span<const int> extra_counts,
                                             std::span<const double> altitudes,
                                             const SimOptions& opts) {
  cfg.validate();
  const auto stations = scenario::make_stations(cfg, {});
  constexpr int kProbeHours[] = {9, 13, 19, 21};
  constexpr int kDay = 24;

  std::vector<CoveragePoint> out;
  for (int extra : extra_counts) {
    scenario::TrafficModel tm = cfg.traffic;
    tm.extra_users = extra;
    // same seed across sweep points: earlier draws are shared, so user
    // sets are nested as the surplus grows
    const auto snaps = scenario::synth_demand(cfg.rng_seed, cfg.n_areas, kDay,
                                              cfg.synth, tm, cfg.los);
    double none = 0.0;
    std::vector<double> per_alt(altitudes.size(), 0.0);
    for (int ph : kProbeHours) {
      const std::span<const DemandSnapshot> hour(
          snaps.data() + static_cast<std::size_t>(ph) * cfg.n_areas,
          static_cast<std::size_t>(cfg.n_areas));
      none += admission_coverage(hour, stations, {}, cfg,
                                 opts.coverage_threshold_bps_hz);
      for (std::size_t ai = 0; ai < altitudes.size(); ++ai) {
        // one drone per area: co-area drones interfere at near-equal power,
        // which buries the altitude effect the sweep is meant to expose
        const auto deployed = static_deployment(cfg, altitudes[ai], 1);
        per_alt[ai] += admission_coverage(hour, stations, deployed, cfg,
                                          opts.coverage_threshold_bps_hz);
      }
    }
    const double probes = static_cast<double>(std::size(kProbeHours));
    out.push_back({"no-uav", extra, none / probes});
    for (std::size_t ai = 0; ai < altitudes.size(); ++ai)
      out.push_back({altitude_label(altitudes[ai]), extra, per_alt[ai] / probes});
  }
  return out;
}

std::vector<FleetPoint> sweep_fleet(const ScenarioConfig& cfg,
                                    std::span<const int> sizes,
                                    const SimOptions& opts) {
  std::vector<FleetPoint> out;
  for (int s : sizes) {
    ScenarioConfig c = cfg;
    c.n_uavs = s;
    SimOptions o = opts;
    o.coverage_stride_hours = 0;
    const auto r = run_sim(c, s > 0 ? greedy_policy() : null_policy(), o);
    out.push_back({s, r.metrics.outage_hours,
                   r.metrics.mean_hours_between_outages});
  }
  return out;
}

std::vector<DensityPoint> sweep_density(const ScenarioConfig& cfg,
                                        std::span<const double> factors,
                                        const SimOptions& opts) {
  auto fully_served = [](const WorldState& w) {
    if (w.ledger.empty()) return 1.0;
    std::size_t full = 0;
    for (const auto& row : w.ledger)
      if (row.unserved == 0) ++full;
    return static_cast<double>(full) / static_cast<double>(w.ledger.size());
  };

  std::vector<DensityPoint> out;
  for (double f : factors) {
    if (f <= 0.0) throw std::invalid_argument("density factors must be positive");
    ScenarioConfig c = cfg;
    c.synth.base_users = std::max(
        1, static_cast<int>(std::lround(cfg.synth.base_users * f)));
    SimOptions o = opts;
    o.coverage_stride_hours = 0;
    const auto with_fleet = run_sim(c, greedy_policy(), o);
    const auto baseline = run_sim(c, null_policy(), o);
    out.push_back({f, fully_served(with_fleet.world), fully_served(baseline.world)});
  }
  return out;
}

// --- outputs ---------------------------------------------------------------

void write_outage_csv(const MetricsReport& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "week,outage_pct\n";
  for (std::size_t w = 0; w < m.outage_pct_per_week.size(); ++w)
    out << w << ',' << csv::num(m.outage_pct_per_week[w]) << '\n';
}

void write_coverage_csv(std::span<const CoveragePoint> pts,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "config,extra_users,coverage\n";
  for (const auto& p : pts)
    out << p.config << ',' << p.extra_users << ',' << csv::num(p.coverage) << '\n';
}

void write_fleet_csv(std::span<const FleetPoint> pts,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "fleet_size,outage_hours,mean_hours_between_outages\n";
  for (const auto& p : pts)
    out << p.fleet_size << ',' << p.outage_hours << ','
        << csv::num(p.mean_hours_between_outages) << '\n';
}

void write_density_csv(std::span<const DensityPoint> pts,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "density_factor,coverage_fleet,coverage_baseline\n";
  for (const auto& p : pts)
    out << csv::num(p.density_factor) << ',' << csv::num(p.coverage_fleet) << ','
        << csv::num(p.coverage_baseline) << '\n';
}

void write_summary_json(const MetricsReport& m, const ScenarioConfig& cfg,
                        const std::filesystem::path& path) {
  nlohmann::json j{
      {"n_uavs", cfg.n_uavs},
      {"n_areas", cfg.n_areas},
      {"horizon_hours", cfg.horizon_hours},
      {"rng_seed", cfg.rng_seed},
      {"outage_hours", m.outage_hours},
      {"mean_hours_between_outages", m.mean_hours_between_outages},
      {"mean_coverage", m.mean_coverage},
      {"served_reqs", m.served_reqs},
      {"offered_reqs", m.offered_reqs},
      {"service_ratio", m.offered_reqs > 0.0 ? m.served_reqs / m.offered_reqs : 1.0},
      {"outage_pct_per_week", m.outage_pct_per_week},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_trace_ndjson(const WorldState& world, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : world.ledger) {
    nlohmann::json j{{"hour", r.hour},
                     {"station", r.station},
                     {"battery_before_j", r.battery_before_j},
                     {"harvested_j", r.harvested_j},
                     {"offered_reqs", r.offered_reqs},
                     {"active_users", r.active_users},
                     {"served_bs", r.served_bs},
                     {"served_uav", r.served_uav},
                     {"unserved", r.unserved},
                     {"battery_after_j", r.battery_after_j},
                     {"outage", r.outage}};
    out << j.dump() << '\n';
  }
}

}  // namespace uavgrid::sim
