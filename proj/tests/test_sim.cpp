#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "uavgrid/errors.hpp"
#include "uavgrid/forecaster.hpp"
#include "uavgrid/scenario.hpp"
#include "uavgrid/sim.hpp"

namespace fs = std::filesystem;
using namespace uavgrid;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("uavgrid_sim_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

scenario::DemandSnapshot snap(int area, int hour, int requests, int users) {
  scenario::DemandSnapshot s;
  s.area_id = area;
  s.hour = hour;
  s.service_requests = requests;
  s.active_users = users;
  return s;
}

std::vector<std::vector<double>> zero_solar(int n_areas, int hours) {
  return std::vector<std::vector<double>>(
      static_cast<std::size_t>(n_areas),
      std::vector<double>(static_cast<std::size_t>(hours), 0.0));
}

// hour-major constant demand
std::vector<scenario::DemandSnapshot> flat_demand(int n_areas, int hours,
                                                  int requests, int users) {
  std::vector<scenario::DemandSnapshot> out;
  out.reserve(static_cast<std::size_t>(n_areas) * hours);
  for (int h = 0; h < hours; ++h)
    for (int j = 0; j < n_areas; ++j) out.push_back(snap(j, h, requests, users));
  return out;
}

scenario::ScenarioConfig tiny_cfg(int n_areas, int n_uavs, int hours) {
  scenario::ScenarioConfig cfg;
  cfg.n_areas = n_areas;
  cfg.n_uavs = n_uavs;
  cfg.horizon_hours = hours;
  cfg.rng_seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("state names are stable") {
  CHECK(std::string(sim::to_string(sim::UavState::idle)) == "idle");
  CHECK(std::string(sim::to_string(sim::UavState::traveling)) == "traveling");
  CHECK(std::string(sim::to_string(sim::UavState::serving)) == "serving");
  CHECK(std::string(sim::to_string(sim::UavState::returning)) == "returning");
  CHECK(std::string(sim::to_string(sim::UavState::charging)) == "charging");
}

TEST_CASE("a demand-free world never logs an outage or launches a drone") {
  const auto cfg = tiny_cfg(2, 2, 12);
  const auto solar = zero_solar(2, 12);
  const auto demand = flat_demand(2, 12, 0, 0);
  sim::SimOptions opts;
  opts.coverage_stride_hours = 0;

  const auto res = sim::run_sim(cfg, sim::greedy_policy(), opts, &solar, &demand);
  CHECK(res.metrics.outage_hours == 0);
  CHECK(res.metrics.served_reqs == 0.0);
  CHECK(res.metrics.offered_reqs == 0.0);
  CHECK(res.metrics.mean_hours_between_outages == 2.0 * 12.0);
  REQUIRE(res.world.ledger.size() == 24u);
  for (const auto& row : res.world.ledger) {
    CHECK(row.unserved == 0);
    CHECK_FALSE(row.outage);
    // no harvest, no service: the battery never moves off its full mark
    CHECK(row.battery_after_j == cfg.bs_defaults.battery_capacity_j);
  }
  for (const auto& r : res.world.fleet) CHECK(r.state == sim::UavState::idle);
}

TEST_CASE("a starved station logs an outage that a dispatched drone prevents") {
  auto cfg = tiny_cfg(1, 1, 3);
  cfg.bs_defaults.battery_capacity_j = 4000.0;  // funds ten requests, once
  const auto solar = zero_solar(1, 3);
  std::vector<scenario::DemandSnapshot> demand = {
      snap(0, 0, 60, 20), snap(0, 1, 0, 0), snap(0, 2, 0, 0)};
  sim::SimOptions opts;
  opts.coverage_stride_hours = 0;

  const auto without = sim::run_sim(cfg, sim::null_policy(), opts, &solar, &demand);
  REQUIRE(without.metrics.outage_hours == 1);
  CHECK(without.world.outages[0].station == 0);
  CHECK(without.world.outages[0].hour == 0);
  CHECK(without.world.ledger[0].served_bs == 10);
  CHECK(without.world.ledger[0].unserved == 50);
  CHECK(without.world.ledger[0].battery_after_j == 0.0);
  CHECK(without.metrics.mean_hours_between_outages == 3.0 / 2.0);

  const auto with = sim::run_sim(cfg, sim::greedy_policy(), opts, &solar, &demand);
  CHECK(with.metrics.outage_hours == 0);
  CHECK(with.world.ledger[0].served_bs == 10);
  CHECK(with.world.ledger[0].served_uav == 50);
  CHECK(with.world.ledger[0].unserved == 0);
  CHECK(with.metrics.mean_hours_between_outages == 3.0 / 1.0);

  // station-side dynamics never depend on the fleet
  REQUIRE(with.world.ledger.size() == without.world.ledger.size());
  for (std::size_t i = 0; i < with.world.ledger.size(); ++i) {
    CHECK(with.world.ledger[i].served_bs == without.world.ledger[i].served_bs);
    CHECK(with.world.ledger[i].battery_after_j ==
          without.world.ledger[i].battery_after_j);
  }
}

TEST_CASE("one sortie walks the full state machine") {
  auto cfg = tiny_cfg(1, 1, 4);
  cfg.bs_defaults.battery_capacity_j = 400.0;  // funds exactly one request
  const auto solar = zero_solar(1, 4);
  auto world = sim::make_world(cfg, &solar);
  REQUIRE(world.fleet.size() == 1u);
  CHECK(world.fleet[0].state == sim::UavState::idle);
  const auto policy = sim::greedy_policy();
  const sim::SimOptions opts;

  // hour 0: the station funds one request, the drone takes the other 29
  std::vector<scenario::DemandSnapshot> h0 = {snap(0, 0, 30, 10)};
  sim::step(world, h0, policy, cfg, opts);
  CHECK(world.hour == 1);
  CHECK(world.fleet[0].state == sim::UavState::serving);
  CHECK(world.fleet[0].target_area == 0);
  CHECK(world.fleet[0].hover_offset_m == 0.0);
  CHECK(world.fleet[0].unit.position_m.x == 0.0);
  CHECK(world.fleet[0].unit.position_m.y == 0.0);
  // full battery minus zero travel, one hover hour, 29 carried requests
  CHECK(world.fleet[0].unit.battery_j == 1.8e6 - 3600.0 - 100.0 * 29);
  REQUIRE(world.ledger.size() == 1u);
  CHECK(world.ledger[0].served_bs == 1);
  CHECK(world.ledger[0].served_uav == 29);
  CHECK(world.ledger[0].unserved == 0);
  CHECK_FALSE(world.ledger[0].outage);

  // hour 1: nothing left to serve, the drone heads home and starts charging
  std::vector<scenario::DemandSnapshot> h1 = {snap(0, 1, 0, 0)};
  sim::step(world, h1, policy, cfg, opts);
  CHECK(world.fleet[0].state == sim::UavState::charging);
  CHECK(world.fleet[0].target_area == -1);
  CHECK(world.fleet[0].arrival_hour == 3);
  CHECK(world.fleet[0].unit.battery_j == 1.8e6 - 3600.0 - 100.0 * 29);

  // hour 2: still on the pad
  std::vector<scenario::DemandSnapshot> h2 = {snap(0, 2, 0, 0)};
  sim::step(world, h2, policy, cfg, opts);
  CHECK(world.fleet[0].state == sim::UavState::charging);

  // hour 3: recharge completes
  std::vector<scenario::DemandSnapshot> h3 = {snap(0, 3, 0, 0)};
  sim::step(world, h3, policy, cfg, opts);
  CHECK(world.fleet[0].state == sim::UavState::idle);
  CHECK(world.fleet[0].unit.battery_j == 1.8e6);

  for (const auto& row : world.ledger) CHECK_FALSE(row.outage);
}

TEST_CASE("co-area drones stagger their hover points") {
  auto cfg = tiny_cfg(1, 2, 1);
  cfg.bs_defaults.battery_capacity_j = 4000.0;
  const auto solar = zero_solar(1, 1);
  auto world = sim::make_world(cfg, &solar);
  const sim::SimOptions opts;

  // 110 offered, 10 funded by the station: two drones' worth of deficit
  std::vector<scenario::DemandSnapshot> h0 = {snap(0, 0, 110, 30)};
  sim::step(world, h0, sim::greedy_policy(), cfg, opts);
  REQUIRE(world.fleet.size() == 2u);
  CHECK(world.fleet[0].state == sim::UavState::serving);
  CHECK(world.fleet[1].state == sim::UavState::serving);
  CHECK(world.fleet[0].hover_offset_m == 0.0);
  CHECK(world.fleet[1].hover_offset_m == cfg.los.max_radius_m);
  CHECK(world.fleet[0].unit.position_m.x == 0.0);
  CHECK(world.fleet[1].unit.position_m.x == cfg.los.max_radius_m);
  CHECK(world.ledger[0].served_uav == 100);
  CHECK(world.ledger[0].unserved == 0);
}

TEST_CASE("malformed dispatches and snapshots are rejected") {
  auto cfg = tiny_cfg(1, 1, 1);
  cfg.bs_defaults.battery_capacity_j = 400.0;
  const auto solar = zero_solar(1, 1);
  const sim::SimOptions opts;
  std::vector<scenario::DemandSnapshot> deficit_hour = {snap(0, 0, 30, 10)};

  auto policy_returning = [](std::vector<sim::Dispatch> ds) {
    return sim::DispatchPolicy(
        [ds](const sim::WorldState&, std::span<const sim::AreaDeficit>,
             const scenario::ScenarioConfig&) { return ds; });
  };

  SUBCASE("unknown drone") {
    auto world = sim::make_world(cfg, &solar);
    CHECK_THROWS_AS(
        sim::step(world, deficit_hour, policy_returning({{5, 0}}), cfg, opts),
        std::invalid_argument);
  }
  SUBCASE("unknown area") {
    auto world = sim::make_world(cfg, &solar);
    CHECK_THROWS_AS(
        sim::step(world, deficit_hour, policy_returning({{0, 3}}), cfg, opts),
        std::invalid_argument);
  }
  SUBCASE("double dispatch of one drone") {
    auto world = sim::make_world(cfg, &solar);
    CHECK_THROWS_AS(
        sim::step(world, deficit_hour, policy_returning({{0, 0}, {0, 0}}), cfg,
                  opts),
        std::invalid_argument);
  }
  SUBCASE("grounded drone") {
    auto world = sim::make_world(cfg, &solar);
    world.fleet[0].unit.available = false;
    CHECK_THROWS_AS(
        sim::step(world, deficit_hour, policy_returning({{0, 0}}), cfg, opts),
        std::invalid_argument);
  }
  SUBCASE("snapshot count must match the station count") {
    auto world = sim::make_world(cfg, &solar);
    std::vector<scenario::DemandSnapshot> two = {snap(0, 0, 1, 1), snap(1, 0, 1, 1)};
    CHECK_THROWS_AS(sim::step(world, two, sim::null_policy(), cfg, opts),
                    ShapeError);
  }
  SUBCASE("snapshots must arrive in area order") {
    auto cfg2 = tiny_cfg(2, 0, 1);
    const auto solar2 = zero_solar(2, 1);
    auto world = sim::make_world(cfg2, &solar2);
    std::vector<scenario::DemandSnapshot> swapped = {snap(1, 0, 1, 1),
                                                     snap(0, 0, 1, 1)};
    CHECK_THROWS_AS(sim::step(world, swapped, sim::null_policy(), cfg2, opts),
                    ShapeError);
  }
  SUBCASE("demand handed to run_sim must cover the horizon") {
    const auto short_demand = flat_demand(1, 1, 0, 0);
    auto cfg2 = tiny_cfg(1, 0, 2);
    CHECK_THROWS_AS(
        sim::run_sim(cfg2, sim::null_policy(), opts, nullptr, &short_demand),
        ShapeError);
  }
}

TEST_CASE("the ledger identity holds through a stressed fuzz run") {
  auto cfg = tiny_cfg(3, 3, 200);
  // starve the stations so drones fly and outages still slip through
  cfg.synth.solar_peak_j = 2.0e4;
  cfg.bs_defaults.battery_capacity_j = 1.0e4;
  sim::SimOptions opts;
  opts.coverage_stride_hours = 0;

  const auto greedy = sim::run_sim(cfg, sim::greedy_policy(), opts);
  const auto baseline = sim::run_sim(cfg, sim::null_policy(), opts);

  REQUIRE(greedy.world.ledger.size() == 600u);
  std::vector<double> battery(3);
  for (int j = 0; j < 3; ++j) battery[static_cast<std::size_t>(j)] =
      cfg.bs_defaults.battery_capacity_j;

  int outage_rows = 0;
  for (const auto& row : greedy.world.ledger) {
    const double cap = cfg.bs_defaults.battery_capacity_j;
    const double e = cfg.bs_defaults.energy_per_load;
    const auto j = static_cast<std::size_t>(row.station);
    // bit-exact battery recurrence, chained across the whole run
    CHECK(row.battery_before_j == battery[j]);
    const double expect = std::clamp(
        row.battery_before_j + row.harvested_j - e * row.served_bs, 0.0, cap);
    CHECK(row.battery_after_j == expect);
    battery[j] = row.battery_after_j;

    CHECK(row.served_bs >= 0);
    CHECK(row.served_bs <= row.offered_reqs);
    CHECK(row.served_bs <= cfg.bs_defaults.user_capacity);
    CHECK(row.served_uav >= 0);
    CHECK(row.unserved == row.offered_reqs - row.served_bs - row.served_uav);
    CHECK(row.unserved >= 0);
    CHECK(row.outage == (row.unserved > 0 && row.battery_after_j < e));
    if (row.outage) ++outage_rows;
  }
  CHECK(outage_rows == greedy.metrics.outage_hours);
  CHECK(static_cast<std::size_t>(greedy.metrics.outage_hours) ==
        greedy.world.outages.size());

  // metric identities
  double served = 0.0, offered = 0.0;
  for (const auto& row : greedy.world.ledger) {
    served += row.served_bs + row.served_uav;
    offered += row.offered_reqs;
  }
  CHECK(greedy.metrics.served_reqs == served);
  CHECK(greedy.metrics.offered_reqs == offered);
  CHECK(greedy.metrics.mean_hours_between_outages ==
        3.0 * 200.0 / (greedy.metrics.outage_hours + 1));
  REQUIRE(greedy.metrics.outage_pct_per_week.size() == 2u);
  int w0 = 0, w1 = 0;
  for (const auto& ev : greedy.world.outages)
    (ev.hour < 168 ? w0 : w1) += 1;
  CHECK(greedy.metrics.outage_pct_per_week[0] ==
        doctest::Approx(100.0 * w0 / (3.0 * 168.0)).epsilon(1e-12));
  CHECK(greedy.metrics.outage_pct_per_week[1] ==
        doctest::Approx(100.0 * w1 / (3.0 * 32.0)).epsilon(1e-12));

  // drones only ever add service
  CHECK(greedy.metrics.outage_hours <= baseline.metrics.outage_hours);
  CHECK(greedy.metrics.served_reqs >= baseline.metrics.served_reqs);
  REQUIRE(baseline.world.ledger.size() == greedy.world.ledger.size());
  for (std::size_t i = 0; i < greedy.world.ledger.size(); ++i) {
    CHECK(greedy.world.ledger[i].served_bs == baseline.world.ledger[i].served_bs);
    CHECK(greedy.world.ledger[i].battery_after_j ==
          baseline.world.ledger[i].battery_after_j);
    CHECK(greedy.world.ledger[i].served_uav >=
          baseline.world.ledger[i].served_uav);
  }

  SUBCASE("reruns are identical") {
    const auto again = sim::run_sim(cfg, sim::greedy_policy(), opts);
    REQUIRE(again.world.ledger.size() == greedy.world.ledger.size());
    for (std::size_t i = 0; i < greedy.world.ledger.size(); ++i) {
      CHECK(again.world.ledger[i].battery_after_j ==
            greedy.world.ledger[i].battery_after_j);
      CHECK(again.world.ledger[i].served_uav == greedy.world.ledger[i].served_uav);
      CHECK(again.world.ledger[i].unserved == greedy.world.ledger[i].unserved);
    }
    CHECK(again.metrics.outage_hours == greedy.metrics.outage_hours);
  }

  SUBCASE("an empty fleet under the dispatcher matches the baseline") {
    auto cfg0 = cfg;
    cfg0.n_uavs = 0;
    const auto a = sim::run_sim(cfg0, sim::greedy_policy(), opts);
    const auto b = sim::run_sim(cfg0, sim::null_policy(), opts);
    REQUIRE(a.world.ledger.size() == b.world.ledger.size());
    for (std::size_t i = 0; i < a.world.ledger.size(); ++i) {
      CHECK(a.world.ledger[i].served_uav == 0);
      CHECK(a.world.ledger[i].unserved == b.world.ledger[i].unserved);
      CHECK(a.world.ledger[i].battery_after_j == b.world.ledger[i].battery_after_j);
    }
    CHECK(a.metrics.outage_hours == b.metrics.outage_hours);
  }
}

TEST_CASE("an attached forecaster leaves the ledger identity intact") {
  auto cfg = tiny_cfg(2, 2, 30);
  cfg.synth.solar_peak_j = 2.0e4;
  cfg.bs_defaults.battery_capacity_j = 1.0e4;

  forecast::LstmShape shape;
  shape.hidden_units = 3;
  shape.neurons_per_layer = 4;
  const auto model = forecast::LstmModel::init(shape, 11);

  sim::SimOptions opts;
  opts.coverage_stride_hours = 0;
  opts.model = &model;
  opts.forecast_window_hours = 4;

  const auto res = sim::run_sim(cfg, sim::greedy_policy(), opts);
  REQUIRE(res.world.ledger.size() == 60u);
  for (const auto& row : res.world.ledger) {
    const double expect = std::clamp(
        row.battery_before_j + row.harvested_j -
            cfg.bs_defaults.energy_per_load * row.served_bs,
        0.0, cfg.bs_defaults.battery_capacity_j);
    CHECK(row.battery_after_j == expect);
    CHECK(row.unserved == row.offered_reqs - row.served_bs - row.served_uav);
  }
}

TEST_CASE("coverage sampling follows the stride") {
  auto cfg = tiny_cfg(2, 0, 6);
  cfg.synth.base_users = 50;  // light load: every admitted user clears the bar
  sim::SimOptions opts;
  opts.coverage_stride_hours = 2;

  const auto res = sim::run_sim(cfg, sim::null_policy(), opts);
  REQUIRE(res.metrics.coverage_per_hour.size() == 3u);
  CHECK(res.metrics.coverage_per_hour[0].hour == 0);
  CHECK(res.metrics.coverage_per_hour[1].hour == 2);
  CHECK(res.metrics.coverage_per_hour[2].hour == 4);
  for (const auto& c : res.metrics.coverage_per_hour) {
    CHECK(c.coverage >= 0.0);
    CHECK(c.coverage <= 1.0);
  }
  double mean = 0.0;
  for (const auto& c : res.metrics.coverage_per_hour) mean += c.coverage;
  CHECK(res.metrics.mean_coverage ==
        doctest::Approx(mean / 3.0).epsilon(1e-12));

  SUBCASE("a light cell covers everyone") {
    for (const auto& c : res.metrics.coverage_per_hour) CHECK(c.coverage == 1.0);
  }

  SUBCASE("stride zero disables sampling") {
    sim::SimOptions off;
    off.coverage_stride_hours = 0;
    const auto quiet = sim::run_sim(cfg, sim::null_policy(), off);
    CHECK(quiet.metrics.coverage_per_hour.empty());
    CHECK(quiet.metrics.mean_coverage == 0.0);
  }
}

TEST_CASE("sweeps report one point per requested setting") {
  auto cfg = tiny_cfg(2, 2, 48);
  cfg.synth.solar_peak_j = 2.0e4;
  cfg.bs_defaults.battery_capacity_j = 1.0e4;
  sim::SimOptions opts;
  opts.coverage_stride_hours = 0;

  SUBCASE("fleet sweep") {
    const std::vector<int> sizes = {0, 2};
    const auto pts = sim::sweep_fleet(cfg, sizes, opts);
    REQUIRE(pts.size() == 2u);
    CHECK(pts[0].fleet_size == 0);
    CHECK(pts[1].fleet_size == 2);
    CHECK(pts[1].outage_hours <= pts[0].outage_hours);
    for (const auto& p : pts)
      CHECK(p.mean_hours_between_outages ==
            doctest::Approx(2.0 * 48.0 / (p.outage_hours + 1)).epsilon(1e-12));
  }

  SUBCASE("surplus-user sweep") {
    const std::vector<int> extra = {0, 100};
    const std::vector<double> alts = {150.0};
    const auto pts = sim::sweep_extra_users(cfg, extra, alts, opts);
    REQUIRE(pts.size() == 4u);
    CHECK(pts[0].config == "no-uav");
    CHECK(pts[1].config == "150m");
    CHECK(pts[2].config == "no-uav");
    CHECK(pts[3].config == "150m");
    CHECK(pts[0].extra_users == 0);
    CHECK(pts[2].extra_users == 100);
    for (const auto& p : pts) {
      CHECK(p.coverage >= 0.0);
      CHECK(p.coverage <= 1.0);
    }
    // more surplus users never helps a fixed configuration
    CHECK(pts[2].coverage <= pts[0].coverage);
    CHECK(pts[3].coverage <= pts[1].coverage);
  }

  SUBCASE("density sweep") {
    const std::vector<double> factors = {1.0, 2.0};
    const auto pts = sim::sweep_density(cfg, factors, opts);
    REQUIRE(pts.size() == 2u);
    CHECK(pts[0].density_factor == 1.0);
    CHECK(pts[1].density_factor == 2.0);
    for (const auto& p : pts) {
      CHECK(p.coverage_fleet >= p.coverage_baseline);
      CHECK(p.coverage_fleet <= 1.0);
      CHECK(p.coverage_baseline >= 0.0);
    }
    const std::vector<double> bad = {-1.0};
    CHECK_THROWS_AS(sim::sweep_density(cfg, bad, opts), std::invalid_argument);
  }
}

TEST_CASE("result files carry the expected headers and rows") {
  TempDir td;

  SUBCASE("outage csv") {
    sim::MetricsReport m;
    m.outage_pct_per_week = {1.5, 0.0};
    const fs::path p = td.path / "outage.csv";
    sim::write_outage_csv(m, p);
    std::ifstream f(p);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "week,outage_pct");
    REQUIRE(std::getline(f, line));
    CHECK(line == "0,1.5");
    REQUIRE(std::getline(f, line));
    CHECK(line == "1,0");
    CHECK_FALSE(std::getline(f, line));
  }

  SUBCASE("coverage csv") {
    const std::vector<sim::CoveragePoint> pts = {{"no-uav", 0, 0.5},
                                                 {"150m", 100, 0.25}};
    const fs::path p = td.path / "coverage.csv";
    sim::write_coverage_csv(pts, p);
    std::ifstream f(p);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "config,extra_users,coverage");
    REQUIRE(std::getline(f, line));
    CHECK(line == "no-uav,0,0.5");
    REQUIRE(std::getline(f, line));
    CHECK(line == "150m,100,0.25");
  }

  SUBCASE("fleet csv") {
    const std::vector<sim::FleetPoint> pts = {{0, 12, 14.0}, {4, 3, 56.25}};
    const fs::path p = td.path / "fleet.csv";
    sim::write_fleet_csv(pts, p);
    std::ifstream f(p);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "fleet_size,outage_hours,mean_hours_between_outages");
    REQUIRE(std::getline(f, line));
    CHECK(line == "0,12,14");
    REQUIRE(std::getline(f, line));
    CHECK(line == "4,3,56.25");
  }

  SUBCASE("density csv") {
    const std::vector<sim::DensityPoint> pts = {{0.5, 1.0, 0.75}};
    const fs::path p = td.path / "density.csv";
    sim::write_density_csv(pts, p);
    std::ifstream f(p);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "density_factor,coverage_fleet,coverage_baseline");
    REQUIRE(std::getline(f, line));
    CHECK(line == "0.5,1,0.75");
  }

  SUBCASE("summary json and ledger trace") {
    auto cfg = tiny_cfg(1, 0, 2);
    const auto solar = zero_solar(1, 2);
    const auto demand = flat_demand(1, 2, 0, 0);
    sim::SimOptions opts;
    opts.coverage_stride_hours = 0;
    const auto res = sim::run_sim(cfg, sim::null_policy(), opts, &solar, &demand);

    const fs::path pj = td.path / "summary.json";
    sim::write_summary_json(res.metrics, cfg, pj);
    std::ifstream f(pj);
    std::string body((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    CHECK(body.find("\"outage_hours\"") != std::string::npos);
    CHECK(body.find("\"mean_hours_between_outages\"") != std::string::npos);
    CHECK(body.find("\"service_ratio\"") != std::string::npos);
    CHECK(body.find("\"outage_pct_per_week\"") != std::string::npos);

    const fs::path pt = td.path / "trace.ndjson";
    sim::write_trace_ndjson(res.world, pt);
    std::ifstream t(pt);
    std::string line;
    int lines = 0;
    while (std::getline(t, line)) {
      ++lines;
      CHECK(line.find("\"hour\":") != std::string::npos);
      CHECK(line.find("\"battery_after_j\":") != std::string::npos);
    }
    CHECK(lines == 2);
  }
}
