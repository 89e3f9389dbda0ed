#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "uavgrid/radio.hpp"

using namespace uavgrid;
using namespace uavgrid::radio;

namespace {

Uav drone_at(int id, double x, double alt, bool avail = true) {
  Uav u;
  u.id = id;
  u.position_m = {x, 0.0};
  u.altitude_m = alt;
  u.available = avail;
  return u;
}

}  // namespace

TEST_CASE("thermal noise power") {
  CHECK(noise_power_w(-174.0, 20e6) ==
        doctest::Approx(7.96214341106994e-14).epsilon(1e-12));
  CHECK(noise_power_w(-174.0, 1.0) ==
        doctest::Approx(3.981071705534986e-21).epsilon(1e-12));
  CHECK(noise_power_w(0.0, 1.0) == doctest::Approx(1e-3).epsilon(1e-12));
  // the textbook rounded figure for -174 dBm/Hz over 20 MHz
  CHECK(noise_power_w(-174.0, 20e6) == doctest::Approx(7.943e-14).epsilon(0.01));
  CHECK_THROWS_AS(noise_power_w(-174.0, 0.0), std::domain_error);
}

TEST_CASE("single-link SINR without interferers") {
  RadioParams radio;
  const Uav serving = drone_at(0, 0.0, 100.0);
  const std::vector<Uav> fleet{serving};
  const double s = sinr({0.0, 0.0}, serving, fleet, radio);
  CHECK(s == doctest::Approx(188391482.36321864).epsilon(1e-12));

  SUBCASE("per-user channel fraction at that SINR") {
    TrafficModel traffic;
    CHECK(user_load(radio, traffic, s) ==
          doctest::Approx(5.820476460506333e-06).epsilon(1e-12));
  }
  SUBCASE("equal-share throughput at 200 users") {
    CHECK(effective_throughput(s, 200, radio) ==
          doctest::Approx(2748915.8505432964).epsilon(1e-12));
    CHECK_THROWS_AS(effective_throughput(s, 0, radio), std::domain_error);
  }
}

TEST_CASE("interference bookkeeping") {
  RadioParams radio;
  const double noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz);
  const Uav serving = drone_at(0, 0.0, 100.0);
  const Uav interferer = drone_at(1, 100.0, 100.0);

  SUBCASE("an available neighbour degrades the link") {
    const std::vector<Uav> fleet{serving, interferer};
    const double s = sinr({0.0, 0.0}, serving, fleet, radio);
    const double signal = 10.0 * 1.5 / std::pow(100.0, 3.0);
    const double di = std::sqrt(100.0 * 100.0 + 100.0 * 100.0);
    const double interf = 10.0 * 1.5 / std::pow(di, 3.0);
    CHECK(s == doctest::Approx(signal / (interf + noise)).epsilon(1e-12));
    CHECK(s < 5.0); // interference-limited, eight orders below the clean link
  }
  SUBCASE("an unavailable neighbour does not radiate") {
    const std::vector<Uav> fleet{serving, drone_at(1, 100.0, 100.0, false)};
    const double s = sinr({0.0, 0.0}, serving, fleet, radio);
    CHECK(s == doctest::Approx(188391482.36321864).epsilon(1e-12));
  }
  SUBCASE("the serving drone never interferes with itself") {
    const std::vector<Uav> fleet{serving, serving};
    const double s = sinr({0.0, 0.0}, serving, fleet, radio);
    CHECK(s == doctest::Approx(188391482.36321864).epsilon(1e-12));
  }
  SUBCASE("zero serving distance is rejected") {
    const Uav ground = drone_at(0, 0.0, 0.0);
    const std::vector<Uav> fleet{ground};
    CHECK_THROWS_AS(sinr({0.0, 0.0}, ground, fleet, radio), std::domain_error);
  }
}

TEST_CASE("visibility cone boundaries") {
  scenario::LosGeometry los; // altitude 150, elev [0.35, 1.40], radius 100
  const Uav u = drone_at(0, 0.0, 150.0);
  // at the radius edge the elevation is atan(1.5), inside the cone
  CHECK(std::atan(1.5) == doctest::Approx(0.982793723247329).epsilon(1e-12));
  CHECK(los_visible({100.0, 0.0}, u, los));
  CHECK_FALSE(los_visible({100.1, 0.0}, u, los));
  // directly underneath is too steep
  CHECK_FALSE(los_visible({0.0, 0.0}, u, los));
  CHECK_FALSE(los_visible({10.0, 0.0}, u, los)); // atan(15) ~ 1.504
  CHECK(los_visible({30.0, 0.0}, u, los));       // atan(5) ~ 1.373
  // a low drone: shallow angles drop below min_elev inside the radius
  scenario::LosGeometry shallow = los;
  shallow.altitude_m = 20.0;
  const Uav low = drone_at(1, 0.0, 20.0);
  // elevation at 100 m horizontal is atan(0.2) ~ 0.197 < 0.35
  CHECK_FALSE(los_visible({100.0, 0.0}, low, shallow));
  CHECK(los_visible({40.0, 0.0}, low, shallow)); // atan(0.5) ~ 0.464
}

TEST_CASE("area demand integral against a polar oracle") {
  RadioParams radio;
  TrafficModel traffic;
  scenario::LosGeometry los;
  const Vec2 center{0.0, 0.0};
  const Uav overhead = drone_at(0, 0.0, 150.0);
  const std::vector<Uav> fleet{overhead};

  // radially symmetric integrand: load density only depends on the ground
  // radius, so a fine trapezoid rule in r is an independent quadrature
  const double noise = noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz);
  const double r_min = 150.0 / std::tan(los.max_elev_rad); // too steep inside
  auto density = [&](double r) {
    const double d = std::sqrt(r * r + 150.0 * 150.0);
    const double s = 10.0 * 1.5 / std::pow(d, 3.0) / noise;
    return traffic.arrival_rate_req_s * traffic.mean_packet_bits /
           (radio.bandwidth_hz * std::log2(1.0 + s));
  };
  const int steps = 20000;
  const double h = (los.max_radius_m - r_min) / steps;
  double oracle = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double r = r_min + i * h;
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    oracle += w * density(r) * 2.0 * std::acos(-1.0) * r * h;
  }

  const auto res = area_load(center, fleet, radio, traffic, los, 256);
  CHECK(res.load == doctest::Approx(oracle).epsilon(0.02));
  // the unserved patch is the steep hole under the drone
  const double hole = std::acos(-1.0) * r_min * r_min;
  CHECK(res.unserved_area_m2 == doctest::Approx(hole).epsilon(0.05));

  SUBCASE("no fleet leaves the whole disc unserved") {
    const auto empty = area_load(center, {}, radio, traffic, los, 64);
    CHECK(empty.load == 0.0);
    const double disc = std::acos(-1.0) * los.max_radius_m * los.max_radius_m;
    CHECK(empty.unserved_area_m2 == doctest::Approx(disc).epsilon(0.03));
  }
  SUBCASE("a distant available drone only adds interference") {
    std::vector<Uav> two{overhead, drone_at(1, 400.0, 150.0)};
    const auto more = area_load(center, two, radio, traffic, los, 128);
    const auto base = area_load(center, fleet, radio, traffic, los, 128);
    CHECK(more.load > base.load);
    CHECK(more.unserved_area_m2 == doctest::Approx(base.unserved_area_m2));
  }
  SUBCASE("an unavailable drone changes nothing") {
    std::vector<Uav> two{overhead, drone_at(1, 400.0, 150.0, false)};
    const auto same = area_load(center, two, radio, traffic, los, 96);
    const auto base = area_load(center, fleet, radio, traffic, los, 96);
    CHECK(same.load == base.load);
    CHECK(same.unserved_area_m2 == base.unserved_area_m2);
  }
  SUBCASE("quadrature is stable across resolutions") {
    const auto coarse = area_load(center, fleet, radio, traffic, los, 48);
    const auto fine = area_load(center, fleet, radio, traffic, los, 192);
    CHECK(coarse.load == doctest::Approx(fine.load).epsilon(0.05));
  }
  SUBCASE("grid_res below 2 is rejected") {
    CHECK_THROWS_AS(area_load(center, fleet, radio, traffic, los, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("coverage fraction over link samples") {
  std::vector<LinkSample> samples;
  // spectral efficiencies log2(1+s): 1, 2, 3 bits/s/Hz
  samples.push_back(LinkSample::make({0, 0}, 0, 10.0, 1.0));
  samples.push_back(LinkSample::make({1, 0}, 0, 10.0, 3.0));
  samples.push_back(LinkSample::make({2, 0}, 1, 10.0, 7.0));
  CHECK(samples[0].spectral_eff_bps_hz == doctest::Approx(1.0));
  CHECK(samples[2].spectral_eff_bps_hz == doctest::Approx(3.0));
  CHECK(throughput_coverage(samples, 0.0) == doctest::Approx(1.0));
  CHECK(throughput_coverage(samples, 2.0) ==
        doctest::Approx(2.0 / 3.0)); // threshold is inclusive
  CHECK(throughput_coverage(samples, 3.1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(throughput_coverage({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(throughput_coverage(samples, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(LinkSample::make({0, 0}, 0, 1.0, -0.5), std::domain_error);
}
