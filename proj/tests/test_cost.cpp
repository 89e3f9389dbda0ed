#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "uavgrid/cost.hpp"
#include "uavgrid/rng.hpp"

using namespace uavgrid;
using namespace uavgrid::cost;

TEST_CASE("drones needed for a deficit") {
  CHECK(n_req(0, 50) == 0);
  CHECK(n_req(1, 50) == 1);
  CHECK(n_req(50, 50) == 1);
  CHECK(n_req(51, 50) == 2);
  CHECK(n_req(500, 50) == 10);
  CHECK_THROWS_AS(n_req(-1, 50), std::domain_error);
  CHECK_THROWS_AS(n_req(5, 0), std::domain_error);
}

TEST_CASE("log-space Poisson pmf") {
  // frozen against an independent lgamma evaluation
  CHECK(log_poisson_pmf(100, 2.0 / 3.0) ==
        doctest::Approx(-404.95255303304657).epsilon(1e-12));
  CHECK(log_poisson_pmf(50, 5.0) ==
        doctest::Approx(-73.00587133006803).epsilon(1e-12));
  CHECK(log_poisson_pmf(0, 2.5) == doctest::Approx(-2.5).epsilon(1e-12));
  CHECK(poisson_pmf(0, 0.0) == 1.0);
  CHECK(poisson_pmf(3, 0.0) == 0.0);
  CHECK_THROWS_AS(log_poisson_pmf(-1, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_poisson_pmf(1, -0.5), std::domain_error);

  SUBCASE("the pmf normalizes") {
    for (const double mu : {0.1, 2.0 / 3.0, 5.0}) {
      double total = 0.0;
      for (int k = 0; k <= 200; ++k) total += poisson_pmf(k, mu);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("extreme operating points underflow to zero, never NaN") {
    const double p = poisson_pmf(100, 2.0 / 3.0);
    CHECK(p >= 0.0);
    CHECK(p == doctest::Approx(std::exp(-404.95255303304657)));
    CHECK(std::isfinite(p));
  }
}

TEST_CASE("density factors") {
  scenario::BaseStation bs;
  bs.user_capacity = 300;
  scenario::DemandSnapshot area;
  area.active_users = 200;
  area.service_requests = 100;
  // mean utilisation 2/3, pmf evaluated at the request volume
  CHECK(phi_area(area, bs) ==
        doctest::Approx(std::exp(-404.95255303304657)).epsilon(1e-9));

  CHECK(phi_uav(10.0, 2, 50) ==
        doctest::Approx(std::exp(-73.00587133006803)).epsilon(1e-9));
  CHECK_THROWS_AS(phi_uav(10.0, 0, 50), std::domain_error);
  CHECK_THROWS_AS(phi_uav(-1.0, 2, 50), std::domain_error);
}

TEST_CASE("density constraint, explicit vectors") {
  SUBCASE("drops at high utilisation pull the residual down") {
    const std::vector<double> shares{0.8, 0.8, 0.8, 0.8};
    const std::vector<std::uint8_t> drops{0, 0, 0, 1};
    const auto c = density_constraint(shares, drops);
    CHECK(c.lhs == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(c.rhs == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(c.ok);
  }
  SUBCASE("drops at low utilisation break the constraint") {
    const std::vector<double> shares{0.2, 0.2, 0.2, 0.2, 0.2};
    const std::vector<std::uint8_t> drops{1, 0, 0, 0, 0};
    const auto c = density_constraint(shares, drops);
    CHECK(c.lhs == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(c.rhs == doctest::Approx(0.2).epsilon(1e-12));
    CHECK_FALSE(c.ok);
  }
  SUBCASE("no drops sit exactly on the boundary") {
    const std::vector<double> shares{0.3, 0.3};
    const std::vector<std::uint8_t> drops{0, 0};
    const auto c = density_constraint(shares, drops);
    CHECK(c.lhs == doctest::Approx(c.rhs).epsilon(1e-12));
    CHECK(c.ok);
  }
  SUBCASE("shape errors") {
    const std::vector<double> shares{0.5};
    const std::vector<std::uint8_t> none;
    CHECK_THROWS_AS(density_constraint(shares, none), std::invalid_argument);
    CHECK_THROWS_AS(
        density_constraint(std::span<const double>{},
                           std::span<const std::uint8_t>{}),
        std::invalid_argument);
  }
}

TEST_CASE("density constraint, station convenience form") {
  scenario::BaseStation bs; // capacity 300, 5% loss
  scenario::DemandSnapshot area;
  area.area_id = 2;
  area.hour = 13;
  area.active_users = 200;
  area.service_requests = 100;

  const auto a = density_constraint(area, bs, 42);
  const auto b = density_constraint(area, bs, 42);
  CHECK(a.ok == b.ok);
  CHECK(a.lhs == b.lhs);
  CHECK(a.rhs == b.rhs);
  CHECK(a.rhs == doctest::Approx(200.0 / 300.0).epsilon(1e-12));
  // above half utilisation a drop can only shrink the residual
  CHECK(a.ok);

  SUBCASE("different hours draw different drop streams") {
    scenario::DemandSnapshot other = area;
    other.hour = 14;
    const auto c = density_constraint(other, bs, 42);
    CHECK(c.rhs == a.rhs);
    // lhs may or may not differ; the constraint verdict stays positive
    CHECK(c.ok);
  }
  SUBCASE("nothing offered is trivially fine") {
    scenario::DemandSnapshot idle = area;
    idle.service_requests = 0;
    const auto c = density_constraint(idle, bs, 42);
    CHECK(c.ok);
    CHECK(c.lhs == 0.0);
    CHECK(c.rhs == 0.0);
  }
}

TEST_CASE("station energy bracket") {
  CHECK(energy_bs_terms(400.0, 1000.0, 500.0, 1.8e6) ==
        doctest::Approx(400.0 * (1000.0 + 500.0 - 1.8e6)).epsilon(1e-15));
  CHECK(energy_bs_terms(1.0, 2.0, 3.0, 4.0) == doctest::Approx(1.0));

  scenario::BaseStation bs; // e_per_load 400, charge 250 W for 2 h
  bs.solar_trace = {100.0, 200.0};
  CHECK(bs.charge_energy_j() == doctest::Approx(1.8e6));
  // hour 3 wraps to trace slot 1
  CHECK(energy_bs(bs, 50.0, 3) ==
        doctest::Approx(400.0 * (50.0 + 200.0 - 1.8e6)).epsilon(1e-12));
  bs.solar_trace.clear();
  CHECK(energy_bs(bs, 50.0, 3) ==
        doctest::Approx(400.0 * (50.0 - 1.8e6)).epsilon(1e-12));
}

TEST_CASE("drone energy kernels") {
  scenario::UavEnergyParams p; // 0.02 J/m, 1 J/s, 100 J/req, 2 h credit
  CHECK(energy_uav(p, 1000.0, 3600.0, 10.0) ==
        doctest::Approx(20.0 + 3600.0 + 1000.0 - 7200.0).epsilon(1e-12));
  CHECK(energy_uav(p, 0.0, 0.0, 0.0) == doctest::Approx(-7200.0));
  CHECK_THROWS_AS(energy_uav(p, -1.0, 0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(energy_uav(p, 0.0, -1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(energy_uav(p, 0.0, 0.0, -1.0), std::domain_error);

  CHECK(energy_travel(p, 1000.0, 60.0) == doctest::Approx(1200.0).epsilon(1e-12));
  CHECK(energy_travel(p, 0.0, 60.0) == 0.0);
  CHECK_THROWS_AS(energy_travel(p, -1.0, 60.0), std::domain_error);
}

TEST_CASE("backhaul relay energy") {
  scenario::RadioParams radio; // 10 dB gain, 3 links, coeff 0.5
  CHECK(energy_comm(radio) ==
        doctest::Approx(752.3653899189807).epsilon(1e-12));
  radio.n_links = 1;
  CHECK(energy_comm(radio) ==
        doctest::Approx(250.7884633063269).epsilon(1e-12));
}

TEST_CASE("energy breakdown aggregates") {
  scenario::CostWeights w; // 1e-4, 1e-4, 1e-4, 1e-3
  const auto b = EnergyBreakdown::make(1000.0, 2000.0, 300.0, 400.0, w);
  CHECK(b.e_total_area == doctest::Approx(-0.1 + 0.03 + 0.4).epsilon(1e-12));
  CHECK(b.e_total_uav == doctest::Approx(0.2 + 0.03 + 0.4).epsilon(1e-12));
  CHECK(b.e_bs == 1000.0);
  CHECK(b.e_uav == 2000.0);
}

TEST_CASE("per-area cost") {
  scenario::CostWeights w;
  scenario::BaseStation bs;
  scenario::DemandSnapshot area;
  area.active_users = 10;
  area.service_requests = 2;
  const auto e = EnergyBreakdown::make(1000.0, 2000.0, 300.0, 400.0, w);

  const double mean_util = 10.0 / 300.0;
  const double pmf =
      std::exp(2.0 * std::log(mean_util) - mean_util - std::lgamma(3.0));
  const double bracket = 1.0 * 2.0 + 1.0 * 300.0 + e.e_total_area;
  CHECK(cost_area(area, bs, 1.5, e, w, true) ==
        doctest::Approx(pmf * 1.5 * bracket).epsilon(1e-12));
  CHECK(cost_area(area, bs, 1.5, e, w, false) == 0.0);
}

TEST_CASE("per-drone cost") {
  scenario::CostWeights w;
  scenario::Uav uav;
  scenario::DemandSnapshot area;
  area.active_users = 10;
  area.service_requests = 2;
  const auto e = EnergyBreakdown::make(1000.0, 2000.0, 300.0, 400.0, w);

  const double bracket = 1.0 * 2.0 + 1.0 * 10.0 + e.e_total_uav;
  CHECK(cost_uav(area, uav, 100.0, 0.25, e, w, 3.0, true) ==
        doctest::Approx(0.25 * 1e6 * bracket).epsilon(1e-12));
  // cubic distance scaling
  const double near = cost_uav(area, uav, 100.0, 0.25, e, w, 3.0, true);
  const double far = cost_uav(area, uav, 200.0, 0.25, e, w, 3.0, true);
  CHECK(far == doctest::Approx(8.0 * near).epsilon(1e-12));
  CHECK(cost_uav(area, uav, 100.0, 0.25, e, w, 3.0, false) == 0.0);
  CHECK_THROWS_AS(cost_uav(area, uav, -1.0, 0.25, e, w, 3.0, true),
                  std::domain_error);
}

TEST_CASE("network objective") {
  scenario::CostWeights w; // backend 1
  const std::vector<double> uav_costs{1.0, 2.0};
  const std::vector<double> area_costs{3.0, 4.0};
  const std::vector<double> p{0.5, 0.5};
  CHECK(cost_overall(uav_costs, area_costs, p, w, 2) ==
        doctest::Approx(2.5 + 4.0).epsilon(1e-12));
  CHECK(cost_overall(uav_costs, area_costs, p, w, 1) ==
        doctest::Approx(2.5 + 8.0).epsilon(1e-12));
  CHECK_THROWS_AS(cost_overall({}, area_costs, p, w, 1), std::invalid_argument);
  CHECK_THROWS_AS(cost_overall(uav_costs, {}, {}, w, 1), std::invalid_argument);
  CHECK_THROWS_AS(cost_overall(uav_costs, area_costs, {}, w, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(cost_overall(uav_costs, area_costs, p, w, 0),
                  std::domain_error);

  SUBCASE("matches a monolithic recomputation on random inputs") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
      const int nu = rng.uniform_int(1, 8);
      const int na = rng.uniform_int(1, 8);
      const int fleet = rng.uniform_int(1, 5);
      std::vector<double> uc, ac, pl;
      for (int i = 0; i < nu; ++i) uc.push_back(rng.uniform(-5.0, 50.0));
      for (int j = 0; j < na; ++j) {
        ac.push_back(rng.uniform(-5.0, 50.0));
        pl.push_back(rng.uniform(0.0, 10.0));
      }
      scenario::CostWeights wr;
      wr.backend_cost = rng.uniform(0.0, 3.0);

      double drone = 0.0;
      for (double c : uc) drone += c + wr.backend_cost;
      drone /= nu;
      double area = 0.0;
      for (int j = 0; j < na; ++j) area += ac[j] + pl[j];
      area /= fleet;

      const double got = cost_overall(uc, ac, pl, wr, fleet);
      CHECK(got == doctest::Approx(drone + area).epsilon(1e-12));
    }
  }
}
