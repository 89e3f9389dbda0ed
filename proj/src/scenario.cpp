#include "uavgrid/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "uavgrid/csv.hpp"
#include "uavgrid/errors.hpp"
#include "uavgrid/rng.hpp"

namespace uavgrid::scenario {

namespace {

[[noreturn]] void bad_field(const char* name, const std::string& why) {
  throw std::invalid_argument(std::string(name) + ": " + why);
}

void require_pos(double v, const char* name) {
  if (!(v > 0.0)) bad_field(name, "must be positive");
}

void require_nonneg(double v, const char* name) {
  if (!(v >= 0.0)) bad_field(name, "must be nonnegative");
}

void require_pos(int v, const char* name) {
  if (v <= 0) bad_field(name, "must be positive");
}

}  // namespace

void RadioParams::validate() const {
  require_pos(bandwidth_hz, "radio.bandwidth_hz");
  require_pos(tx_power_w, "radio.tx_power_w");
  require_pos(geometry_const, "radio.geometry_const");
  if (path_loss_exp < 2.0 || path_loss_exp > 6.0)
    bad_field("radio.path_loss_exp", "expected within [2, 6]");
  require_nonneg(comm_energy_coeff, "radio.comm_energy_coeff");
  require_pos(n_links, "radio.n_links");
}

void TrafficModel::validate() const {
  require_pos(arrival_rate_req_s, "traffic.arrival_rate_req_s");
  require_pos(mean_packet_bits, "traffic.mean_packet_bits");
  if (extra_users < 0) bad_field("traffic.extra_users", "must be nonnegative");
}

void CostWeights::validate() const {
  require_nonneg(zeta1, "weights.zeta1");
  require_nonneg(zeta2, "weights.zeta2");
  require_nonneg(w_bs, "weights.w_bs");
  require_nonneg(w_uav, "weights.w_uav");
  require_nonneg(w_travel, "weights.w_travel");
  require_nonneg(w_comm, "weights.w_comm");
  require_nonneg(backend_cost, "weights.backend_cost");
  require_nonneg(penalty_weight, "weights.penalty_weight");
  require_nonneg(lstm_weight, "weights.lstm_weight");
}

void LosGeometry::validate() const {
  require_pos(altitude_m, "los.altitude_m");
  if (!(min_elev_rad >= 0.0 && min_elev_rad < max_elev_rad))
    bad_field("los.min_elev_rad", "need 0 <= min_elev < max_elev");
  if (!(max_elev_rad <= std::numbers::pi / 2))
    bad_field("los.max_elev_rad", "must not exceed pi/2");
  require_pos(max_radius_m, "los.max_radius_m");
  require_pos(cell_length_m, "los.cell_length_m");
}

void UavEnergyParams::validate() const {
  require_nonneg(e_per_m, "uav_energy.e_per_m");
  require_nonneg(e_per_s, "uav_energy.e_per_s");
  require_nonneg(e_per_load, "uav_energy.e_per_load");
  require_nonneg(e_travel_per_m, "uav_energy.e_travel_per_m");
  require_nonneg(charge_time_h, "uav_energy.charge_time_h");
}

void BsEnergyParams::validate() const {
  require_pos(user_capacity, "bs_defaults.user_capacity");
  require_pos(battery_capacity_j, "bs_defaults.battery_capacity_j");
  require_pos(energy_per_load, "bs_defaults.energy_per_load");
  require_nonneg(charge_time_h, "bs_defaults.charge_time_h");
  require_nonneg(charge_power_w, "bs_defaults.charge_power_w");
  if (packet_loss_frac < 0.0 || packet_loss_frac > 1.0)
    bad_field("bs_defaults.packet_loss_frac", "expected within [0, 1]");
}

void FleetParams::validate() const {
  require_pos(capacity_reqs, "fleet.capacity_reqs");
  require_pos(speed_m_s, "fleet.speed_m_s");
  require_pos(battery_capacity_j, "fleet.battery_capacity_j");
}

void SynthParams::validate() const {
  require_pos(base_users, "synth.base_users");
  require_nonneg(solar_peak_j, "synth.solar_peak_j");
  if (grid_res < 2) bad_field("synth.grid_res", "need at least 2");
}

void ScenarioConfig::validate() const {
  if (n_uavs < 0) bad_field("n_uavs", "must be nonnegative");
  require_pos(n_areas, "n_areas");
  require_pos(horizon_hours, "horizon_hours");
  radio.validate();
  traffic.validate();
  weights.validate();
  los.validate();
  uav_energy.validate();
  bs_defaults.validate();
  fleet.validate();
  synth.validate();
  if (synth.base_users + traffic.extra_users >
      bs_defaults.user_capacity * 64)
    bad_field("synth.base_users", "demand out of scale for station capacity");
}

// --- json ------------------------------------------------------------------

namespace {

using nlohmann::json;

json to_json(const RadioParams& r) {
  return {{"bandwidth_hz", r.bandwidth_hz},
          {"tx_power_w", r.tx_power_w},
          {"geometry_const", r.geometry_const},
          {"path_loss_exp", r.path_loss_exp},
          {"noise_psd_dbm_hz", r.noise_psd_dbm_hz},
          {"channel_gain_db", r.channel_gain_db},
          {"comm_energy_coeff", r.comm_energy_coeff},
          {"n_links", r.n_links}};
}

json to_json(const TrafficModel& t) {
  return {{"arrival_rate_req_s", t.arrival_rate_req_s},
          {"mean_packet_bits", t.mean_packet_bits},
          {"extra_users", t.extra_users}};
}

json to_json(const CostWeights& w) {
  return {{"zeta1", w.zeta1},
          {"zeta2", w.zeta2},
          {"w_bs", w.w_bs},
          {"w_uav", w.w_uav},
          {"w_travel", w.w_travel},
          {"w_comm", w.w_comm},
          {"backend_cost", w.backend_cost},
          {"penalty_weight", w.penalty_weight},
          {"lstm_weight", w.lstm_weight}};
}

json to_json(const LosGeometry& l) {
  return {{"altitude_m", l.altitude_m},
          {"min_elev_rad", l.min_elev_rad},
          {"max_elev_rad", l.max_elev_rad},
          {"max_radius_m", l.max_radius_m},
          {"cell_length_m", l.cell_length_m}};
}

json to_json(const UavEnergyParams& u) {
  return {{"e_per_m", u.e_per_m},
          {"e_per_s", u.e_per_s},
          {"e_per_load", u.e_per_load},
          {"e_travel_per_m", u.e_travel_per_m},
          {"charge_time_h", u.charge_time_h}};
}

json to_json(const BsEnergyParams& b) {
  return {{"user_capacity", b.user_capacity},
          {"battery_capacity_j", b.battery_capacity_j},
          {"energy_per_load", b.energy_per_load},
          {"charge_time_h", b.charge_time_h},
          {"charge_power_w", b.charge_power_w},
          {"packet_loss_frac", b.packet_loss_frac}};
}

json to_json(const FleetParams& f) {
  return {{"capacity_reqs", f.capacity_reqs},
          {"speed_m_s", f.speed_m_s},
          {"battery_capacity_j", f.battery_capacity_j}};
}

json to_json(const SynthParams& s) {
  return {{"base_users", s.base_users},
          {"solar_peak_j", s.solar_peak_j},
          {"grid_res", s.grid_res}};
}

// Missing keys keep their defaults; unknown keys are rejected so typos fail
// loudly instead of silently running the default.
void check_keys(const json& j, std::initializer_list<const char*> known,
                const char* section) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return key == k;
        }) == known.end())
      throw std::invalid_argument(std::string(section) + ": unknown key '" + key +
                                  "'");
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void from_json(const json& j, RadioParams& r) {
  check_keys(j,
             {"bandwidth_hz", "tx_power_w", "geometry_const", "path_loss_exp",
              "noise_psd_dbm_hz", "channel_gain_db", "comm_energy_coeff",
              "n_links"},
             "radio");
  get_to(j, "bandwidth_hz", r.bandwidth_hz);
  get_to(j, "tx_power_w", r.tx_power_w);
  get_to(j, "geometry_const", r.geometry_const);
  get_to(j, "path_loss_exp", r.path_loss_exp);
  get_to(j, "noise_psd_dbm_hz", r.noise_psd_dbm_hz);
  get_to(j, "channel_gain_db", r.channel_gain_db);
  get_to(j, "comm_energy_coeff", r.comm_energy_coeff);
  get_to(j, "n_links", r.n_links);
}

void from_json(const json& j, TrafficModel& t) {
  check_keys(j, {"arrival_rate_req_s", "mean_packet_bits", "extra_users"},
             "traffic");
  get_to(j, "arrival_rate_req_s", t.arrival_rate_req_s);
  get_to(j, "mean_packet_bits", t.mean_packet_bits);
  get_to(j, "extra_users", t.extra_users);
}

void from_json(const json& j, CostWeights& w) {
  check_keys(j,
             {"zeta1", "zeta2", "w_bs", "w_uav", "w_travel", "w_comm",
              "backend_cost", "penalty_weight", "lstm_weight"},
             "weights");
  get_to(j, "zeta1", w.zeta1);
  get_to(j, "zeta2", w.zeta2);
  get_to(j, "w_bs", w.w_bs);
  get_to(j, "w_uav", w.w_uav);
  get_to(j, "w_travel", w.w_travel);
  get_to(j, "w_comm", w.w_comm);
  get_to(j, "backend_cost", w.backend_cost);
  get_to(j, "penalty_weight", w.penalty_weight);
  get_to(j, "lstm_weight", w.lstm_weight);
}

void from_json(const json& j, LosGeometry& l) {
  check_keys(j,
             {"altitude_m", "min_elev_rad", "max_elev_rad", "max_radius_m",
              "cell_length_m"},
             "los");
  get_to(j, "altitude_m", l.altitude_m);
  get_to(j, "min_elev_rad", l.min_elev_rad);
  get_to(j, "max_elev_rad", l.max_elev_rad);
  get_to(j, "max_radius_m", l.max_radius_m);
  get_to(j, "cell_length_m", l.cell_length_m);
}

void from_json(const json& j, UavEnergyParams& u) {
  check_keys(
      j, {"e_per_m", "e_per_s", "e_per_load", "e_travel_per_m", "charge_time_h"},
      "uav_energy");
  get_to(j, "e_per_m", u.e_per_m);
  get_to(j, "e_per_s", u.e_per_s);
  get_to(j, "e_per_load", u.e_per_load);
  get_to(j, "e_travel_per_m", u.e_travel_per_m);
  get_to(j, "charge_time_h", u.charge_time_h);
}

void from_json(const json& j, BsEnergyParams& b) {
  check_keys(j,
             {"user_capacity", "battery_capacity_j", "energy_per_load",
              "charge_time_h", "charge_power_w", "packet_loss_frac"},
             "bs_defaults");
  get_to(j, "user_capacity", b.user_capacity);
  get_to(j, "battery_capacity_j", b.battery_capacity_j);
  get_to(j, "energy_per_load", b.energy_per_load);
  get_to(j, "charge_time_h", b.charge_time_h);
  get_to(j, "charge_power_w", b.charge_power_w);
  get_to(j, "packet_loss_frac", b.packet_loss_frac);
}

void from_json(const json& j, FleetParams& f) {
  check_keys(j, {"capacity_reqs", "speed_m_s", "battery_capacity_j"}, "fleet");
  get_to(j, "capacity_reqs", f.capacity_reqs);
  get_to(j, "speed_m_s", f.speed_m_s);
  get_to(j, "battery_capacity_j", f.battery_capacity_j);
}

void from_json(const json& j, SynthParams& s) {
  check_keys(j, {"base_users", "solar_peak_j", "grid_res"}, "synth");
  get_to(j, "base_users", s.base_users);
  get_to(j, "solar_peak_j", s.solar_peak_j);
  get_to(j, "grid_res", s.grid_res);
}

}  // namespace

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  check_keys(j,
             {"n_uavs", "n_areas", "horizon_hours", "rng_seed", "radio",
              "traffic", "weights", "los", "uav_energy", "bs_defaults", "fleet",
              "synth"},
             "config");
  ScenarioConfig cfg;
  get_to(j, "n_uavs", cfg.n_uavs);
  get_to(j, "n_areas", cfg.n_areas);
  get_to(j, "horizon_hours", cfg.horizon_hours);
  get_to(j, "rng_seed", cfg.rng_seed);
  if (j.contains("radio")) from_json(j.at("radio"), cfg.radio);
  if (j.contains("traffic")) from_json(j.at("traffic"), cfg.traffic);
  if (j.contains("weights")) from_json(j.at("weights"), cfg.weights);
  if (j.contains("los")) from_json(j.at("los"), cfg.los);
  if (j.contains("uav_energy")) from_json(j.at("uav_energy"), cfg.uav_energy);
  if (j.contains("bs_defaults")) from_json(j.at("bs_defaults"), cfg.bs_defaults);
  if (j.contains("fleet")) from_json(j.at("fleet"), cfg.fleet);
  if (j.contains("synth")) from_json(j.at("synth"), cfg.synth);
  cfg.validate();
  return cfg;
}

void save_config(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  json j{{"n_uavs", cfg.n_uavs},
         {"n_areas", cfg.n_areas},
         {"horizon_hours", cfg.horizon_hours},
         {"rng_seed", cfg.rng_seed},
         {"radio", to_json(cfg.radio)},
         {"traffic", to_json(cfg.traffic)},
         {"weights", to_json(cfg.weights)},
         {"los", to_json(cfg.los)},
         {"uav_energy", to_json(cfg.uav_energy)},
         {"bs_defaults", to_json(cfg.bs_defaults)},
         {"fleet", to_json(cfg.fleet)},
         {"synth", to_json(cfg.synth)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path.string());
  out << j.dump(2) << '\n';
}

// --- solar trace -----------------------------------------------------------

namespace {
constexpr int kDays = 365;
constexpr int kHoursPerDay = 24;
constexpr int kYearHours = kDays * kHoursPerDay;
}  // namespace

std::vector<std::vector<double>> load_solar_trace(const std::filesystem::path& path,
                                                  int station_count) {
  if (station_count <= 0)
    throw std::invalid_argument("station_count must be positive");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace: " + path.string());

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty trace file", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "station,day,hour,energy_j")
    throw ParseError("expected header station,day,hour,energy_j", lineno);

  std::vector<std::vector<double>> traces;
  std::vector<std::vector<std::uint8_t>> seen;
  std::vector<int> ids;  // observed station id per dense index

  auto station_index = [&](long long id) -> std::size_t {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return i;
    ids.push_back(static_cast<int>(id));
    traces.emplace_back(kYearHours, 0.0);
    seen.emplace_back(kYearHours, std::uint8_t{0});
    return ids.size() - 1;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split(line);
    if (fields.size() != 4)
      throw ParseError("expected 4 fields, got " + std::to_string(fields.size()),
                       lineno);
    long long station = 0, day = 0, hour = 0;
    double energy = 0.0;
    if (!csv::parse_int(fields[0], station))
      throw ParseError("bad station id", lineno);
    if (!csv::parse_int(fields[1], day) || day < 1 || day > kDays)
      throw ParseError("day out of range 1..365", lineno);
    if (!csv::parse_int(fields[2], hour) || hour < 0 || hour >= kHoursPerDay)
      throw ParseError("hour out of range 0..23", lineno);
    if (!csv::parse_double(fields[3], energy) || !(energy >= 0.0) ||
        !std::isfinite(energy))
      throw ParseError("bad energy_j", lineno);

    const std::size_t s = station_index(station);
    const std::size_t idx =
        static_cast<std::size_t>(day - 1) * kHoursPerDay + static_cast<std::size_t>(hour);
    if (seen[s][idx])
      throw DuplicationError("duplicate row for station " +
                             std::to_string(station) + " day " +
                             std::to_string(day) + " hour " + std::to_string(hour));
    seen[s][idx] = 1;
    traces[s][idx] = energy;
  }

  if (static_cast<int>(ids.size()) != station_count)
    throw ShapeError("trace covers " + std::to_string(ids.size()) +
                     " stations, expected " + std::to_string(station_count));
  for (std::size_t s = 0; s < seen.size(); ++s) {
    std::size_t have = 0;
    for (auto b : seen[s]) have += b;
    if (have != kYearHours)
      throw ShapeError("station " + std::to_string(ids[s]) + " has " +
                       std::to_string(have) + " of " + std::to_string(kYearHours) +
                       " hours");
  }

  // order rows by observed station id so the result is input-order agnostic
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  std::vector<std::vector<double>> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(std::move(traces[i]));
  return out;
}

void write_solar_trace(const std::vector<std::vector<double>>& traces,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path.string());
  out << "station,day,hour,energy_j\n";
  for (std::size_t s = 0; s < traces.size(); ++s) {
    if (traces[s].size() != kYearHours)
      throw ShapeError("trace for station " + std::to_string(s) +
                       " is not a dense year");
    for (int d = 0; d < kDays; ++d)
      for (int h = 0; h < kHoursPerDay; ++h)
        out << s << ',' << (d + 1) << ',' << h << ','
            << csv::num(traces[s][static_cast<std::size_t>(d) * kHoursPerDay + h])
            << '\n';
  }
}

// --- synthesis -------------------------------------------------------------

std::vector<double> synth_solar(std::uint64_t seed, int days, double peak_j) {
  if (days <= 0) throw std::invalid_argument("days must be positive");
  if (peak_j < 0.0) throw std::invalid_argument("peak_j must be nonnegative");
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(days) * kHoursPerDay);
  Rng day_rng(derive_seed(seed, "solar.day"));
  Rng hour_rng(derive_seed(seed, "solar.hour"));
  for (int d = 0; d < days; ++d) {
    // one weather factor per day, jitter per hour
    const double weather = day_rng.uniform(0.25, 1.0);
    for (int h = 0; h < kHoursPerDay; ++h) {
      const double jitter = hour_rng.uniform(0.85, 1.2);
      double e = 0.0;
      if (h >= 6 && h < 18) {
        const double phase = (h - 6 + 0.5) / 12.0;  // mid-hour sampling
        e = peak_j * std::sin(std::numbers::pi * phase) * weather * jitter;
      }
      trace.push_back(e);
    }
  }
  return trace;
}

std::vector<DemandSnapshot> synth_demand(std::uint64_t seed, int n_areas, int hours,
                                         const SynthParams& synth,
                                         const TrafficModel& traffic,
                                         const LosGeometry& los) {
  if (n_areas <= 0 || hours <= 0)
    throw std::invalid_argument("n_areas and hours must be positive");
  synth.validate();
  std::vector<DemandSnapshot> out;
  out.reserve(static_cast<std::size_t>(n_areas) * hours);
  for (int h = 0; h < hours; ++h) {
    const int hod = h % kHoursPerDay;
    // evening peak at 19:00, trough just after dawn
    const double diurnal = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                                 (hod - 7.0) / kHoursPerDay));
    for (int a = 0; a < n_areas; ++a) {
      Rng rng(derive_seed(seed, "demand", (static_cast<std::uint64_t>(h) << 16) ^
                                              static_cast<std::uint64_t>(a)));
      DemandSnapshot snap;
      snap.area_id = a;
      snap.hour = h;
      const double shape = 0.35 + 0.65 * diurnal;
      snap.active_users = static_cast<int>(
          std::lround(synth.base_users * shape * rng.uniform(0.9, 1.0)));
      snap.active_users += traffic.extra_users;
      snap.service_requests = static_cast<int>(std::lround(
          snap.active_users * rng.uniform(0.45, 0.55)));
      const Vec2 center = area_center(los, a);
      snap.user_positions_m.reserve(static_cast<std::size_t>(snap.active_users));
      for (int u = 0; u < snap.active_users; ++u) {
        // uniform over the service disc
        const double r = los.max_radius_m * std::sqrt(rng.uniform());
        const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
        snap.user_positions_m.push_back(
            {center.x + r * std::cos(ang), center.y + r * std::sin(ang)});
      }
      out.push_back(std::move(snap));
    }
  }
  return out;
}

void write_demand_csv(const std::vector<DemandSnapshot>& snaps,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write demand: " + path.string());
  out << "area,hour,users,requests\n";
  for (const auto& s : snaps)
    out << s.area_id << ',' << s.hour << ',' << s.active_users << ','
        << s.service_requests << '\n';
}

std::vector<DemandSnapshot> load_demand_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open demand: " + path.string());

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty demand file", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "area,hour,users,requests")
    throw ParseError("expected header area,hour,users,requests", lineno);

  struct Row {
    int users = 0;
    int requests = 0;
  };
  std::map<std::pair<int, int>, Row> rows;  // (area, hour) keyed
  int max_area = -1, max_hour = -1;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split(line);
    if (fields.size() != 4)
      throw ParseError("expected 4 fields, got " + std::to_string(fields.size()),
                       lineno);
    long long area = 0, hour = 0, users = 0, requests = 0;
    if (!csv::parse_int(fields[0], area) || area < 0)
      throw ParseError("bad area id", lineno);
    if (!csv::parse_int(fields[1], hour) || hour < 0)
      throw ParseError("bad hour", lineno);
    if (!csv::parse_int(fields[2], users) || users < 0)
      throw ParseError("bad user count", lineno);
    if (!csv::parse_int(fields[3], requests) || requests < 0)
      throw ParseError("bad request count", lineno);

    const auto key = std::make_pair(static_cast<int>(area), static_cast<int>(hour));
    if (!rows.emplace(key, Row{static_cast<int>(users), static_cast<int>(requests)})
             .second)
      throw DuplicationError("duplicate row for area " + std::to_string(area) +
                             " hour " + std::to_string(hour));
    max_area = std::max(max_area, static_cast<int>(area));
    max_hour = std::max(max_hour, static_cast<int>(hour));
  }
  if (rows.empty()) throw ShapeError("demand file holds no rows");

  const int n_areas = max_area + 1;
  const int hours = max_hour + 1;
  if (rows.size() != static_cast<std::size_t>(n_areas) * hours)
    throw ShapeError("demand covers " + std::to_string(rows.size()) + " of " +
                     std::to_string(static_cast<std::size_t>(n_areas) * hours) +
                     " area-hours");

  std::vector<DemandSnapshot> out;
  out.reserve(rows.size());
  for (int h = 0; h < hours; ++h)
    for (int a = 0; a < n_areas; ++a) {
      const auto it = rows.find({a, h});
      if (it == rows.end())
        throw ShapeError("missing row for area " + std::to_string(a) + " hour " +
                         std::to_string(h));
      DemandSnapshot snap;
      snap.area_id = a;
      snap.hour = h;
      snap.active_users = it->second.users;
      snap.service_requests = it->second.requests;
      out.push_back(std::move(snap));
    }
  return out;
}

// --- world construction ----------------------------------------------------

std::vector<BaseStation> make_stations(const ScenarioConfig& cfg,
                                       const std::vector<std::vector<double>>& traces) {
  if (!traces.empty() && static_cast<int>(traces.size()) != cfg.n_areas)
    throw ShapeError("trace count " + std::to_string(traces.size()) +
                     " does not match n_areas " + std::to_string(cfg.n_areas));
  std::vector<BaseStation> stations;
  stations.reserve(static_cast<std::size_t>(cfg.n_areas));
  for (int i = 0; i < cfg.n_areas; ++i) {
    BaseStation bs;
    bs.id = i;
    bs.position_m = area_center(cfg.los, i);
    bs.user_capacity = cfg.bs_defaults.user_capacity;
    bs.battery_capacity_j = cfg.bs_defaults.battery_capacity_j;
    bs.battery_j = cfg.bs_defaults.battery_capacity_j;
    bs.energy_per_load = cfg.bs_defaults.energy_per_load;
    bs.charge_time_h = cfg.bs_defaults.charge_time_h;
    bs.charge_power_w = cfg.bs_defaults.charge_power_w;
    bs.packet_loss_frac = cfg.bs_defaults.packet_loss_frac;
    if (!traces.empty()) bs.solar_trace = traces[static_cast<std::size_t>(i)];
    stations.push_back(std::move(bs));
  }
  return stations;
}

std::vector<Uav> make_fleet(const ScenarioConfig& cfg,
                            const std::vector<BaseStation>& stations) {
  if (stations.empty() && cfg.n_uavs > 0)
    throw std::invalid_argument("fleet needs at least one station pad");
  std::vector<Uav> fleet;
  fleet.reserve(static_cast<std::size_t>(cfg.n_uavs));
  for (int i = 0; i < cfg.n_uavs; ++i) {
    Uav u;
    u.id = i;
    u.home_station = i % static_cast<int>(stations.size());
    u.position_m = stations[static_cast<std::size_t>(u.home_station)].position_m;
    u.altitude_m = cfg.los.altitude_m;
    u.capacity_reqs = cfg.fleet.capacity_reqs;
    u.battery_capacity_j = cfg.fleet.battery_capacity_j;
    u.battery_j = cfg.fleet.battery_capacity_j;
    u.speed_m_s = cfg.fleet.speed_m_s;
    fleet.push_back(u);
  }
  return fleet;
}

}  // namespace uavgrid::scenario
