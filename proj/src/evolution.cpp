#include "uavgrid/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "uavgrid/cost.hpp"
#include "uavgrid/csv.hpp"
#include "uavgrid/errors.hpp"
#include "uavgrid/radio.hpp"

namespace uavgrid::evo {

namespace {

constexpr double kDivergedPenalty = 1e9;

std::uint64_t hash_bytes(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_double(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return hash_bytes(h, &bits, sizeof bits);
}

std::uint64_t hash_int(std::uint64_t h, std::int64_t v) {
  return hash_bytes(h, &v, sizeof v);
}

// sorted id lists, no empty areas; keeps ==, hashing, and serialization
// representation-independent
void canonicalize(Genome& g) {
  for (auto it = g.allocation.begin(); it != g.allocation.end();) {
    std::sort(it->second.begin(), it->second.end());
    it->second.erase(std::unique(it->second.begin(), it->second.end()),
                     it->second.end());
    it = it->second.empty() ? g.allocation.erase(it) : std::next(it);
  }
}

}  // namespace

std::uint64_t Genome::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  h = hash_double(h, learning_rate);
  h = hash_int(h, hidden_layers);
  h = hash_int(h, neurons_per_layer);
  h = hash_int(h, static_cast<int>(activation));
  h = hash_double(h, dropout_rate);
  h = hash_int(h, lstm_units);
  h = hash_double(h, forget_bias);
  for (const auto& [area, ids] : allocation) {
    h = hash_int(h, area);
    for (int id : ids) h = hash_int(h, id);
    h = hash_int(h, -9);  // area terminator
  }
  return mix64(h);
}

std::vector<int> Genome::assignment(int n_uavs) const {
  std::vector<int> out(static_cast<std::size_t>(n_uavs), -1);
  for (const auto& [area, ids] : allocation)
    for (int id : ids)
      if (id >= 0 && id < n_uavs && out[static_cast<std::size_t>(id)] == -1)
        out[static_cast<std::size_t>(id)] = area;
  return out;
}

int Genome::assigned_count() const {
  int n = 0;
  for (const auto& [area, ids] : allocation) n += static_cast<int>(ids.size());
  return n;
}

void GeneRanges::validate() const {
  auto bad = [](const char* m) { throw std::invalid_argument(m); };
  if (!(lr_min > 0.0 && lr_min <= lr_max)) bad("ranges: learning rate bounds");
  if (layers_min < 1 || layers_min > layers_max) bad("ranges: layer bounds");
  if (neurons_min < 1 || neurons_min > neurons_max) bad("ranges: neuron bounds");
  if (dropout_min < 0.0 || dropout_min > dropout_max || dropout_max >= 1.0)
    bad("ranges: dropout bounds");
  if (units_min < 1 || units_min > units_max) bad("ranges: unit bounds");
  if (!(fbias_min <= fbias_max)) bad("ranges: forget-bias bounds");
  for (double v : lr_choices)
    if (v < lr_min || v > lr_max) bad("ranges: lr choice outside range");
  for (int v : unit_choices)
    if (v < units_min || v > units_max) bad("ranges: unit choice outside range");
  for (double v : fbias_choices)
    if (v < fbias_min || v > fbias_max) bad("ranges: forget-bias choice outside range");
}

void GaConfig::validate() const {
  auto bad = [](const char* m) { throw std::invalid_argument(m); };
  if (population_size < 2) bad("ga: population_size must be at least 2");
  if (elitism < 0 || elitism >= population_size)
    bad("ga: elitism must be below population_size");
  if (tournament_size < 1 || tournament_size > population_size)
    bad("ga: tournament_size must lie in [1, population_size]");
  if (crossover_prob < 0.0 || crossover_prob > 1.0)
    bad("ga: crossover_prob must lie in [0, 1]");
  if (mutation_prob < 0.0 || mutation_prob > 1.0)
    bad("ga: mutation_prob must lie in [0, 1]");
  if (max_generations < 1) bad("ga: max_generations must be positive");
  if (stall_patience < 1) bad("ga: stall_patience must be positive");
  if (train_hours < 48) bad("ga: train_hours must be at least 48");
  if (inner_epochs < 1 || inner_patience < 1)
    bad("ga: inner training budget must be positive");
  if (eval_hours < 1) bad("ga: eval_hours must be positive");
  ranges.validate();
}

Genome random_genome(const GeneRanges& r, int n_uavs, int n_areas, Rng& rng) {
  Genome g;
  g.learning_rate = r.lr_choices.empty()
                        ? rng.log_uniform(r.lr_min, r.lr_max)
                        : r.lr_choices[static_cast<std::size_t>(rng.uniform_int(
                              0, static_cast<std::int64_t>(r.lr_choices.size()) - 1))];
  g.hidden_layers = static_cast<int>(rng.uniform_int(r.layers_min, r.layers_max));
  g.neurons_per_layer =
      static_cast<int>(rng.uniform_int(r.neurons_min, r.neurons_max));
  g.activation = r.act_choices.empty()
                     ? static_cast<Activation>(rng.uniform_int(0, 2))
                     : r.act_choices[static_cast<std::size_t>(rng.uniform_int(
                           0, static_cast<std::int64_t>(r.act_choices.size()) - 1))];
  g.dropout_rate = rng.uniform(r.dropout_min, r.dropout_max);
  g.lstm_units = r.unit_choices.empty()
                     ? static_cast<int>(rng.uniform_int(r.units_min, r.units_max))
                     : r.unit_choices[static_cast<std::size_t>(rng.uniform_int(
                           0, static_cast<std::int64_t>(r.unit_choices.size()) - 1))];
  g.forget_bias = r.fbias_choices.empty()
                      ? rng.uniform(r.fbias_min, r.fbias_max)
                      : r.fbias_choices[static_cast<std::size_t>(rng.uniform_int(
                            0, static_cast<std::int64_t>(r.fbias_choices.size()) - 1))];
  for (int i = 0; i < n_uavs; ++i) {
    const int area = static_cast<int>(rng.uniform_int(-1, n_areas - 1));
    if (area >= 0) g.allocation[area].push_back(i);
  }
  canonicalize(g);
  return g;
}

std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng) {
  Genome c1 = a, c2 = b;
  auto swap_if = [&](auto& x, auto& y) {
    if (rng.bernoulli(0.5)) std::swap(x, y);
  };
  swap_if(c1.learning_rate, c2.learning_rate);
  swap_if(c1.hidden_layers, c2.hidden_layers);
  swap_if(c1.neurons_per_layer, c2.neurons_per_layer);
  swap_if(c1.activation, c2.activation);
  swap_if(c1.dropout_rate, c2.dropout_rate);
  swap_if(c1.lstm_units, c2.lstm_units);
  swap_if(c1.forget_bias, c2.forget_bias);

  // per-area exchange of drone lists
  std::vector<int> areas;
  for (const auto& [area, ids] : a.allocation) areas.push_back(area);
  for (const auto& [area, ids] : b.allocation)
    if (!a.allocation.contains(area)) areas.push_back(area);
  std::sort(areas.begin(), areas.end());
  for (int area : areas) {
    if (!rng.bernoulli(0.5)) continue;
    auto ga = c1.allocation.find(area);
    auto gb = c2.allocation.find(area);
    std::vector<int> la = ga == c1.allocation.end() ? std::vector<int>{} : ga->second;
    std::vector<int> lb = gb == c2.allocation.end() ? std::vector<int>{} : gb->second;
    if (lb.empty()) c1.allocation.erase(area); else c1.allocation[area] = lb;
    if (la.empty()) c2.allocation.erase(area); else c2.allocation[area] = la;
  }

  // repair: a drone doubly assigned after the exchange keeps its
  // lowest-area claim
  auto repair = [](Genome& g) {
    std::vector<int> seen;
    for (auto& [area, ids] : g.allocation) {
      std::vector<int> kept;
      for (int id : ids)
        if (std::find(seen.begin(), seen.end(), id) == seen.end()) {
          kept.push_back(id);
          seen.push_back(id);
        }
      ids = std::move(kept);
    }
    canonicalize(g);
  };
  repair(c1);
  repair(c2);
  return {std::move(c1), std::move(c2)};
}

void mutate(Genome& g, const GeneRanges& r, int n_uavs, int n_areas,
            double per_gene_prob, Rng& rng) {
  if (rng.bernoulli(per_gene_prob))
    g.learning_rate =
        r.lr_choices.empty()
            ? rng.log_uniform(r.lr_min, r.lr_max)
            : r.lr_choices[static_cast<std::size_t>(rng.uniform_int(
                  0, static_cast<std::int64_t>(r.lr_choices.size()) - 1))];
  if (rng.bernoulli(per_gene_prob))
    g.hidden_layers = static_cast<int>(rng.uniform_int(r.layers_min, r.layers_max));
  if (rng.bernoulli(per_gene_prob))
    g.neurons_per_layer =
        static_cast<int>(rng.uniform_int(r.neurons_min, r.neurons_max));
  if (rng.bernoulli(per_gene_prob))
    g.activation = r.act_choices.empty()
                       ? static_cast<Activation>(rng.uniform_int(0, 2))
                       : r.act_choices[static_cast<std::size_t>(rng.uniform_int(
                             0, static_cast<std::int64_t>(r.act_choices.size()) - 1))];
  if (rng.bernoulli(per_gene_prob))
    g.dropout_rate = rng.uniform(r.dropout_min, r.dropout_max);
  if (rng.bernoulli(per_gene_prob))
    g.lstm_units = r.unit_choices.empty()
                       ? static_cast<int>(rng.uniform_int(r.units_min, r.units_max))
                       : r.unit_choices[static_cast<std::size_t>(rng.uniform_int(
                             0, static_cast<std::int64_t>(r.unit_choices.size()) - 1))];
  if (rng.bernoulli(per_gene_prob))
    g.forget_bias =
        r.fbias_choices.empty()
            ? rng.uniform(r.fbias_min, r.fbias_max)
            : r.fbias_choices[static_cast<std::size_t>(rng.uniform_int(
                  0, static_cast<std::int64_t>(r.fbias_choices.size()) - 1))];
  if (n_uavs > 0 && rng.bernoulli(per_gene_prob)) {
    // single reassignment move
    const int drone = static_cast<int>(rng.uniform_int(0, n_uavs - 1));
    for (auto& [area, ids] : g.allocation)
      std::erase(ids, drone);
    const int target = static_cast<int>(rng.uniform_int(-1, n_areas - 1));
    if (target >= 0) g.allocation[target].push_back(drone);
    canonicalize(g);
  }
}

std::size_t tournament_select(std::span<const Fitness> scores, int k, Rng& rng) {
  if (scores.empty()) throw std::invalid_argument("empty population");
  const std::size_t n = scores.size();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("tournament size out of range");
  // partial Fisher-Yates draws k distinct entrants
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::size_t best = n;
  for (int round = 0; round < k; ++round) {
    const std::size_t pick = static_cast<std::size_t>(
        rng.uniform_int(round, static_cast<std::int64_t>(n) - 1));
    std::swap(idx[static_cast<std::size_t>(round)], idx[pick]);
    const std::size_t cand = idx[static_cast<std::size_t>(round)];
    if (best == n || scores[cand].total < scores[best].total ||
        (scores[cand].total == scores[best].total && cand < best))
      best = cand;
  }
  return best;
}

// --- fitness ----------------------------------------------------------------

namespace {

struct EvalOutcome {
  Fitness fit;
  bool diverged = false;
};

std::vector<forecast::StationSeries> truncate_series(
    std::span<const forecast::StationSeries> series, int hours) {
  std::vector<forecast::StationSeries> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    forecast::StationSeries t;
    t.station = s.station;
    const std::size_t n =
        std::min(s.features.size(), static_cast<std::size_t>(hours));
    t.features.assign(s.features.begin(), s.features.begin() + n);
    t.target.assign(s.target.begin(), s.target.begin() + n);
    out.push_back(std::move(t));
  }
  return out;
}

EvalOutcome evaluate_genome(const Genome& g, const EvalInputs& in,
                            const GaConfig& ga, const forecast::TrainConfig& tc) {
  const scenario::ScenarioConfig& cfg = *in.cfg;
  const int n_areas = cfg.n_areas;
  const int n_uavs = static_cast<int>(in.fleet.size());
  const auto& w = cfg.weights;

  forecast::TrainConfig inner = tc;
  inner.learning_rate = g.learning_rate;
  inner.max_epochs = ga.inner_epochs;
  inner.patience = ga.inner_patience;
  inner.seed = derive_seed(tc.seed, "genome.train", g.content_hash());

  const auto trunc = truncate_series(in.series, ga.train_hours);

  forecast::LstmShape shape;
  shape.hidden_units = g.lstm_units;
  shape.hidden_layers = g.hidden_layers;
  shape.neurons_per_layer = g.neurons_per_layer;
  shape.activation = g.activation;
  shape.forget_bias = g.forget_bias;
  shape.dropout_rate = g.dropout_rate;

  forecast::LstmModel model;
  try {
    model = forecast::train(forecast::LstmModel::init(shape, inner.seed), trunc,
                            inner)
                .model;
  } catch (const DivergenceError&) {
    EvalOutcome out;
    out.diverged = true;
    out.fit.raw_cost = 0.0;
    out.fit.penalty = kDivergedPenalty;
    out.fit.total = w.penalty_weight * kDivergedPenalty;
    return out;
  }

  std::vector<double> p_scaled(static_cast<std::size_t>(n_areas), 0.0);
  for (const auto& s : trunc)
    if (s.station >= 0 && s.station < n_areas)
      p_scaled[static_cast<std::size_t>(s.station)] =
          w.lstm_weight * forecast::predict_next(model, s, inner.window_hours);

  const std::vector<int> assign = g.assignment(n_uavs);

  // drones stationed per area, in id order
  std::vector<std::vector<int>> per_area(static_cast<std::size_t>(n_areas));
  double stray_penalty = 0.0;  // ids or areas outside the scenario
  for (const auto& [area, ids] : g.allocation) {
    for (int id : ids) {
      if (area < 0 || area >= n_areas || id < 0 || id >= n_uavs ||
          assign[static_cast<std::size_t>(id)] != area) {
        stray_penalty += 1.0;
        continue;
      }
      per_area[static_cast<std::size_t>(area)].push_back(id);
    }
  }

  // deployed positions: staggered hover points per area
  std::vector<scenario::Uav> deployed;
  std::vector<double> travel_m(static_cast<std::size_t>(n_uavs), 0.0);
  std::vector<int> deployed_idx(static_cast<std::size_t>(n_uavs), -1);
  for (int j = 0; j < n_areas; ++j) {
    const auto& ids = per_area[static_cast<std::size_t>(j)];
    const int slots = static_cast<int>(ids.size());
    for (int k = 0; k < slots; ++k) {
      const scenario::Uav& base = in.fleet[static_cast<std::size_t>(ids[k])];
      if (!base.available) continue;
      scenario::Uav u = base;
      u.position_m = scenario::hover_point(cfg.los, j, k, slots);
      const Vec2 pad =
          in.stations[static_cast<std::size_t>(base.home_station)].position_m;
      travel_m[static_cast<std::size_t>(base.id)] = dist2d(pad, u.position_m);
      deployed_idx[static_cast<std::size_t>(base.id)] =
          static_cast<int>(deployed.size());
      deployed.push_back(u);
    }
  }

  const int n_hours = n_areas > 0 ? static_cast<int>(in.snaps.size()) / n_areas : 0;
  const int usable = std::min(n_hours, ga.train_hours);
  if (usable < 1) throw ShapeError("no snapshot hours to probe");
  const int probes = std::min(ga.eval_hours, usable);
  const int stride = usable / probes;

  const double e_comm = cost::energy_comm(cfg.radio);
  double raw_acc = 0.0, pen_acc = 0.0;

  for (int k = 0; k < probes; ++k) {
    const int h = (k + 1) * stride - 1;
    std::vector<double> uav_costs, area_costs;
    double pen = stray_penalty;

    for (int j = 0; j < n_areas; ++j) {
      const auto& snap =
          in.snaps[static_cast<std::size_t>(h) * n_areas + static_cast<std::size_t>(j)];
      const auto& bs = in.stations[static_cast<std::size_t>(j)];
      const auto& ids = per_area[static_cast<std::size_t>(j)];

      std::vector<const scenario::Uav*> live;
      for (int id : ids) {
        const int di = deployed_idx[static_cast<std::size_t>(id)];
        if (di >= 0)
          live.push_back(&deployed[static_cast<std::size_t>(di)]);
        else
          pen += 1.0;  // allocation names a drone that cannot fly
      }

      double lambda_j = 0.0;
      if (!live.empty())
        lambda_j = radio::area_load(scenario::area_center(cfg.los, j), deployed,
                                    cfg.radio, cfg.traffic, cfg.los,
                                    cfg.synth.grid_res)
                       .load;

      int cap_total = 0;
      for (const auto* u : live) cap_total += u->capacity_reqs;
      const int offload_req = std::min(snap.service_requests, cap_total);
      const double offload_j = bs.energy_per_load * offload_req;
      const double e_bs = cost::energy_bs(bs, offload_j, h);

      // under-allocation against the deficit the station cannot absorb
      const int deficit = std::max(0, snap.service_requests - bs.user_capacity);
      if (deficit > 0) {
        const int need = cost::n_req(deficit, cfg.fleet.capacity_reqs);
        if (static_cast<int>(live.size()) < need)
          pen += static_cast<double>(need - static_cast<int>(live.size())) /
                 static_cast<double>(need);
      }

      const auto density = cost::density_constraint(snap, bs, cfg.rng_seed);
      if (!density.ok) pen += density.lhs - density.rhs;

      double e_uav_sum = 0.0, e_travel_sum = 0.0;
      // per-drone carried load in request units; energy_uav applies the
      // per-load price itself
      const double share =
          live.empty() ? 0.0
                       : static_cast<double>(offload_req) /
                             static_cast<double>(live.size());
      std::vector<double> per_drone_uav, per_drone_travel, per_drone_dist;
      for (const auto* u : live) {
        const double d = travel_m[static_cast<std::size_t>(u->id)];
        const double mobility = d / u->speed_m_s / 3600.0;
        const double e_u = cost::energy_uav(cfg.uav_energy, d, 3600.0, share);
        const double e_t = cost::energy_travel(cfg.uav_energy, d, mobility);
        e_uav_sum += e_u;
        e_travel_sum += e_t;
        per_drone_uav.push_back(e_u);
        per_drone_travel.push_back(e_t);
        per_drone_dist.push_back(dist3d(
            in.stations[static_cast<std::size_t>(u->home_station)].position_m,
            scenario::area_center(cfg.los, j), u->altitude_m));

        // round trip plus an hour of service against a full battery
        const double sortie = cfg.uav_energy.e_per_m * 2.0 * d +
                              cfg.uav_energy.e_per_s * 3600.0 +
                              cfg.uav_energy.e_per_load * share;
        if (sortie > u->battery_capacity_j)
          pen += (sortie - u->battery_capacity_j) / u->battery_capacity_j;
      }

      const auto bd_area =
          cost::EnergyBreakdown::make(e_bs, e_uav_sum, e_travel_sum, e_comm, w);
      area_costs.push_back(
          cost::cost_area(snap, bs, lambda_j, bd_area, w, !live.empty()));

      if (!live.empty()) {
        const double phi_u =
            cost::phi_uav(lambda_j, n_uavs, cfg.fleet.capacity_reqs);
        for (std::size_t li = 0; li < live.size(); ++li) {
          const auto bd = cost::EnergyBreakdown::make(
              e_bs, per_drone_uav[li], per_drone_travel[li], e_comm, w);
          uav_costs.push_back(cost::cost_uav(snap, *live[li], per_drone_dist[li],
                                             phi_u, bd, w,
                                             cfg.radio.path_loss_exp, true));
        }
      }
    }

    const int deployed_n = static_cast<int>(deployed.size());
    double raw;
    if (!uav_costs.empty()) {
      raw = cost::cost_overall(uav_costs, area_costs, p_scaled, w,
                               std::max(1, deployed_n));
    } else {
      raw = 0.0;
      for (std::size_t j = 0; j < area_costs.size(); ++j)
        raw += area_costs[j] + p_scaled[j];
    }
    raw_acc += raw;
    pen_acc += pen;
  }

  EvalOutcome out;
  out.fit.raw_cost = raw_acc / probes;
  out.fit.penalty = pen_acc / probes;
  out.fit.total = out.fit.raw_cost + w.penalty_weight * out.fit.penalty;
  return out;
}

}  // namespace

Fitness fitness(const Genome& g, const EvalInputs& in, const GaConfig& ga,
                const forecast::TrainConfig& tc) {
  if (!in.cfg) throw std::invalid_argument("fitness needs a scenario");
  return evaluate_genome(g, in, ga, tc).fit;
}

std::map<int, std::vector<int>> allocate_greedy(
    std::span<const int> deficit_drones, std::span<const double> cost_matrix,
    std::span<const scenario::Uav> fleet, int n_areas) {
  if (static_cast<int>(deficit_drones.size()) != n_areas)
    throw std::invalid_argument("one deficit entry per area required");
  if (cost_matrix.size() != fleet.size() * static_cast<std::size_t>(n_areas))
    throw std::invalid_argument("cost matrix must be n_uavs x n_areas");

  std::vector<int> want(deficit_drones.begin(), deficit_drones.end());
  std::vector<bool> taken(fleet.size(), false);
  std::map<int, std::vector<int>> out;

  while (true) {
    int best_i = -1, best_j = -1;
    double best_c = 0.0;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
      if (taken[i] || !fleet[i].available) continue;
      for (int j = 0; j < n_areas; ++j) {
        if (want[static_cast<std::size_t>(j)] <= 0) continue;
        const double c = cost_matrix[i * static_cast<std::size_t>(n_areas) +
                                     static_cast<std::size_t>(j)];
        if (best_i < 0 || c < best_c) {
          best_i = static_cast<int>(i);
          best_j = j;
          best_c = c;
        }
      }
    }
    if (best_i < 0) break;
    taken[static_cast<std::size_t>(best_i)] = true;
    --want[static_cast<std::size_t>(best_j)];
    out[best_j].push_back(best_i);
  }
  for (auto& [area, ids] : out) std::sort(ids.begin(), ids.end());
  return out;
}

// --- search loop -------------------------------------------------------------

namespace {

using nlohmann::json;

json genome_to_json(const Genome& g) {
  json alloc = json::array();
  for (const auto& [area, ids] : g.allocation)
    alloc.push_back({{"area", area}, {"uavs", ids}});
  return {{"learning_rate", g.learning_rate},
          {"hidden_layers", g.hidden_layers},
          {"neurons_per_layer", g.neurons_per_layer},
          {"activation", forecast::to_string(g.activation)},
          {"dropout_rate", g.dropout_rate},
          {"lstm_units", g.lstm_units},
          {"forget_bias", g.forget_bias},
          {"allocation", alloc}};
}

Genome genome_from_json(const json& j) {
  Genome g;
  j.at("learning_rate").get_to(g.learning_rate);
  j.at("hidden_layers").get_to(g.hidden_layers);
  j.at("neurons_per_layer").get_to(g.neurons_per_layer);
  g.activation =
      forecast::activation_from_string(j.at("activation").get<std::string>());
  j.at("dropout_rate").get_to(g.dropout_rate);
  j.at("lstm_units").get_to(g.lstm_units);
  j.at("forget_bias").get_to(g.forget_bias);
  for (const auto& e : j.at("allocation"))
    g.allocation[e.at("area").get<int>()] =
        e.at("uavs").get<std::vector<int>>();
  canonicalize(g);
  return g;
}

struct LoopState {
  int next_generation = 0;  // population below is bred, not yet evaluated
  int since_best = 0;
  std::vector<Genome> population;
  std::vector<GenRecord> history;
  Genome best;
  Fitness best_fit;
  bool has_best = false;
  std::string rng_state;
};

void save_state(const LoopState& st, const std::filesystem::path& path) {
  json pop = json::array();
  for (const auto& g : st.population) pop.push_back(genome_to_json(g));
  json hist = json::array();
  for (const auto& r : st.history)
    hist.push_back({{"generation", r.generation},
                    {"best_fitness", r.best_fitness},
                    {"mean_fitness", r.mean_fitness},
                    {"penalty_rate", r.penalty_rate}});
  json j{{"format_version", 1},
         {"next_generation", st.next_generation},
         {"since_best", st.since_best},
         {"population", pop},
         {"history", hist},
         {"rng_state", st.rng_state}};
  if (st.has_best)
    j["best"] = {{"genome", genome_to_json(st.best)},
                 {"raw_cost", st.best_fit.raw_cost},
                 {"penalty", st.best_fit.penalty},
                 {"total", st.best_fit.total}};
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write search state: " + tmp);
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

LoopState load_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open search state: " + path.string());
  json j;
  in >> j;
  if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
    throw ShapeError("unsupported search-state format");
  LoopState st;
  j.at("next_generation").get_to(st.next_generation);
  j.at("since_best").get_to(st.since_best);
  for (const auto& e : j.at("population")) st.population.push_back(genome_from_json(e));
  for (const auto& e : j.at("history"))
    st.history.push_back({e.at("generation").get<int>(),
                          e.at("best_fitness").get<double>(),
                          e.at("mean_fitness").get<double>(),
                          e.at("penalty_rate").get<double>()});
  j.at("rng_state").get_to(st.rng_state);
  if (j.contains("best")) {
    st.best = genome_from_json(j.at("best").at("genome"));
    st.best_fit.raw_cost = j.at("best").at("raw_cost").get<double>();
    st.best_fit.penalty = j.at("best").at("penalty").get<double>();
    st.best_fit.total = j.at("best").at("total").get<double>();
    st.has_best = true;
  }
  return st;
}

// parallel, cache-backed evaluation; deterministic because every genome's
// seed is a pure function of its content
void evaluate_population(
    const std::vector<Genome>& pop, const EvalInputs& in, const GaConfig& ga,
    const forecast::TrainConfig& tc,
    std::unordered_map<std::uint64_t, EvalOutcome>& cache,
    std::vector<EvalOutcome>& out) {
  out.resize(pop.size());
  std::vector<std::size_t> pending;
  std::vector<std::uint64_t> hashes(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    hashes[i] = pop[i].content_hash();
    if (auto it = cache.find(hashes[i]); it != cache.end())
      out[i] = it->second;
    else
      pending.push_back(i);
  }
  // first occurrence per distinct hash trains; clones copy afterwards
  std::vector<std::size_t> unique_pending;
  for (std::size_t i : pending)
    if (std::none_of(unique_pending.begin(), unique_pending.end(),
                     [&](std::size_t u) { return hashes[u] == hashes[i]; }))
      unique_pending.push_back(i);

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, unique_pending.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= unique_pending.size()) return;
      const std::size_t i = unique_pending[k];
      out[i] = evaluate_genome(pop[i], in, ga, tc);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i : unique_pending) cache.emplace(hashes[i], out[i]);
  for (std::size_t i : pending)
    out[i] = cache.at(hashes[i]);
}

}  // namespace

RunResult run(const EvalInputs& in, const GaConfig& ga,
              const forecast::TrainConfig& tc, double r2_bar,
              const ProgressFn& progress, const std::filesystem::path& state_path) {
  if (!in.cfg) throw std::invalid_argument("run needs a scenario");
  ga.validate();
  const scenario::ScenarioConfig& cfg = *in.cfg;
  const int n_uavs = static_cast<int>(in.fleet.size());
  const int n_areas = cfg.n_areas;

  Rng rng(derive_seed(ga.seed, "ga.loop"));
  LoopState st;
  bool resumed = false;
  if (!state_path.empty() && std::filesystem::exists(state_path)) {
    st = load_state(state_path);
    std::istringstream is(st.rng_state);
    is >> rng.engine();
    resumed = true;
  }

  if (!resumed) {
    st.population.reserve(static_cast<std::size_t>(ga.population_size));
    for (int i = 0; i < ga.population_size; ++i)
      st.population.push_back(random_genome(ga.ranges, n_uavs, n_areas, rng));

    // seed one individual with the greedy baseline allocation
    if (n_uavs > 0 && !ga.allocation_fixed) {
      std::vector<int> deficit(static_cast<std::size_t>(n_areas), 0);
      const int n_hours = static_cast<int>(in.snaps.size()) / std::max(1, n_areas);
      for (int j = 0; j < n_areas; ++j) {
        int worst = 0;
        for (int h = 0; h < std::min(n_hours, ga.train_hours); ++h)
          worst = std::max(
              worst,
              in.snaps[static_cast<std::size_t>(h) * n_areas + j].service_requests -
                  in.stations[static_cast<std::size_t>(j)].user_capacity);
        deficit[static_cast<std::size_t>(j)] =
            worst > 0 ? cost::n_req(worst, cfg.fleet.capacity_reqs) : 0;
      }
      std::vector<double> matrix(static_cast<std::size_t>(n_uavs) * n_areas);
      for (int i = 0; i < n_uavs; ++i)
        for (int j = 0; j < n_areas; ++j)
          matrix[static_cast<std::size_t>(i) * n_areas + j] = dist3d(
              in.stations[static_cast<std::size_t>(
                              in.fleet[static_cast<std::size_t>(i)].home_station)]
                  .position_m,
              scenario::area_center(cfg.los, j),
              in.fleet[static_cast<std::size_t>(i)].altitude_m);
      st.population[0].allocation =
          allocate_greedy(deficit, matrix, in.fleet, n_areas);
      canonicalize(st.population[0]);
    }
  }

  std::unordered_map<std::uint64_t, EvalOutcome> cache;
  std::vector<EvalOutcome> scores;
  RunResult res;

  for (int gen = st.next_generation; gen < ga.max_generations; ++gen) {
    evaluate_population(st.population, in, ga, tc, cache, scores);

    std::size_t gen_best = 0;
    double mean = 0.0, pen_rate = 0.0;
    bool all_diverged = true;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      mean += scores[i].fit.total;
      if (scores[i].fit.penalty > 0.0) pen_rate += 1.0;
      if (!scores[i].diverged) all_diverged = false;
      if (scores[i].fit.total < scores[gen_best].fit.total) gen_best = i;
    }
    if (all_diverged)
      throw DivergenceError("every individual in the generation diverged", gen);
    mean /= static_cast<double>(scores.size());
    pen_rate /= static_cast<double>(scores.size());

    if (!st.has_best || scores[gen_best].fit.total < st.best_fit.total) {
      st.best = st.population[gen_best];
      st.best_fit = scores[gen_best].fit;
      st.has_best = true;
      st.since_best = 0;
    } else {
      ++st.since_best;
    }

    GenRecord rec{gen, st.best_fit.total, mean, pen_rate};
    st.history.push_back(rec);
    if (progress) progress(rec);

    const bool stop =
        st.since_best >= ga.stall_patience || gen + 1 >= ga.max_generations;
    if (!stop) {
      std::vector<std::size_t> order(st.population.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a].fit.total < scores[b].fit.total;
      });
      std::vector<Genome> next;
      next.reserve(st.population.size());
      for (int e = 0; e < ga.elitism; ++e)
        next.push_back(st.population[order[static_cast<std::size_t>(e)]]);
      std::vector<Fitness> fit_only(scores.size());
      for (std::size_t i = 0; i < scores.size(); ++i) fit_only[i] = scores[i].fit;
      while (static_cast<int>(next.size()) < ga.population_size) {
        const std::size_t ia = tournament_select(fit_only, ga.tournament_size, rng);
        const std::size_t ib = tournament_select(fit_only, ga.tournament_size, rng);
        Genome c1 = st.population[ia], c2 = st.population[ib];
        if (rng.bernoulli(ga.crossover_prob))
          std::tie(c1, c2) = crossover(c1, c2, rng);
        mutate(c1, ga.ranges, ga.allocation_fixed ? 0 : n_uavs, n_areas,
               ga.mutation_prob, rng);
        mutate(c2, ga.ranges, ga.allocation_fixed ? 0 : n_uavs, n_areas,
               ga.mutation_prob, rng);
        if (ga.allocation_fixed) {
          c1.allocation = st.population[ia].allocation;
          c2.allocation = st.population[ib].allocation;
        }
        next.push_back(std::move(c1));
        if (static_cast<int>(next.size()) < ga.population_size)
          next.push_back(std::move(c2));
      }
      st.population = std::move(next);
    }

    st.next_generation = gen + 1;
    if (!state_path.empty()) {
      std::ostringstream os;
      os << rng.engine();
      st.rng_state = os.str();
      save_state(st, state_path);
    }
    if (stop) break;
  }

  res.generations_run = static_cast<int>(st.history.size());
  res.best = st.best;
  res.best_fitness = st.best_fit;
  res.history = st.history;

  // full-series retrain of the elite
  forecast::LstmShape shape;
  shape.hidden_units = res.best.lstm_units;
  shape.hidden_layers = res.best.hidden_layers;
  shape.neurons_per_layer = res.best.neurons_per_layer;
  shape.activation = res.best.activation;
  shape.forget_bias = res.best.forget_bias;
  shape.dropout_rate = res.best.dropout_rate;
  forecast::TrainConfig full = tc;
  full.learning_rate = res.best.learning_rate;
  full.seed = derive_seed(tc.seed, "genome.train", res.best.content_hash());
  auto trained =
      forecast::train(forecast::LstmModel::init(shape, full.seed), in.series, full);
  res.model = trained.model;
  res.test = trained.test;

  // fine-tune when the elite clears the quality bar and spare drones remain
  int assigned_live = 0, live = 0;
  const auto assign = res.best.assignment(n_uavs);
  for (int i = 0; i < n_uavs; ++i) {
    if (!in.fleet[static_cast<std::size_t>(i)].available) continue;
    ++live;
    if (assign[static_cast<std::size_t>(i)] >= 0) ++assigned_live;
  }
  if (res.test.r2 && *res.test.r2 > r2_bar && assigned_live < live) {
    forecast::TrainConfig tune = full;
    tune.learning_rate = full.learning_rate / 10.0;
    tune.max_epochs = std::max(1, full.max_epochs / 4);
    tune.seed = derive_seed(full.seed, "fine.tune");
    auto tuned = forecast::train(res.model, in.series, tune);
    if (tuned.test.rmse <= res.test.rmse) {
      res.model = tuned.model;
      res.test = tuned.test;
      res.fine_tuned = true;
    }
  }
  return res;
}

void write_history_csv(std::span<const GenRecord> history,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history: " + path.string());
  out << "generation,best_fitness,mean_fitness,penalty_rate\n";
  for (const auto& r : history)
    out << r.generation << ',' << csv::num(r.best_fitness) << ','
        << csv::num(r.mean_fitness) << ',' << csv::num(r.penalty_rate) << '\n';
}

void write_genome_txt(const Genome& g, const Fitness& f,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write genome: " + path.string());
  out << "learning_rate: " << csv::num(g.learning_rate) << '\n'
      << "hidden_layers: " << g.hidden_layers << '\n'
      << "neurons_per_layer: " << g.neurons_per_layer << '\n'
      << "activation: " << forecast::to_string(g.activation) << '\n'
      << "dropout_rate: " << csv::num(g.dropout_rate) << '\n'
      << "lstm_units: " << g.lstm_units << '\n'
      << "forget_bias: " << csv::num(g.forget_bias) << '\n'
      << "fitness_raw: " << csv::num(f.raw_cost) << '\n'
      << "fitness_penalty: " << csv::num(f.penalty) << '\n'
      << "fitness_total: " << csv::num(f.total) << '\n';
  for (const auto& [area, ids] : g.allocation) {
    out << "area " << area << ':';
    for (int id : ids) out << ' ' << id;
    out << '\n';
  }
}

}  // namespace uavgrid::evo
