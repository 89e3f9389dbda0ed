// Command-line front end: reproducible simulate / train / evaluate / retrain
// runs. Flags override config fields one-to-one; every run directory gets a
// manifest (written before any result file) naming the config hash and seed.

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "uavgrid/errors.hpp"
#include "uavgrid/evolution.hpp"
#include "uavgrid/forecaster.hpp"
#include "uavgrid/rng.hpp"
#include "uavgrid/scenario.hpp"
#include "uavgrid/sim.hpp"

namespace fs = std::filesystem;
using namespace uavgrid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;      // config or data problem
constexpr int kExitDivergence = 3; // training blew up
constexpr int kExitArtifact = 4;   // checkpoint does not fit the task

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("digest allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("digest computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Refuses a dirty output directory unless forced; the manifest goes down
// before any result so an interrupted run is still attributable.
void open_run_dir(const fs::path& out_dir, const std::string& command,
                  const fs::path& config_path, const std::string& config_sha,
                  std::uint64_t seed, bool force) {
  const fs::path manifest = out_dir / "manifest.json";
  if (fs::exists(manifest) && !force)
    throw std::invalid_argument("output directory " + out_dir.string() +
                                " already holds a run; pass --force to replace it");
  fs::create_directories(out_dir);
  nlohmann::json j{{"format_version", 1},
                   {"command", command},
                   {"config_path", config_path.string()},
                   {"config_sha256", config_sha},
                   {"seed", seed},
                   {"output_dir", out_dir.string()},
                   {"created_utc", utc_now()}};
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  out << j.dump(2) << '\n';
}

scenario::ScenarioConfig load_cfg_checked(const fs::path& path) {
  if (!fs::exists(path))
    throw std::invalid_argument("config not found: " + path.string());
  return scenario::load_config(path);
}

std::vector<std::vector<double>> default_solar(const scenario::ScenarioConfig& cfg) {
  const int days = std::max(1, (cfg.horizon_hours + 23) / 24);
  std::vector<std::vector<double>> traces;
  traces.reserve(static_cast<std::size_t>(cfg.n_areas));
  for (int i = 0; i < cfg.n_areas; ++i)
    traces.push_back(scenario::synth_solar(
        derive_seed(cfg.rng_seed, "solar", static_cast<std::uint64_t>(i)), days,
        cfg.synth.solar_peak_j));
  return traces;
}

struct SimulateArgs {
  fs::path config;
  fs::path out = "runs/sim";
  std::string sweep;  // empty means the full default set
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool no_uav = false;
  bool force = false;
  bool trace = false;
};

int cmd_simulate(const SimulateArgs& a) {
  scenario::ScenarioConfig cfg = load_cfg_checked(a.config);
  if (a.seed_set) cfg.rng_seed = a.seed;
  if (a.no_uav) cfg.n_uavs = 0;
  cfg.validate();

  open_run_dir(a.out, "simulate", a.config, sha256_hex(read_file(a.config)),
               cfg.rng_seed, a.force);

  const int extra[] = {0, 100, 200, 300, 400, 500, 600, 700};
  const double altitudes[] = {150.0, 450.0};
  const int fleet_sizes[] = {0, 2, 4, 6, 8, 10};
  const double densities[] = {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  const sim::SimOptions opts;

  const bool all = a.sweep.empty();
  if (all) {
    const auto res = sim::run_sim(
        cfg, cfg.n_uavs > 0 ? sim::greedy_policy() : sim::null_policy(), opts);
    sim::write_outage_csv(res.metrics, a.out / "outage.csv");
    sim::write_summary_json(res.metrics, cfg, a.out / "summary.json");
    if (a.trace) sim::write_trace_ndjson(res.world, a.out / "trace.ndjson");
    std::cout << "simulated " << cfg.horizon_hours << " hours: "
              << res.metrics.outage_hours << " outage-hours, mean coverage "
              << res.metrics.mean_coverage << "\n";
  }
  if (all || a.sweep == "extra-users") {
    const auto pts = sim::sweep_extra_users(cfg, extra, altitudes, opts);
    sim::write_coverage_csv(pts, a.out / "coverage.csv");
  }
  if (all || a.sweep == "fleet") {
    const auto pts = sim::sweep_fleet(cfg, fleet_sizes, opts);
    sim::write_fleet_csv(pts, a.out / "fleet.csv");
  }
  if (all || a.sweep == "density") {
    const auto pts = sim::sweep_density(cfg, densities, opts);
    sim::write_density_csv(pts, a.out / "density.csv");
  }
  std::cout << "results in " << a.out.string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  fs::path config;
  fs::path out = "runs/train";
  fs::path demand;
  fs::path solar;
  bool synthetic = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int generations = 0;  // 0 keeps the search default
  int population = 0;
  int train_hours = 0;
  int inner_epochs = 0;
  bool resume = false;
  bool force = false;
};

struct TrainData {
  std::vector<scenario::BaseStation> stations;
  std::vector<scenario::Uav> fleet;
  std::vector<scenario::DemandSnapshot> snaps;
  std::vector<forecast::StationSeries> series;
};

TrainData assemble_data(const scenario::ScenarioConfig& cfg, const fs::path& demand,
                        const fs::path& solar, bool synthetic) {
  if (demand.empty() && !synthetic)
    throw std::invalid_argument(
        "no training data: pass --demand <csv> or --synthetic");
  TrainData d;
  const auto traces = solar.empty()
                          ? default_solar(cfg)
                          : scenario::load_solar_trace(solar, cfg.n_areas);
  d.stations = scenario::make_stations(cfg, traces);
  d.fleet = scenario::make_fleet(cfg, d.stations);
  if (!demand.empty()) {
    d.snaps = scenario::load_demand_csv(demand);
    const int n = static_cast<int>(d.snaps.size());
    if (n % cfg.n_areas != 0 ||
        d.snaps[static_cast<std::size_t>(n - 1)].area_id != cfg.n_areas - 1)
      throw ShapeError("demand file does not cover n_areas=" +
                       std::to_string(cfg.n_areas) + " areas");
  } else {
    d.snaps = scenario::synth_demand(cfg.rng_seed, cfg.n_areas, cfg.horizon_hours,
                                     cfg.synth, cfg.traffic, cfg.los);
  }
  d.series = forecast::make_series(d.snaps, d.stations);
  return d;
}

int cmd_train(const TrainArgs& a) {
  scenario::ScenarioConfig cfg = load_cfg_checked(a.config);
  if (a.seed_set) cfg.rng_seed = a.seed;
  cfg.validate();

  const fs::path manifest = a.out / "manifest.json";
  if (!a.resume || !fs::exists(manifest))
    open_run_dir(a.out, "train", a.config, sha256_hex(read_file(a.config)),
                 cfg.rng_seed, a.force);

  const TrainData data = assemble_data(cfg, a.demand, a.solar, a.synthetic);

  evo::GaConfig ga;
  ga.seed = derive_seed(cfg.rng_seed, "ga");
  if (a.generations > 0) ga.max_generations = a.generations;
  if (a.population > 0) ga.population_size = a.population;
  if (a.train_hours > 0) ga.train_hours = a.train_hours;
  if (a.inner_epochs > 0) ga.inner_epochs = a.inner_epochs;
  ga.validate();

  forecast::TrainConfig tc;
  tc.seed = derive_seed(cfg.rng_seed, "train");

  const fs::path state = a.out / "state.json";
  if (!a.resume && fs::exists(state)) fs::remove(state);

  evo::EvalInputs in;
  in.cfg = &cfg;
  in.stations = data.stations;
  in.fleet = data.fleet;
  in.snaps = data.snaps;
  in.series = data.series;

  const auto res = evo::run(
      in, ga, tc, 0.7,
      [](const evo::GenRecord& r) {
        std::cout << "gen " << r.generation << " best " << r.best_fitness
                  << " mean " << r.mean_fitness << " violating "
                  << r.penalty_rate << "\n";
      },
      state);

  evo::write_genome_txt(res.best, res.best_fitness, a.out / "genome.txt");
  forecast::save_checkpoint(res.model, a.out / "model.json");
  evo::write_history_csv(res.history, a.out / "history.csv");
  nlohmann::json j{{"generations_run", res.generations_run},
                   {"best_fitness", res.best_fitness.total},
                   {"best_raw_cost", res.best_fitness.raw_cost},
                   {"best_penalty", res.best_fitness.penalty},
                   {"fine_tuned", res.fine_tuned},
                   {"test_rmse", res.test.rmse},
                   {"test_mae", res.test.mae}};
  if (res.test.r2) j["test_r2"] = *res.test.r2;
  std::ofstream mj(a.out / "metrics.json");
  mj << j.dump(2) << '\n';

  std::cout << "best fitness " << res.best_fitness.total << " after "
            << res.generations_run << " generations; artifacts in "
            << a.out.string() << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  fs::path model;
  fs::path data;
  fs::path config;
  fs::path out = "runs/evaluate";
  int window = 24;
  bool force = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  forecast::LstmModel model;
  try {
    model = forecast::load_checkpoint(a.model);
  } catch (const std::exception& e) {
    std::cerr << "checkpoint rejected: " << e.what() << "\n";
    return kExitArtifact;
  }

  scenario::ScenarioConfig cfg;
  if (!a.config.empty()) cfg = load_cfg_checked(a.config);
  auto snaps = scenario::load_demand_csv(a.data);
  int max_area = 0;
  for (const auto& s : snaps) max_area = std::max(max_area, s.area_id);
  cfg.n_areas = max_area + 1;
  const auto stations = scenario::make_stations(cfg, {});
  const auto series = forecast::make_series(snaps, stations);

  forecast::ForecastMetrics m;
  try {
    m = forecast::evaluate_series(model, series, a.window);
  } catch (const std::exception& e) {
    std::cerr << "model does not fit the data: " << e.what() << "\n";
    return kExitArtifact;
  }

  std::cout << "rmse=" << m.rmse << "\n" << "mae=" << m.mae << "\n";
  if (m.r2) std::cout << "r2=" << *m.r2 << "\n";

  open_run_dir(a.out, "evaluate", a.config,
               a.config.empty() ? sha256_hex(read_file(a.model))
                                : sha256_hex(read_file(a.config)),
               cfg.rng_seed, a.force);
  nlohmann::json j{{"rmse", m.rmse}, {"mae", m.mae}};
  if (m.r2) j["r2"] = *m.r2;
  std::ofstream out(a.out / "metrics.json");
  if (!out) throw std::runtime_error("cannot write metrics");
  out << j.dump(2) << '\n';
  return kExitOk;
}

struct RetrainArgs {
  fs::path model;
  fs::path config;
  fs::path out = "runs/retrain";
  fs::path demand;
  fs::path solar;
  bool synthetic = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int epochs = 0;
  bool force = false;
};

int cmd_retrain(const RetrainArgs& a) {
  forecast::LstmModel model;
  try {
    model = forecast::load_checkpoint(a.model);
  } catch (const std::exception& e) {
    std::cerr << "checkpoint rejected: " << e.what() << "\n";
    return kExitArtifact;
  }

  scenario::ScenarioConfig cfg = load_cfg_checked(a.config);
  if (a.seed_set) cfg.rng_seed = a.seed;
  cfg.validate();

  open_run_dir(a.out, "retrain", a.config, sha256_hex(read_file(a.config)),
               cfg.rng_seed, a.force);

  const TrainData data = assemble_data(cfg, a.demand, a.solar, a.synthetic);
  forecast::TrainConfig tc;
  tc.seed = derive_seed(cfg.rng_seed, "retrain");
  if (a.epochs > 0) tc.max_epochs = a.epochs;

  forecast::TrainResult res;
  try {
    res = forecast::train(model, data.series, tc);
  } catch (const std::exception& e) {
    // shape trouble means the checkpoint does not match this scenario
    if (dynamic_cast<const ShapeError*>(&e)) {
      std::cerr << "model does not fit the data: " << e.what() << "\n";
      return kExitArtifact;
    }
    throw;
  }

  forecast::save_checkpoint(res.model, a.out / "model.json");
  nlohmann::json j{{"epochs_run", res.epochs_run},
                   {"test_rmse", res.test.rmse},
                   {"test_mae", res.test.mae}};
  if (res.test.r2) j["test_r2"] = *res.test.r2;
  std::ofstream out(a.out / "metrics.json");
  out << j.dump(2) << '\n';
  std::cout << "retrained for " << res.epochs_run << " epochs; checkpoint in "
            << a.out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solar small-cell network simulator with a dispatchable drone fleet"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "run the hour-stepped network and write metric CSVs");
  sim_cmd->add_option("--config", sa.config, "scenario JSON")->required();
  sim_cmd->add_option("--out", sa.out, "output directory (default runs/sim)");
  sim_cmd->add_option("--sweep", sa.sweep, "run one sweep only")
      ->check(CLI::IsMember({"extra-users", "fleet", "density"}));
  auto* sim_seed = sim_cmd->add_option("--seed", sa.seed, "override the config seed");
  sim_cmd->add_flag("--no-uav", sa.no_uav, "force fleet size 0");
  sim_cmd->add_flag("--force", sa.force, "replace an existing run directory");
  sim_cmd->add_flag("--trace", sa.trace, "also write the per-hour ledger");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand(
      "train", "search forecaster hyperparameters and the fleet allocation");
  train_cmd->add_option("--config", ta.config, "scenario JSON")->required();
  train_cmd->add_option("--out", ta.out, "output directory (default runs/train)");
  train_cmd->add_option("--demand", ta.demand, "demand CSV (area,hour,users,requests)");
  train_cmd->add_option("--solar", ta.solar, "harvest CSV (station,day,hour,energy_j)");
  train_cmd->add_flag("--synthetic", ta.synthetic, "generate demand from the seed");
  auto* train_seed = train_cmd->add_option("--seed", ta.seed, "override the config seed");
  train_cmd->add_option("--generations", ta.generations, "search generations");
  train_cmd->add_option("--population", ta.population, "population size");
  train_cmd->add_option("--train-hours", ta.train_hours,
                        "series truncation during the search");
  train_cmd->add_option("--inner-epochs", ta.inner_epochs,
                        "per-individual training epochs");
  train_cmd->add_flag("--resume", ta.resume, "continue from runs state if present");
  train_cmd->add_flag("--force", ta.force, "replace an existing run directory");

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "score a checkpoint on a demand CSV (prints rmse/mae/r2)");
  eval_cmd->add_option("--model", ea.model, "checkpoint JSON")->required();
  eval_cmd->add_option("--data", ea.data, "demand CSV")->required();
  eval_cmd->add_option("--config", ea.config, "scenario JSON for station economics");
  eval_cmd->add_option("--out", ea.out, "output directory (default runs/evaluate)");
  eval_cmd->add_option("--window", ea.window, "lookback hours (default 24)");
  eval_cmd->add_flag("--force", ea.force, "replace an existing run directory");

  RetrainArgs ra;
  auto* retrain_cmd = app.add_subcommand(
      "retrain", "warm-start a checkpoint on fresh data");
  retrain_cmd->add_option("--model", ra.model, "checkpoint JSON")->required();
  retrain_cmd->add_option("--config", ra.config, "scenario JSON")->required();
  retrain_cmd->add_option("--out", ra.out, "output directory (default runs/retrain)");
  retrain_cmd->add_option("--demand", ra.demand, "demand CSV");
  retrain_cmd->add_option("--solar", ra.solar, "harvest CSV");
  retrain_cmd->add_flag("--synthetic", ra.synthetic, "generate demand from the seed");
  auto* retrain_seed = retrain_cmd->add_option("--seed", ra.seed, "override the config seed");
  retrain_cmd->add_option("--epochs", ra.epochs, "training epoch cap");
  retrain_cmd->add_flag("--force", ra.force, "replace an existing run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  sa.seed_set = sim_seed->count() > 0;
  ta.seed_set = train_seed->count() > 0;
  ra.seed_set = retrain_seed->count() > 0;

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sa);
    if (train_cmd->parsed()) return cmd_train(ta);
    if (eval_cmd->parsed()) return cmd_evaluate(ea);
    if (retrain_cmd->parsed()) return cmd_retrain(ra);
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
