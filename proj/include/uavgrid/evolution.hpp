#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uavgrid/forecaster.hpp"
#include "uavgrid/rng.hpp"
#include "uavgrid/scenario.hpp"

namespace uavgrid::evo {

using forecast::Activation;

/// Search individual: forecaster hyperparameters plus a fleet allocation
/// (area id -> drone ids). Every drone appears in at most one area's list;
/// crossover repairs duplicates by keeping the first (lowest-area) claim.
struct Genome {
  double learning_rate = 0.02;
  int hidden_layers = 1;
  int neurons_per_layer = 50;
  Activation activation = Activation::tanh;
  double dropout_rate = 0.0;
  int lstm_units = 32;
  double forget_bias = 1.0;
  std::map<int, std::vector<int>> allocation;

  std::uint64_t content_hash() const;
  /// assignment[i] = area of drone i, -1 when unassigned
  std::vector<int> assignment(int n_uavs) const;
  int assigned_count() const;
  friend bool operator==(const Genome&, const Genome&) = default;
};

/// Sampling bounds for each gene. When a *_choices list is nonempty the
/// gene is drawn from (and mutated within) that finite set instead of the
/// continuous range; small-scale searches use this to stay on a lattice.
struct GeneRanges {
  double lr_min = 1e-3, lr_max = 0.1; // log-uniform
  int layers_min = 1, layers_max = 5;
  int neurons_min = 50, neurons_max = 500;
  double dropout_min = 0.0, dropout_max = 0.5;
  int units_min = 20, units_max = 200;
  double fbias_min = 1.0, fbias_max = 5.0;

  std::vector<double> lr_choices;
  std::vector<int> unit_choices;
  std::vector<double> fbias_choices;
  std::vector<Activation> act_choices; // empty means all three

  void validate() const;
};

struct GaConfig {
  int population_size = 50;
  int max_generations = 30;
  int tournament_size = 3;
  double crossover_prob = 0.9;
  double mutation_prob = 0.1; // per gene
  int elitism = 2;
  int stall_patience = 15;    // generations without best improvement
  int train_hours = 336;      // series truncation during the search
  int inner_epochs = 12;      // per-individual training budget in the loop
  int inner_patience = 4;
  int eval_hours = 24;        // probe hours for the cost objective
  bool allocation_fixed = false; // freeze allocation genes (lattice studies)
  std::uint64_t seed = 7;
  GeneRanges ranges;

  void validate() const;
};

struct Fitness {
  double raw_cost = 0.0; // network objective at the probe hours
  double penalty = 0.0;  // accumulated constraint-violation mass
  double total = 0.0;    // raw_cost + penalty_weight * penalty
};

struct GenRecord {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double penalty_rate = 0.0; // fraction of the population in violation
};

struct RunResult {
  Genome best;
  Fitness best_fitness;
  forecast::LstmModel model;       // best genome's forecaster, full-series
  forecast::ForecastMetrics test;  // its held-out metrics
  std::vector<GenRecord> history;
  bool fine_tuned = false;
  int generations_run = 0;
};

/// Everything a fitness evaluation reads. Borrowed views; the owner must
/// outlive the search.
struct EvalInputs {
  const scenario::ScenarioConfig* cfg = nullptr;
  std::span<const scenario::BaseStation> stations;
  std::span<const scenario::Uav> fleet;
  std::span<const scenario::DemandSnapshot> snaps; // hour-major, n_areas per hour
  std::span<const forecast::StationSeries> series;
};

Genome random_genome(const GeneRanges& r, int n_uavs, int n_areas, Rng& rng);

/// Uniform per-gene exchange; allocations crossed per-area, then repaired
/// so no drone serves two areas.
std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng);

/// Each gene independently resampled within range with per_gene_prob; the
/// allocation mutates by one reassignment move (one drone changes area or
/// assignment status).
void mutate(Genome& g, const GeneRanges& r, int n_uavs, int n_areas,
            double per_gene_prob, Rng& rng);

/// Index of the tournament winner (lowest total fitness).
std::size_t tournament_select(std::span<const Fitness> scores, int k, Rng& rng);

/// Builds the genome's forecaster with a genome-content-derived seed,
/// trains it on truncated series, and prices the allocation at the probe
/// hours. Infeasible genomes come back with penalty mass, never exceptions.
Fitness fitness(const Genome& g, const EvalInputs& in, const GaConfig& ga,
                const forecast::TrainConfig& tc);

/// Deficit-driven assignment: repeatedly hand the cheapest (drone, area)
/// pair another drone until every deficit area has its requested count or
/// the fleet runs out. cost_matrix is drone-major (n_uavs x n_areas);
/// deficit_drones[j] is the drone count area j asks for.
std::map<int, std::vector<int>> allocate_greedy(
    std::span<const int> deficit_drones, std::span<const double> cost_matrix,
    std::span<const scenario::Uav> fleet, int n_areas);

using ProgressFn = std::function<void(const GenRecord&)>;

/// Full search loop: seeded population, parallel cached evaluation, elitist
/// generational replacement with tournament selection, uniform crossover
/// and per-gene mutation, early stop on stall. The best genome's forecaster
/// is retrained on the untruncated series before returning; when its
/// held-out metrics clear r2_bar and unassigned drones remain, a reduced-
/// rate fine-tune pass runs on top. state_path, when nonempty, persists the
/// loop state each generation and resumes from it when the file exists.
RunResult run(const EvalInputs& in, const GaConfig& ga,
              const forecast::TrainConfig& tc, double r2_bar = 0.7,
              const ProgressFn& progress = {},
              const std::filesystem::path& state_path = {});

void write_history_csv(std::span<const GenRecord> history,
                       const std::filesystem::path& path);

void write_genome_txt(const Genome& g, const Fitness& f,
                      const std::filesystem::path& path);

}  // namespace uavgrid::evo
