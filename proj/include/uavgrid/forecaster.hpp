#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uavgrid/scenario.hpp"

namespace uavgrid::forecast {

inline constexpr int kFeatureDim = 4;

/// One feature row per hour: utilisation share, energy expenditure (J),
/// and the hour-of-day phase pair.
using FeatureRow = std::array<double, kFeatureDim>;

/// Hourly history of one station. target[t] is the value to predict from
/// the window ending at features[t].
struct StationSeries {
  int station = 0;
  std::vector<FeatureRow> features;
  std::vector<double> target;
};

enum class Activation { relu, sigmoid, tanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LstmShape {
  int input_dim = kFeatureDim;
  int hidden_units = 32;
  int hidden_layers = 1;      // dense layers between the cell and the head
  int neurons_per_layer = 50;
  Activation activation = Activation::tanh;
  double forget_bias = 1.0;
  double dropout_rate = 0.0;

  friend bool operator==(const LstmShape&, const LstmShape&) = default;
};

/// Recurrent forecaster: one gated cell, a small dense stack, a linear
/// head. Weights live in one flat vector (gate order f, i, o, g; each gate
/// holds input weights, then recurrent weights, then bias; dense layers and
/// the head follow) so numeric gradient sweeps and serialization touch
/// every parameter by index.
struct LstmModel {
  LstmShape shape;
  std::vector<double> params;

  // feature/target standardisation captured at training time; identity
  // until train() fills it in
  std::array<double, kFeatureDim> feat_mean{};
  std::array<double, kFeatureDim> feat_std{1.0, 1.0, 1.0, 1.0};
  double target_mean = 0.0;
  double target_std = 1.0;

  std::size_t param_count() const;
  static LstmModel init(const LstmShape& shape, std::uint64_t seed);
};

/// Raw network output for a window of (already standardised) rows.
/// Dropout is inference-off. Window must be nonempty and every row finite.
double forward(const LstmModel& m, std::span<const FeatureRow> window);

/// forward() plus the model's stored standardisation on both ends: takes
/// raw feature rows, returns a prediction in target units.
double predict(const LstmModel& m, std::span<const FeatureRow> window);

struct TrainConfig {
  int window_hours = 24;
  int batch_size = 128;
  int max_epochs = 100;
  int patience = 10;       // epochs without validation improvement
  double learning_rate = 0.02;
  double train_frac = 0.70;
  double valid_frac = 0.15; // remainder is the test split
  std::uint64_t seed = 1;
};

struct ForecastMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> r2; // absent when the target has zero variance
};

struct TrainResult {
  LstmModel model;             // best-validation snapshot
  std::vector<double> train_loss;  // per epoch, standardised MSE
  std::vector<double> valid_loss;
  int epochs_run = 0;
  ForecastMetrics test;        // held-out metrics in target units
};

/// Chronological split per station, windows pooled across stations (never
/// spanning a station boundary), mini-batch gradient descent with
/// validation early stopping. Throws DivergenceError on non-finite loss.
TrainResult train(const LstmModel& init, std::span<const StationSeries> series,
                  const TrainConfig& cfg);

/// Analytic parameter gradient of the squared loss (forward(m, window) -
/// target)^2, dropout off, one entry per flat parameter.
std::vector<double> loss_gradient(const LstmModel& m,
                                  std::span<const FeatureRow> window,
                                  double target);

/// Max relative error between the analytic gradient of the squared loss
/// and a central finite difference, over all parameters.
double gradient_check(const LstmModel& m, std::span<const FeatureRow> window,
                      double target, double fd_step = 1e-5);

/// Metrics over paired prediction/truth vectors. Sizes must match and be
/// nonzero.
ForecastMetrics evaluate(std::span<const double> predicted,
                         std::span<const double> actual);

/// Walk the series with the model's window and collect next-hour
/// predictions versus truth.
ForecastMetrics evaluate_series(const LstmModel& m,
                                std::span<const StationSeries> series,
                                int window_hours);

/// Next-hour prediction from the trailing window of one station's history.
double predict_next(const LstmModel& m, const StationSeries& s, int window_hours);

// versioned JSON checkpoint; load validates dimensions against the stored
// weight count and throws ShapeError on mismatch
void save_checkpoint(const LstmModel& m, const std::filesystem::path& path);
LstmModel load_checkpoint(const std::filesystem::path& path);

/// Build per-station series from realized demand and the stations' serving
/// economics: expenditure[t] = e_per_load * min(requests, capacity), target
/// is the next hour's expenditure.
std::vector<StationSeries> make_series(
    const std::vector<scenario::DemandSnapshot>& snaps,
    const std::vector<scenario::BaseStation>& stations);

}  // namespace uavgrid::forecast
