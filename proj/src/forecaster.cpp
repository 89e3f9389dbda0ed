#include "uavgrid/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "uavgrid/errors.hpp"
#include "uavgrid/rng.hpp"

namespace uavgrid::forecast {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

namespace {

// flat parameter layout: gates f, i, o, g back to back, each as
// [input weights HxI][recurrent weights HxH][bias H]; then the dense stack
// (layer 0 maps H -> N, the rest N -> N, each with bias) and the head
struct Layout {
  int I, H, N, L;
  std::size_t gate_stride, dense_base, layer1_size, layerk_size;
  explicit Layout(const LstmShape& s)
      : I(s.input_dim),
        H(s.hidden_units),
        N(s.neurons_per_layer),
        L(s.hidden_layers),
        gate_stride(static_cast<std::size_t>(s.hidden_units) *
                        (s.input_dim + s.hidden_units) +
                    s.hidden_units),
        dense_base(4 * gate_stride),
        layer1_size(static_cast<std::size_t>(N) * H + N),
        layerk_size(static_cast<std::size_t>(N) * N + N) {}
  std::size_t w(int gate) const { return gate * gate_stride; }
  std::size_t u(int gate) const {
    return gate * gate_stride + static_cast<std::size_t>(H) * I;
  }
  std::size_t b(int gate) const {
    return gate * gate_stride + static_cast<std::size_t>(H) * (I + H);
  }
  int fan_in(int layer) const { return layer == 0 ? H : N; }
  std::size_t dense_w(int layer) const {
    return layer == 0 ? dense_base
                      : dense_base + layer1_size + (layer - 1) * layerk_size;
  }
  std::size_t dense_b(int layer) const {
    return dense_w(layer) + static_cast<std::size_t>(N) * fan_in(layer);
  }
  std::size_t head_w() const { return dense_base + layer1_size + (L - 1) * layerk_size; }
  std::size_t head_b() const { return head_w() + N; }
  std::size_t total() const { return head_b() + 1; }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double act(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

// derivative expressed through the pre-activation
inline double act_grad(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

// per-window activation caches for backprop
struct Tape {
  int T = 0;
  std::vector<double> x;                     // T*I
  std::vector<double> f, i, o, g, c, tc, h;  // each T*H
  std::vector<double> dz, da;                // dense pre/post, L*N each
  void resize(int t, const Layout& L) {
    T = t;
    x.resize(static_cast<std::size_t>(t) * L.I);
    const std::size_t n = static_cast<std::size_t>(t) * L.H;
    f.resize(n); i.resize(n); o.resize(n); g.resize(n);
    c.resize(n); tc.resize(n); h.resize(n);
    dz.resize(static_cast<std::size_t>(L.L) * L.N);
    da.resize(static_cast<std::size_t>(L.L) * L.N);
  }
};

// drop_mask (size H, entries 0 or 1/keep) gates the final hidden state on
// its way into the dense stack; nullptr means dropout off
double forward_impl(const LstmModel& m, std::span<const FeatureRow> window,
                    const double* drop_mask, Tape* tape) {
  const Layout L(m.shape);
  const int H = L.H, I = L.I, T = static_cast<int>(window.size());
  const Activation A = m.shape.activation;
  const double* p = m.params.data();

  if (tape) tape->resize(T, L);
  std::vector<double> h(H, 0.0), c(H, 0.0), hn(H), cn(H);

  for (int t = 0; t < T; ++t) {
    const double* x = window[static_cast<std::size_t>(t)].data();
    if (tape)
      std::copy(x, x + I, tape->x.begin() + static_cast<std::size_t>(t) * I);
    for (int n = 0; n < H; ++n) {
      double zf = p[L.b(0) + n], zi = p[L.b(1) + n], zo = p[L.b(2) + n],
             zg = p[L.b(3) + n];
      const double* wf = p + L.w(0) + static_cast<std::size_t>(n) * I;
      const double* wi = p + L.w(1) + static_cast<std::size_t>(n) * I;
      const double* wo = p + L.w(2) + static_cast<std::size_t>(n) * I;
      const double* wg = p + L.w(3) + static_cast<std::size_t>(n) * I;
      for (int k = 0; k < I; ++k) {
        zf += wf[k] * x[k];
        zi += wi[k] * x[k];
        zo += wo[k] * x[k];
        zg += wg[k] * x[k];
      }
      const double* uf = p + L.u(0) + static_cast<std::size_t>(n) * H;
      const double* ui = p + L.u(1) + static_cast<std::size_t>(n) * H;
      const double* uo = p + L.u(2) + static_cast<std::size_t>(n) * H;
      const double* ug = p + L.u(3) + static_cast<std::size_t>(n) * H;
      for (int k = 0; k < H; ++k) {
        zf += uf[k] * h[k];
        zi += ui[k] * h[k];
        zo += uo[k] * h[k];
        zg += ug[k] * h[k];
      }
      const double fv = sigmoid(zf), iv = sigmoid(zi), ov = sigmoid(zo),
                   gv = std::tanh(zg);
      const double cv = fv * c[n] + iv * gv;
      const double tcv = std::tanh(cv);
      cn[n] = cv;
      hn[n] = ov * tcv;
      if (tape) {
        const std::size_t at = static_cast<std::size_t>(t) * H + n;
        tape->f[at] = fv;
        tape->i[at] = iv;
        tape->o[at] = ov;
        tape->g[at] = gv;
        tape->c[at] = cv;
        tape->tc[at] = tcv;
        tape->h[at] = hn[n];
      }
    }
    h.swap(hn);
    c.swap(cn);
  }

  if (drop_mask)
    for (int n = 0; n < H; ++n) h[static_cast<std::size_t>(n)] *= drop_mask[n];

  // dense stack
  std::vector<double> a_prev = std::move(h);
  std::vector<double> a_cur(static_cast<std::size_t>(L.N));
  for (int l = 0; l < L.L; ++l) {
    const int fan = L.fan_in(l);
    for (int n = 0; n < L.N; ++n) {
      double z = p[L.dense_b(l) + n];
      const double* w = p + L.dense_w(l) + static_cast<std::size_t>(n) * fan;
      for (int k = 0; k < fan; ++k) z += w[k] * a_prev[static_cast<std::size_t>(k)];
      if (tape) tape->dz[static_cast<std::size_t>(l) * L.N + n] = z;
      a_cur[static_cast<std::size_t>(n)] = act(A, z);
      if (tape)
        tape->da[static_cast<std::size_t>(l) * L.N + n] =
            a_cur[static_cast<std::size_t>(n)];
    }
    a_prev = a_cur;
  }

  double y = p[L.head_b()];
  for (int n = 0; n < L.N; ++n)
    y += p[L.head_w() + n] * a_prev[static_cast<std::size_t>(n)];
  return y;
}

// dy is dLoss/dOutput; gradients accumulate into grad
void backward_impl(const LstmModel& m, const Tape& tape, double dy,
                   const double* drop_mask, std::vector<double>& grad) {
  const Layout L(m.shape);
  const int H = L.H, I = L.I, N = L.N, T = tape.T;
  const Activation A = m.shape.activation;
  const double* p = m.params.data();
  double* gp = grad.data();

  const std::size_t last = static_cast<std::size_t>(T - 1) * H;

  // head
  const std::size_t top = static_cast<std::size_t>(L.L - 1) * N;
  std::vector<double> d_act(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    gp[L.head_w() + n] += dy * tape.da[top + n];
    d_act[static_cast<std::size_t>(n)] = dy * p[L.head_w() + n];
  }
  gp[L.head_b()] += dy;

  // dense stack, top down
  std::vector<double> d_prev;
  for (int l = L.L - 1; l >= 0; --l) {
    const int fan = L.fan_in(l);
    d_prev.assign(static_cast<std::size_t>(fan), 0.0);
    const std::size_t row0 = static_cast<std::size_t>(l) * N;
    for (int n = 0; n < N; ++n) {
      const double dz =
          d_act[static_cast<std::size_t>(n)] * act_grad(A, tape.dz[row0 + n]);
      gp[L.dense_b(l) + n] += dz;
      const double* w = p + L.dense_w(l) + static_cast<std::size_t>(n) * fan;
      double* gw = gp + L.dense_w(l) + static_cast<std::size_t>(n) * fan;
      for (int k = 0; k < fan; ++k) {
        const double in_k =
            l == 0 ? (drop_mask ? tape.h[last + k] * drop_mask[k] : tape.h[last + k])
                   : tape.da[row0 - N + k];
        gw[k] += dz * in_k;
        d_prev[static_cast<std::size_t>(k)] += dz * w[k];
      }
    }
    d_act = d_prev;
  }

  std::vector<double> dh(H), dc(H, 0.0), dhn(H, 0.0);
  for (int n = 0; n < H; ++n)
    dh[static_cast<std::size_t>(n)] =
        d_act[static_cast<std::size_t>(n)] * (drop_mask ? drop_mask[n] : 1.0);

  std::vector<double> dzf(H), dzi(H), dzo(H), dzg(H);
  for (int t = T - 1; t >= 0; --t) {
    const std::size_t at = static_cast<std::size_t>(t) * H;
    const double* x = tape.x.data() + static_cast<std::size_t>(t) * I;
    const double* hprev = t > 0 ? tape.h.data() + (at - H) : nullptr;
    for (int n = 0; n < H; ++n) {
      const double fv = tape.f[at + n], iv = tape.i[at + n], ov = tape.o[at + n],
                   gv = tape.g[at + n], tcv = tape.tc[at + n];
      const double cprev = t > 0 ? tape.c[at - H + n] : 0.0;
      const double dct = dc[n] + dh[n] * ov * (1.0 - tcv * tcv);
      dzo[n] = dh[n] * tcv * ov * (1.0 - ov);
      dzf[n] = dct * cprev * fv * (1.0 - fv);
      dzi[n] = dct * gv * iv * (1.0 - iv);
      dzg[n] = dct * iv * (1.0 - gv * gv);
      dc[n] = dct * fv;  // becomes dc_{t-1}
    }
    std::fill(dhn.begin(), dhn.end(), 0.0);
    for (int n = 0; n < H; ++n) {
      const std::size_t row = static_cast<std::size_t>(n) * I;
      double* gwf = gp + L.w(0) + row;
      double* gwi = gp + L.w(1) + row;
      double* gwo = gp + L.w(2) + row;
      double* gwg = gp + L.w(3) + row;
      for (int k = 0; k < I; ++k) {
        gwf[k] += dzf[n] * x[k];
        gwi[k] += dzi[n] * x[k];
        gwo[k] += dzo[n] * x[k];
        gwg[k] += dzg[n] * x[k];
      }
      gp[L.b(0) + n] += dzf[n];
      gp[L.b(1) + n] += dzi[n];
      gp[L.b(2) + n] += dzo[n];
      gp[L.b(3) + n] += dzg[n];
      if (hprev) {
        const std::size_t rrow = static_cast<std::size_t>(n) * H;
        double* guf = gp + L.u(0) + rrow;
        double* gui = gp + L.u(1) + rrow;
        double* guo = gp + L.u(2) + rrow;
        double* gug = gp + L.u(3) + rrow;
        const double* uf = p + L.u(0) + rrow;
        const double* ui = p + L.u(1) + rrow;
        const double* uo = p + L.u(2) + rrow;
        const double* ug = p + L.u(3) + rrow;
        for (int k = 0; k < H; ++k) {
          guf[k] += dzf[n] * hprev[k];
          gui[k] += dzi[n] * hprev[k];
          guo[k] += dzo[n] * hprev[k];
          gug[k] += dzg[n] * hprev[k];
          dhn[k] += dzf[n] * uf[k] + dzi[n] * ui[k] + dzo[n] * uo[k] +
                    dzg[n] * ug[k];
        }
      }
    }
    dh.swap(dhn);
  }
}

void check_window(const LstmModel& m, std::span<const FeatureRow> window) {
  if (window.empty()) throw std::invalid_argument("window must be nonempty");
  for (const auto& row : window)
    for (int k = 0; k < m.shape.input_dim; ++k)
      if (!std::isfinite(row[static_cast<std::size_t>(k)]))
        throw std::invalid_argument("window contains a non-finite feature");
  if (m.params.size() != m.param_count())
    throw ShapeError("parameter vector does not match model dimensions");
}

void check_shape(const LstmShape& s) {
  if (s.input_dim <= 0 || s.hidden_units <= 0 || s.hidden_layers <= 0 ||
      s.neurons_per_layer <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (s.dropout_rate < 0.0 || s.dropout_rate >= 1.0)
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
}

}  // namespace

std::size_t LstmModel::param_count() const { return Layout(shape).total(); }

LstmModel LstmModel::init(const LstmShape& shape, std::uint64_t seed) {
  check_shape(shape);
  LstmModel m;
  m.shape = shape;
  const Layout L(shape);
  m.params.assign(L.total(), 0.0);
  Rng rng(derive_seed(seed, "lstm.init"));
  const double rec_scale = 1.0 / std::sqrt(static_cast<double>(shape.hidden_units));
  for (int g = 0; g < 4; ++g) {
    for (std::size_t k = L.w(g); k < L.b(g); ++k)
      m.params[k] = rng.uniform(-rec_scale, rec_scale);
    // gate biases start at zero; the forget gate opens wide so early
    // training keeps long memory
    if (g == 0)
      for (int n = 0; n < shape.hidden_units; ++n)
        m.params[L.b(0) + n] = shape.forget_bias;
  }
  for (int l = 0; l < L.L; ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(L.fan_in(l)));
    for (std::size_t k = L.dense_w(l); k < L.dense_b(l); ++k)
      m.params[k] = rng.uniform(-scale, scale);
  }
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(L.N));
  for (std::size_t k = L.head_w(); k < L.head_b(); ++k)
    m.params[k] = rng.uniform(-head_scale, head_scale);
  return m;
}

double forward(const LstmModel& m, std::span<const FeatureRow> window) {
  check_window(m, window);
  return forward_impl(m, window, nullptr, nullptr);
}

double predict(const LstmModel& m, std::span<const FeatureRow> window) {
  check_window(m, window);
  std::vector<FeatureRow> std_rows(window.begin(), window.end());
  for (auto& row : std_rows)
    for (int k = 0; k < kFeatureDim; ++k)
      row[static_cast<std::size_t>(k)] =
          (row[static_cast<std::size_t>(k)] - m.feat_mean[static_cast<std::size_t>(k)]) /
          m.feat_std[static_cast<std::size_t>(k)];
  return forward_impl(m, std_rows, nullptr, nullptr) * m.target_std + m.target_mean;
}

std::vector<double> loss_gradient(const LstmModel& m,
                                  std::span<const FeatureRow> window,
                                  double target) {
  check_window(m, window);
  Tape tape;
  const double y = forward_impl(m, window, nullptr, &tape);
  std::vector<double> grad(m.param_count(), 0.0);
  backward_impl(m, tape, 2.0 * (y - target), nullptr, grad);
  return grad;
}

double gradient_check(const LstmModel& m, std::span<const FeatureRow> window,
                      double target, double fd_step) {
  const std::vector<double> analytic = loss_gradient(m, window, target);
  LstmModel probe = m;
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.params.size(); ++k) {
    const double saved = probe.params[k];
    probe.params[k] = saved + fd_step;
    const double yp = forward_impl(probe, window, nullptr, nullptr);
    probe.params[k] = saved - fd_step;
    const double ym = forward_impl(probe, window, nullptr, nullptr);
    probe.params[k] = saved;
    const double lp = (yp - target) * (yp - target);
    const double lm = (ym - target) * (ym - target);
    const double numeric = (lp - lm) / (2.0 * fd_step);
    // near-zero components sit below the fd roundoff floor, which scales
    // with the loss magnitude; comparing them relatively would measure noise
    const double scale = std::max(std::abs(analytic[k]) + std::abs(numeric),
                                  1e-6 * std::max(1.0, lp + lm));
    const double rel = std::abs(analytic[k] - numeric) / scale;
    worst = std::max(worst, rel);
  }
  return worst;
}

ForecastMetrics evaluate(std::span<const double> predicted,
                         std::span<const double> actual) {
  if (predicted.empty() || predicted.size() != actual.size())
    throw std::invalid_argument("need equal-length nonempty prediction/actual");
  double se = 0.0, ae = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) {
    const double d = predicted[k] - actual[k];
    se += d * d;
    ae += std::abs(d);
    mean += actual[k];
  }
  const double n = static_cast<double>(actual.size());
  mean /= n;
  double ss_tot = 0.0;
  for (double a : actual) ss_tot += (a - mean) * (a - mean);
  ForecastMetrics out;
  out.rmse = std::sqrt(se / n);
  out.mae = ae / n;
  if (ss_tot > 0.0) out.r2 = 1.0 - se / ss_tot;
  return out;
}

// --- training --------------------------------------------------------------

namespace {

struct Sample {
  int station;
  int end;  // window covers rows [end - window + 1, end], target index end
};

}  // namespace

TrainResult train(const LstmModel& init, std::span<const StationSeries> series,
                  const TrainConfig& cfg) {
  if (series.empty()) throw std::invalid_argument("no series to train on");
  if (cfg.window_hours < 1 || cfg.batch_size < 1 || cfg.max_epochs < 1)
    throw std::invalid_argument(
        "window_hours, batch_size, max_epochs must be positive");
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("learning_rate must be positive");
  if (!(cfg.train_frac > 0.0) || !(cfg.valid_frac >= 0.0) ||
      cfg.train_frac + cfg.valid_frac >= 1.0)
    throw std::invalid_argument("split fractions must leave room for a test set");
  for (const auto& s : series)
    if (s.features.size() != s.target.size())
      throw ShapeError("series features/target length mismatch");

  const int W = cfg.window_hours;

  // chronological split per station; a window belongs to the split that owns
  // its target hour, so lookback may cross the boundary but targets never do
  std::vector<Sample> train_s, valid_s, test_s;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const int len = static_cast<int>(series[si].features.size());
    const int n_train = static_cast<int>(len * cfg.train_frac);
    const int n_valid = static_cast<int>(len * cfg.valid_frac);
    for (int end = W - 1; end < len; ++end) {
      Sample smp{static_cast<int>(si), end};
      if (end < n_train)
        train_s.push_back(smp);
      else if (end < n_train + n_valid)
        valid_s.push_back(smp);
      else
        test_s.push_back(smp);
    }
  }
  if (train_s.empty() || test_s.empty())
    throw ShapeError("series too short for the requested window and splits");

  // standardisation statistics from training rows only
  std::array<double, kFeatureDim> mean{}, var{};
  double tmean = 0.0, tvar = 0.0;
  std::size_t rows = 0;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const int n_train = static_cast<int>(series[si].features.size() * cfg.train_frac);
    for (int t = 0; t < n_train; ++t) {
      for (int k = 0; k < kFeatureDim; ++k)
        mean[static_cast<std::size_t>(k)] +=
            series[si].features[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
      tmean += series[si].target[static_cast<std::size_t>(t)];
      ++rows;
    }
  }
  if (rows == 0) throw ShapeError("empty training split");
  for (auto& v : mean) v /= static_cast<double>(rows);
  tmean /= static_cast<double>(rows);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const int n_train = static_cast<int>(series[si].features.size() * cfg.train_frac);
    for (int t = 0; t < n_train; ++t) {
      for (int k = 0; k < kFeatureDim; ++k) {
        const double d =
            series[si].features[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] -
            mean[static_cast<std::size_t>(k)];
        var[static_cast<std::size_t>(k)] += d * d;
      }
      const double d = series[si].target[static_cast<std::size_t>(t)] - tmean;
      tvar += d * d;
    }
  }
  std::array<double, kFeatureDim> sd;
  for (int k = 0; k < kFeatureDim; ++k) {
    const double v = var[static_cast<std::size_t>(k)] / static_cast<double>(rows);
    sd[static_cast<std::size_t>(k)] = v > 1e-24 ? std::sqrt(v) : 1.0;
  }
  const double tv = tvar / static_cast<double>(rows);
  const double tsd = tv > 1e-24 ? std::sqrt(tv) : 1.0;

  // standardised copies
  std::vector<std::vector<FeatureRow>> zf(series.size());
  std::vector<std::vector<double>> zt(series.size());
  for (std::size_t si = 0; si < series.size(); ++si) {
    zf[si] = series[si].features;
    zt[si] = series[si].target;
    for (auto& row : zf[si])
      for (int k = 0; k < kFeatureDim; ++k)
        row[static_cast<std::size_t>(k)] =
            (row[static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)]) /
            sd[static_cast<std::size_t>(k)];
    for (auto& t : zt[si]) t = (t - tmean) / tsd;
  }

  LstmModel model = init;
  model.feat_mean = mean;
  model.feat_std = sd;
  model.target_mean = tmean;
  model.target_std = tsd;
  if (model.params.size() != model.param_count())
    throw ShapeError("parameter vector does not match model dimensions");

  auto window_of = [&](const Sample& s) {
    return std::span<const FeatureRow>(
        zf[static_cast<std::size_t>(s.station)].data() + s.end - W + 1,
        static_cast<std::size_t>(W));
  };

  auto split_mse = [&](const std::vector<Sample>& set) {
    double acc = 0.0;
    for (const Sample& s : set) {
      const double y = forward_impl(model, window_of(s), nullptr, nullptr);
      const double d =
          y - zt[static_cast<std::size_t>(s.station)][static_cast<std::size_t>(s.end)];
      acc += d * d;
    }
    return acc / static_cast<double>(set.size());
  };

  TrainResult res;
  Rng shuffle_rng(derive_seed(cfg.seed, "train.shuffle"));
  Rng drop_rng(derive_seed(cfg.seed, "train.dropout"));
  std::vector<std::size_t> order(train_s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> grad(model.param_count());
  std::vector<double> drop_mask(static_cast<std::size_t>(model.shape.hidden_units));
  Tape tape;
  double best_valid = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = model.params;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // Fisher-Yates with the pinned stream
    for (std::size_t k = order.size(); k > 1; --k) {
      const std::size_t j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
      std::swap(order[k - 1], order[j]);
    }

    double epoch_loss = 0.0;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = at; b < stop; ++b) {
        const Sample& s = train_s[order[b]];
        const double* mask = nullptr;
        if (model.shape.dropout_rate > 0.0) {
          const double keep = 1.0 - model.shape.dropout_rate;
          for (auto& mk : drop_mask) mk = drop_rng.bernoulli(keep) ? 1.0 / keep : 0.0;
          mask = drop_mask.data();
        }
        const double y = forward_impl(model, window_of(s), mask, &tape);
        const double target =
            zt[static_cast<std::size_t>(s.station)][static_cast<std::size_t>(s.end)];
        const double err = y - target;
        epoch_loss += err * err;
        backward_impl(model, tape, 2.0 * err, mask, grad);
      }
      const double step = cfg.learning_rate / static_cast<double>(stop - at);
      for (std::size_t k = 0; k < model.params.size(); ++k)
        model.params[k] -= step * grad[k];
    }
    epoch_loss /= static_cast<double>(train_s.size());
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("training loss is not finite", epoch);

    const double valid_loss = valid_s.empty() ? epoch_loss : split_mse(valid_s);
    if (!std::isfinite(valid_loss))
      throw DivergenceError("validation loss is not finite", epoch);
    res.train_loss.push_back(epoch_loss);
    res.valid_loss.push_back(valid_loss);
    res.epochs_run = epoch + 1;

    if (valid_loss < best_valid - 1e-12) {
      best_valid = valid_loss;
      best_params = model.params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  model.params = std::move(best_params);
  res.model = model;

  std::vector<double> pred, truth;
  pred.reserve(test_s.size());
  truth.reserve(test_s.size());
  for (const Sample& s : test_s) {
    const double y = forward_impl(res.model, window_of(s), nullptr, nullptr);
    pred.push_back(y * tsd + tmean);
    truth.push_back(
        series[static_cast<std::size_t>(s.station)].target[static_cast<std::size_t>(s.end)]);
  }
  res.test = evaluate(pred, truth);
  return res;
}

ForecastMetrics evaluate_series(const LstmModel& m,
                                std::span<const StationSeries> series,
                                int window_hours) {
  std::vector<double> pred, truth;
  for (const auto& s : series) {
    const int len = static_cast<int>(s.features.size());
    for (int end = window_hours - 1; end < len; ++end) {
      const std::span<const FeatureRow> win(
          s.features.data() + end - window_hours + 1,
          static_cast<std::size_t>(window_hours));
      pred.push_back(predict(m, win));
      truth.push_back(s.target[static_cast<std::size_t>(end)]);
    }
  }
  return evaluate(pred, truth);
}

double predict_next(const LstmModel& m, const StationSeries& s, int window_hours) {
  if (static_cast<int>(s.features.size()) < window_hours)
    throw ShapeError("series shorter than the prediction window");
  const std::span<const FeatureRow> win(
      s.features.data() + s.features.size() - static_cast<std::size_t>(window_hours),
      static_cast<std::size_t>(window_hours));
  return predict(m, win);
}

// --- persistence -----------------------------------------------------------

void save_checkpoint(const LstmModel& m, const std::filesystem::path& path) {
  nlohmann::json j{{"format_version", 1},
                   {"input_dim", m.shape.input_dim},
                   {"hidden_units", m.shape.hidden_units},
                   {"hidden_layers", m.shape.hidden_layers},
                   {"neurons_per_layer", m.shape.neurons_per_layer},
                   {"activation", to_string(m.shape.activation)},
                   {"forget_bias", m.shape.forget_bias},
                   {"dropout_rate", m.shape.dropout_rate},
                   {"feat_mean", m.feat_mean},
                   {"feat_std", m.feat_std},
                   {"target_mean", m.target_mean},
                   {"target_std", m.target_std},
                   {"params", m.params}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << j.dump() << '\n';
}

LstmModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ShapeError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
      throw ShapeError("unsupported checkpoint format");
    LstmModel m;
    j.at("input_dim").get_to(m.shape.input_dim);
    j.at("hidden_units").get_to(m.shape.hidden_units);
    j.at("hidden_layers").get_to(m.shape.hidden_layers);
    j.at("neurons_per_layer").get_to(m.shape.neurons_per_layer);
    m.shape.activation = activation_from_string(j.at("activation").get<std::string>());
    j.at("forget_bias").get_to(m.shape.forget_bias);
    j.at("dropout_rate").get_to(m.shape.dropout_rate);
    j.at("feat_mean").get_to(m.feat_mean);
    j.at("feat_std").get_to(m.feat_std);
    j.at("target_mean").get_to(m.target_mean);
    j.at("target_std").get_to(m.target_std);
    j.at("params").get_to(m.params);
    if (m.shape.input_dim <= 0 || m.shape.hidden_units <= 0 ||
        m.shape.hidden_layers <= 0 || m.shape.neurons_per_layer <= 0)
      throw ShapeError("checkpoint dimensions must be positive");
    if (m.params.size() != m.param_count())
      throw ShapeError("checkpoint holds " + std::to_string(m.params.size()) +
                       " weights, dimensions imply " +
                       std::to_string(m.param_count()));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("checkpoint missing fields: ") + e.what());
  }
}

std::vector<StationSeries> make_series(
    const std::vector<scenario::DemandSnapshot>& snaps,
    const std::vector<scenario::BaseStation>& stations) {
  if (stations.empty()) throw std::invalid_argument("no stations");
  const int n = static_cast<int>(stations.size());
  std::vector<std::vector<double>> expend(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> util(static_cast<std::size_t>(n));
  for (const auto& s : snaps) {
    if (s.area_id < 0 || s.area_id >= n)
      throw ShapeError("snapshot area out of range");
    auto& e = expend[static_cast<std::size_t>(s.area_id)];
    auto& u = util[static_cast<std::size_t>(s.area_id)];
    if (static_cast<int>(e.size()) != s.hour)
      throw ShapeError("snapshots must arrive hour-dense per area");
    const auto& bs = stations[static_cast<std::size_t>(s.area_id)];
    const int served = std::min(s.service_requests, bs.user_capacity);
    e.push_back(bs.energy_per_load * served);
    u.push_back(static_cast<double>(s.active_users) / bs.user_capacity);
  }

  std::vector<StationSeries> out(static_cast<std::size_t>(n));
  constexpr double kTau = 6.283185307179586;
  for (int si = 0; si < n; ++si) {
    auto& dst = out[static_cast<std::size_t>(si)];
    dst.station = si;
    const auto& e = expend[static_cast<std::size_t>(si)];
    if (e.size() < 2) throw ShapeError("need at least two hours per station");
    for (std::size_t t = 0; t + 1 < e.size(); ++t) {
      const double hod = static_cast<double>(t % 24);
      dst.features.push_back({util[static_cast<std::size_t>(si)][t], e[t],
                              std::sin(kTau * hod / 24.0),
                              std::cos(kTau * hod / 24.0)});
      dst.target.push_back(e[t + 1]);
    }
  }
  return out;
}

}  // namespace uavgrid::forecast
