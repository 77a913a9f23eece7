#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "lion/rng.hpp"

namespace lion {

// Common surface for the time-series predictors: train on a (normalized)
// series, predict one step from a window, or iterate h steps ahead.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::vector<double> train(const std::vector<double>& series, int epochs,
                                    double lr) = 0;
  virtual double predict_next(const std::vector<double>& window) const = 0;
  virtual int window() const = 0;

  // Iterated one-step prediction, each output fed back as input.
  std::vector<double> forecast(const std::vector<double>& recent, int h) const {
    if (static_cast<int>(recent.size()) != window())
      throw std::invalid_argument("forecast input must match the window length");
    std::vector<double> buf = recent;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(std::max(h, 0)));
    for (int step = 0; step < h; ++step) {
      double y = predict_next(buf);
      out.push_back(y);
      buf.erase(buf.begin());
      buf.push_back(y);
    }
    return out;
  }
};

// Gradient-free baseline: tomorrow looks like today.
class LastValueForecaster final : public Forecaster {
 public:
  explicit LastValueForecaster(int window_len = 10) : window_(window_len) {}
  std::vector<double> train(const std::vector<double>&, int, double) override {
    return {};
  }
  double predict_next(const std::vector<double>& w) const override {
    if (w.empty()) throw std::invalid_argument("empty window");
    return w.back();
  }
  int window() const override { return window_; }

 private:
  int window_;
};

// Two-layer LSTM with a linear readout, trained by plain gradient descent
// on one-step-ahead MSE over sliding windows. Weights start uniform in
// [-0.1, 0.1] from a seeded generator; updates are clipped at global norm 5.
class LstmForecaster final : public Forecaster {
 public:
  struct Config {
    int hidden = 20;
    int window = 10;
    std::uint64_t seed = 42;
  };

  LstmForecaster() : LstmForecaster(Config{}) {}
  explicit LstmForecaster(Config cfg) : cfg_(cfg) {
    if (cfg_.hidden < 1 || cfg_.window < 1)
      throw std::invalid_argument("hidden and window must be positive");
    layout();
    params_.assign(total_params_, 0.0);
    Rng rng(cfg_.seed, 0x15f3);
    for (double& w : params_) w = rng.uniform_real() * 0.2 - 0.1;
  }

  int window() const override { return cfg_.window; }
  int hidden() const { return cfg_.hidden; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }

  double predict_next(const std::vector<double>& w) const override {
    if (static_cast<int>(w.size()) != cfg_.window)
      throw std::invalid_argument("window length mismatch");
    Cache cache;
    return forward(w, cache);
  }

  // Mean one-step-ahead squared error over all sliding windows.
  double loss(const std::vector<double>& series) const {
    std::size_t n = window_count(series);
    double total = 0.0;
    Cache cache;
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<double> w(series.begin() + s, series.begin() + s + cfg_.window);
      double pred = forward(w, cache);
      double err = pred - series[s + cfg_.window];
      total += err * err;
    }
    return total / static_cast<double>(n);
  }

  // Analytic gradient of loss() via backpropagation through time.
  std::vector<double> gradient(const std::vector<double>& series) const {
    std::size_t n = window_count(series);
    std::vector<double> grad(total_params_, 0.0);
    Cache cache;
    std::vector<double> g(total_params_);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<double> w(series.begin() + s, series.begin() + s + cfg_.window);
      double pred = forward(w, cache);
      double dloss = 2.0 * (pred - series[s + cfg_.window]);
      std::fill(g.begin(), g.end(), 0.0);
      backward(cache, dloss, g);
      for (std::size_t i = 0; i < total_params_; ++i)
        grad[i] += g[i] / static_cast<double>(n);
    }
    return grad;
  }

  // Per-window gradient descent; returns the mean loss per epoch (from the
  // pre-update window losses). Zero epochs leaves weights untouched.
  std::vector<double> train(const std::vector<double>& series, int epochs,
                            double lr) override {
    std::size_t n = window_count(series);
    std::vector<double> epoch_losses;
    Cache cache;
    std::vector<double> g(total_params_);
    for (int e = 0; e < epochs; ++e) {
      double total = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> w(series.begin() + s, series.begin() + s + cfg_.window);
        double pred = forward(w, cache);
        double err = pred - series[s + cfg_.window];
        total += err * err;
        std::fill(g.begin(), g.end(), 0.0);
        backward(cache, 2.0 * err, g);
        double norm2 = 0.0;
        for (double v : g) norm2 += v * v;
        double norm = std::sqrt(norm2);
        double scale = norm > 5.0 ? 5.0 / norm : 1.0;
        for (std::size_t i = 0; i < total_params_; ++i)
          params_[i] -= lr * scale * g[i];
      }
      epoch_losses.push_back(total / static_cast<double>(n));
    }
    return epoch_losses;
  }

  // Flat binary: 16-byte header (8-byte magic, u32 hidden, u32 window)
  // followed by the parameters as little-endian 64-bit floats.
  std::string serialize() const {
    std::string out(kMagic, 8);
    std::uint32_t dims[2] = {static_cast<std::uint32_t>(cfg_.hidden),
                             static_cast<std::uint32_t>(cfg_.window)};
    out.append(reinterpret_cast<const char*>(dims), 8);
    out.append(reinterpret_cast<const char*>(params_.data()),
               params_.size() * sizeof(double));
    return out;
  }

  static LstmForecaster deserialize(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
      throw std::invalid_argument("bad forecaster header");
    std::uint32_t dims[2];
    std::memcpy(dims, bytes.data() + 8, 8);
    Config cfg;
    cfg.hidden = static_cast<int>(dims[0]);
    cfg.window = static_cast<int>(dims[1]);
    LstmForecaster f(cfg);
    if (bytes.size() != 16 + f.total_params_ * sizeof(double))
      throw std::invalid_argument("bad forecaster payload size");
    std::memcpy(f.params_.data(), bytes.data() + 16,
                f.total_params_ * sizeof(double));
    return f;
  }

 private:
  static constexpr char kMagic[9] = "LIONLSTM";
  static constexpr int kGates = 4;  // input, forget, cell, output

  struct LayerOffsets {
    int in = 0;
    std::size_t w[kGates] = {};  // H x in
    std::size_t u[kGates] = {};  // H x H
    std::size_t b[kGates] = {};  // H
  };

  void layout() {
    std::size_t at = 0;
    for (int l = 0; l < 2; ++l) {
      layers_[l].in = (l == 0) ? 1 : cfg_.hidden;
      for (int gate = 0; gate < kGates; ++gate) {
        layers_[l].w[gate] = at;
        at += static_cast<std::size_t>(cfg_.hidden) * layers_[l].in;
      }
      for (int gate = 0; gate < kGates; ++gate) {
        layers_[l].u[gate] = at;
        at += static_cast<std::size_t>(cfg_.hidden) * cfg_.hidden;
      }
      for (int gate = 0; gate < kGates; ++gate) {
        layers_[l].b[gate] = at;
        at += cfg_.hidden;
      }
    }
    out_w_ = at;
    at += cfg_.hidden;
    out_b_ = at;
    at += 1;
    total_params_ = at;
  }

  std::size_t window_count(const std::vector<double>& series) const {
    if (static_cast<int>(series.size()) <= cfg_.window + 1)
      throw std::invalid_argument("history too short to train on");
    return series.size() - cfg_.window;
  }

  struct StepCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> gate[kGates];  // post-activation
    std::vector<double> c, tanh_c, h;
  };
  struct Cache {
    std::vector<StepCache> steps[2];
    int T = 0;
  };

  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  void step_forward(int layer, const std::vector<double>& x,
                    const std::vector<double>& h_prev,
                    const std::vector<double>& c_prev, StepCache& sc) const {
    const int H = cfg_.hidden;
    const LayerOffsets& L = layers_[layer];
    sc.x = x;
    sc.h_prev = h_prev;
    sc.c_prev = c_prev;
    for (int gate = 0; gate < kGates; ++gate) sc.gate[gate].assign(H, 0.0);
    sc.c.assign(H, 0.0);
    sc.tanh_c.assign(H, 0.0);
    sc.h.assign(H, 0.0);
    for (int j = 0; j < H; ++j) {
      double z[kGates];
      for (int gate = 0; gate < kGates; ++gate) {
        double a = params_[L.b[gate] + j];
        const double* wrow = &params_[L.w[gate] + static_cast<std::size_t>(j) * L.in];
        for (int i = 0; i < L.in; ++i) a += wrow[i] * x[i];
        const double* urow = &params_[L.u[gate] + static_cast<std::size_t>(j) * H];
        for (int i = 0; i < H; ++i) a += urow[i] * h_prev[i];
        z[gate] = a;
      }
      double ig = sigmoid(z[0]);
      double fg = sigmoid(z[1]);
      double gg = std::tanh(z[2]);
      double og = sigmoid(z[3]);
      sc.gate[0][j] = ig;
      sc.gate[1][j] = fg;
      sc.gate[2][j] = gg;
      sc.gate[3][j] = og;
      sc.c[j] = fg * c_prev[j] + ig * gg;
      sc.tanh_c[j] = std::tanh(sc.c[j]);
      sc.h[j] = og * sc.tanh_c[j];
    }
  }

  double forward(const std::vector<double>& w, Cache& cache) const {
    const int H = cfg_.hidden;
    cache.T = static_cast<int>(w.size());
    for (int l = 0; l < 2; ++l) cache.steps[l].assign(cache.T, {});
    std::vector<double> h[2], c[2];
    for (int l = 0; l < 2; ++l) {
      h[l].assign(H, 0.0);
      c[l].assign(H, 0.0);
    }
    for (int t = 0; t < cache.T; ++t) {
      std::vector<double> x0 = {w[t]};
      step_forward(0, x0, h[0], c[0], cache.steps[0][t]);
      h[0] = cache.steps[0][t].h;
      c[0] = cache.steps[0][t].c;
      step_forward(1, h[0], h[1], c[1], cache.steps[1][t]);
      h[1] = cache.steps[1][t].h;
      c[1] = cache.steps[1][t].c;
    }
    double y = params_[out_b_];
    for (int j = 0; j < H; ++j) y += params_[out_w_ + j] * h[1][j];
    return y;
  }

  // Backward through one layer across all timesteps. dh_in[t] holds the
  // gradient arriving at h_t from above; returns dx per step via dx_out.
  void layer_backward(int layer, const Cache& cache,
                      std::vector<std::vector<double>>& dh_in,
                      std::vector<std::vector<double>>* dx_out,
                      std::vector<double>& grad) const {
    const int H = cfg_.hidden;
    const LayerOffsets& L = layers_[layer];
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
    std::vector<double> dz[kGates];
    for (int gate = 0; gate < kGates; ++gate) dz[gate].assign(H, 0.0);
    for (int t = cache.T - 1; t >= 0; --t) {
      const StepCache& sc = cache.steps[layer][t];
      std::vector<double> dh(H), dc(H);
      for (int j = 0; j < H; ++j) {
        dh[j] = dh_in[t][j] + dh_next[j];
        double d_tanh = dh[j] * sc.gate[3][j] * (1.0 - sc.tanh_c[j] * sc.tanh_c[j]);
        dc[j] = d_tanh + dc_next[j];
        double dog = dh[j] * sc.tanh_c[j];
        double dig = dc[j] * sc.gate[2][j];
        double dgg = dc[j] * sc.gate[0][j];
        double dfg = dc[j] * sc.c_prev[j];
        dz[0][j] = dig * sc.gate[0][j] * (1.0 - sc.gate[0][j]);
        dz[1][j] = dfg * sc.gate[1][j] * (1.0 - sc.gate[1][j]);
        dz[2][j] = dgg * (1.0 - sc.gate[2][j] * sc.gate[2][j]);
        dz[3][j] = dog * sc.gate[3][j] * (1.0 - sc.gate[3][j]);
        dc_next[j] = dc[j] * sc.gate[1][j];
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      if (dx_out) std::fill((*dx_out)[t].begin(), (*dx_out)[t].end(), 0.0);
      for (int gate = 0; gate < kGates; ++gate) {
        for (int j = 0; j < H; ++j) {
          double d = dz[gate][j];
          if (d == 0.0) continue;
          double* wg = &grad[L.w[gate] + static_cast<std::size_t>(j) * L.in];
          const double* wp = &params_[L.w[gate] + static_cast<std::size_t>(j) * L.in];
          for (int i = 0; i < L.in; ++i) {
            wg[i] += d * sc.x[i];
            if (dx_out) (*dx_out)[t][i] += d * wp[i];
          }
          double* ug = &grad[L.u[gate] + static_cast<std::size_t>(j) * H];
          const double* up = &params_[L.u[gate] + static_cast<std::size_t>(j) * H];
          for (int i = 0; i < H; ++i) {
            ug[i] += d * sc.h_prev[i];
            dh_next[i] += d * up[i];
          }
          grad[L.b[gate] + j] += d;
        }
      }
    }
  }

  void backward(const Cache& cache, double dloss, std::vector<double>& grad) const {
    const int H = cfg_.hidden;
    const StepCache& last = cache.steps[1][cache.T - 1];
    grad[out_b_] += dloss;
    std::vector<std::vector<double>> dh1(cache.T, std::vector<double>(H, 0.0));
    for (int j = 0; j < H; ++j) {
      grad[out_w_ + j] += dloss * last.h[j];
      dh1[cache.T - 1][j] = dloss * params_[out_w_ + j];
    }
    std::vector<std::vector<double>> dx1(cache.T, std::vector<double>(H, 0.0));
    layer_backward(1, cache, dh1, &dx1, grad);
    // Layer 1 consumed layer 0's hidden states as inputs.
    layer_backward(0, cache, dx1, nullptr, grad);
  }

  Config cfg_;
  LayerOffsets layers_[2];
  std::size_t out_w_ = 0, out_b_ = 0, total_params_ = 0;
  std::vector<double> params_;
};

}  // namespace lion
