#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lion/core.hpp"
#include "lion/heat_graph.hpp"
#include "lion/lstm.hpp"
#include "lion/rng.hpp"

namespace lion {

// Canonical label for a transaction's access pattern: the sorted set of
// partitions it touches.
struct TemplateId {
  std::vector<PartitionId> parts;

  auto operator<=>(const TemplateId&) const = default;

  std::string name() const {
    std::string s;
    for (PartitionId p : parts) {
      s += 'P';
      s += std::to_string(p);
    }
    return s;
  }
};

inline TemplateId identify_template(const TxnMeta& t) {
  if (t.txn_parts.empty())
    throw std::invalid_argument("transaction touches no partitions");
  return TemplateId{t.txn_parts};  // txn_parts is sorted and deduplicated
}

// Per-template arrival-rate history: one sample per closed interval.
struct TemplateSeries {
  TemplateId template_id;
  std::vector<double> ar;
  double freq = 0.0;  // most recent sample, used as sampling weight
};

inline void append_sample(TemplateSeries& s, double count) {
  if (count < 0) throw std::invalid_argument("negative arrival count");
  s.ar.push_back(count);
  s.freq = count;
}

// 1 - cosine similarity; an all-zero vector has similarity 0 with anything.
inline double cosine_distance(const std::vector<double>& a,
                              const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("cosine_distance needs equal nonzero lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

struct WorkloadClass {
  std::vector<TemplateId> members;
  std::vector<double> member_freq;
  std::vector<double> ar;  // elementwise sum of member series
};

// Single-linkage grouping: templates land in one class iff connected by a
// chain of pairwise cosine distances below beta.
inline std::vector<WorkloadClass> classify(const std::vector<TemplateSeries>& templates,
                                           double beta) {
  if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
  const std::size_t n = templates.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (cosine_distance(templates[i].ar, templates[j].ar) < beta)
        parent[find(i)] = find(j);

  std::map<std::size_t, WorkloadClass> groups;
  for (std::size_t i = 0; i < n; ++i) {
    WorkloadClass& c = groups[find(i)];
    c.members.push_back(templates[i].template_id);
    c.member_freq.push_back(templates[i].freq);
    if (c.ar.empty()) c.ar.assign(templates[i].ar.size(), 0.0);
    for (std::size_t t = 0; t < templates[i].ar.size(); ++t)
      c.ar[t] += templates[i].ar[t];
  }
  std::vector<WorkloadClass> out;
  out.reserve(groups.size());
  for (auto& [root, c] : groups) out.push_back(std::move(c));
  return out;
}

// Root-mean-square gap between current and forecast arrival rates across
// classes.
inline double wv_from_rates(const std::vector<double>& current,
                            const std::vector<double>& forecast_at_h) {
  if (current.size() != forecast_at_h.size() || current.empty())
    throw std::invalid_argument("wv needs matching nonempty rate vectors");
  double sum = 0.0;
  for (std::size_t k = 0; k < current.size(); ++k) {
    double d = forecast_at_h[k] - current[k];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(current.size()));
}

inline bool maybe_trigger(double wv, double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  return wv > gamma;
}

// Workload variation at the newest sample index t: each class is forecast
// h steps ahead from the window that excludes the newest sample, so an
// abrupt change shows up as a gap between forecast and reality. One
// forecaster serves all classes here; the orchestrator below keeps a
// trained forecaster per class.
inline double workload_variation(const std::vector<WorkloadClass>& classes,
                                 const Forecaster& f, std::size_t t, int h) {
  const std::size_t w = static_cast<std::size_t>(f.window());
  std::vector<double> current, ahead;
  for (const WorkloadClass& c : classes) {
    if (t >= c.ar.size() || t < w)
      throw std::invalid_argument("insufficient history for workload_variation");
    std::vector<double> window(c.ar.begin() + (t - w), c.ar.begin() + t);
    std::vector<double> fc = f.forecast(window, h);
    ahead.push_back(fc.empty() ? window.back() : fc.back());
    current.push_back(c.ar[t]);
  }
  return wv_from_rates(current, ahead);
}

// Frequency-weighted draw of K templates from one class; duplicates fold
// into the multiplicity carried as the weight.
inline std::vector<std::pair<TemplateId, double>> sample_templates(
    const WorkloadClass& cls, std::size_t k, Rng& rng) {
  std::vector<std::pair<TemplateId, double>> out;
  if (cls.members.empty() || k == 0) return out;
  double total = 0.0;
  for (double f : cls.member_freq) total += f;
  std::map<TemplateId, double> counts;
  for (std::size_t draw = 0; draw < k; ++draw) {
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform_real() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < cls.members.size(); ++i) {
        acc += cls.member_freq[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform(cls.members.size());
    }
    counts[cls.members[pick]] += 1.0;
  }
  for (auto& [tid, c] : counts) out.push_back({tid, c});
  return out;
}

// Pick the class anticipated to dominate and draw K templates from it.
inline std::vector<std::pair<TemplateId, double>> predicted_templates(
    const std::vector<WorkloadClass>& classes,
    const std::vector<double>& anticipated_rate, std::size_t k, Rng& rng) {
  if (classes.empty() || classes.size() != anticipated_rate.size()) return {};
  std::size_t best = 0;
  for (std::size_t i = 1; i < classes.size(); ++i)
    if (anticipated_rate[i] > anticipated_rate[best]) best = i;
  return sample_templates(classes[best], k, rng);
}

// Fold predicted co-accesses into the heat graph as additional edge
// weight, scaled by w_p. A coefficient of zero leaves the graph untouched.
inline void inject(HeatGraph& g,
                   const std::vector<std::pair<TemplateId, double>>& preds,
                   double w_p) {
  if (w_p < 0.0) throw std::invalid_argument("w_p must be >= 0");
  if (w_p == 0.0) return;
  for (const auto& [tid, weight] : preds) {
    if (weight <= 0.0) continue;
    for (std::size_t i = 0; i < tid.parts.size(); ++i)
      for (std::size_t j = i + 1; j < tid.parts.size(); ++j) {
        auto key = HeatGraph::ordered(tid.parts[i], tid.parts[j]);
        auto it = g.edges.find(key);
        EdgeKind kind = it == g.edges.end() ? EdgeKind::Cross : it->second.kind;
        g.add_edge_weight(key.first, key.second, w_p * weight, kind);
        // Vertices must exist so clump generation can reach them.
        g.vertices.try_emplace(key.first, 0.0);
        g.vertices.try_emplace(key.second, 0.0);
      }
  }
}

// Drives the prediction pipeline inside a run: counts templates per
// sampling interval, reclassifies, keeps one forecaster per class, and
// raises the pre-replication trigger when the variation metric spikes.
class WorkloadPredictor {
 public:
  struct Config {
    std::uint64_t interval_us = 1'000'000;  // sampling interval (delta)
    int horizon = 10;                       // prediction horizon in intervals
    int window = 10;
    int hidden = 20;
    int train_epochs = 200;
    double lr = 0.01;
    double beta = 0.15;
    double gamma_scale = 0.25;   // gamma = scale * max amplitude seen
    double retrain_mse = 0.02;   // on normalized one-step errors
    std::uint64_t min_retrain_gap_us = 10'000'000;
    std::uint64_t refractory_us = 5'000'000;
    std::size_t train_history = 60;
    std::size_t classify_window = 30;
    std::uint64_t seed = 1;
    bool use_lstm = true;  // false: last-value fallback (never triggers)
  };

  struct Evaluation {
    bool triggered = false;
    double wv = 0.0;
    double gamma = 0.0;
    std::vector<std::pair<TemplateId, double>> predictions;
  };

  explicit WorkloadPredictor(Config cfg) : cfg_(cfg), rng_(cfg.seed, kPredStream) {}

  void observe(const TxnMeta& txn) {
    TemplateId tid = identify_template(txn);
    auto [it, fresh] = series_.try_emplace(tid);
    if (fresh) {
      it->second.template_id = tid;
      it->second.ar.assign(interval_count_, 0.0);  // zero-backfill to now
    }
    pending_[tid] += 1.0;
  }

  // Close the current sampling interval and evaluate the trigger.
  Evaluation close_interval(std::uint64_t now_us, std::size_t k_predictions) {
    for (auto& [tid, s] : series_) {
      double count = 0.0;
      if (auto it = pending_.find(tid); it != pending_.end()) count = it->second;
      append_sample(s, count);
      max_amplitude_ = std::max(max_amplitude_, count);
    }
    pending_.clear();
    ++interval_count_;

    Evaluation ev;
    classes_ = classify_recent();
    reconcile_class_states(now_us);

    if (interval_count_ < static_cast<std::size_t>(cfg_.window) + 2 ||
        max_amplitude_ <= 0.0)
      return ev;

    ev.gamma = cfg_.gamma_scale * class_amplitude();
    ev.wv = evaluate_wv();
    if (ev.gamma > 0.0 && maybe_trigger(ev.wv, ev.gamma) &&
        now_us - last_trigger_us_ >= cfg_.refractory_us) {
      last_trigger_us_ = now_us;
      ev.triggered = true;
      ev.predictions =
          predicted_templates(classes_, anticipated_rates(), k_predictions, rng_);
    }
    return ev;
  }

  const std::vector<WorkloadClass>& classes() const { return classes_; }
  std::size_t interval_count() const { return interval_count_; }

  // `t,class_id,actual,predicted` rows accumulated per interval.
  const std::string& csv() const { return csv_; }

 private:
  static constexpr std::uint64_t kPredStream = 0x9d;

  struct ClassState {
    std::unique_ptr<LstmForecaster> lstm;
    LastValueForecaster fallback{10};
    bool trained = false;
    double norm_lo = 0.0, norm_hi = 1.0;
    std::uint64_t last_train_us = 0;
    std::deque<double> recent_err2;  // normalized one-step errors
  };

  std::vector<WorkloadClass> classify_recent() {
    std::vector<TemplateSeries> snapshot;
    snapshot.reserve(series_.size());
    std::size_t w = std::min(cfg_.classify_window, interval_count_);
    for (const auto& [tid, s] : series_) {
      TemplateSeries t;
      t.template_id = tid;
      t.freq = s.freq;
      t.ar.assign(s.ar.end() - w, s.ar.end());
      snapshot.push_back(std::move(t));
    }
    if (snapshot.empty()) return {};
    return classify(snapshot, cfg_.beta);
  }

  static std::string class_key(const WorkloadClass& c) {
    std::string key;
    for (const TemplateId& t : c.members) {
      key += t.name();
      key += '|';
    }
    return key;
  }

  std::vector<double> normalized_tail(const WorkloadClass& c, std::size_t len,
                                      const ClassState& st) const {
    std::size_t take = std::min(len, full_series(c).size());
    const std::vector<double> s = full_series(c);
    std::vector<double> out(s.end() - take, s.end());
    double span = st.norm_hi - st.norm_lo;
    for (double& v : out) v = span > 1e-12 ? (v - st.norm_lo) / span : 0.5;
    return out;
  }

  // Class series over the full retained timeline (classify_recent trims for
  // clustering; training and forecasting use the longer view).
  std::vector<double> full_series(const WorkloadClass& c) const {
    std::vector<double> sum(interval_count_, 0.0);
    for (const TemplateId& tid : c.members) {
      const auto& ar = series_.at(tid).ar;
      for (std::size_t i = 0; i < ar.size(); ++i) sum[i] += ar[i];
    }
    return sum;
  }

  double class_amplitude() const {
    double amp = 0.0;
    for (const WorkloadClass& c : classes_)
      for (double v : full_series(c)) amp = std::max(amp, v);
    return amp;
  }

  void train_class(const WorkloadClass& c, ClassState& st, std::uint64_t now_us) {
    std::vector<double> s = full_series(c);
    std::size_t take = std::min(cfg_.train_history, s.size());
    std::vector<double> hist(s.end() - take, s.end());
    double lo = *std::min_element(hist.begin(), hist.end());
    double hi = *std::max_element(hist.begin(), hist.end());
    st.norm_lo = lo;
    st.norm_hi = hi;
    double span = hi - lo;
    for (double& v : hist) v = span > 1e-12 ? (v - lo) / span : 0.5;
    if (!st.lstm) {
      LstmForecaster::Config fc;
      fc.hidden = cfg_.hidden;
      fc.window = cfg_.window;
      fc.seed = cfg_.seed;
      st.lstm = std::make_unique<LstmForecaster>(fc);
    }
    st.lstm->train(hist, cfg_.train_epochs, cfg_.lr);
    st.trained = true;
    st.last_train_us = now_us;
    st.recent_err2.clear();
  }

  void reconcile_class_states(std::uint64_t now_us) {
    std::map<std::string, ClassState> next;
    for (const WorkloadClass& c : classes_) {
      std::string key = class_key(c);
      auto it = states_.find(key);
      if (it != states_.end()) next[key] = std::move(it->second);
      else next[key] = ClassState{};
    }
    states_ = std::move(next);

    std::size_t class_id = 0;
    for (const WorkloadClass& c : classes_) {
      ClassState& st = states_[class_key(c)];
      std::size_t len = interval_count_;
      double actual = full_series(c).back();
      double predicted = actual;
      if (cfg_.use_lstm && len >= static_cast<std::size_t>(cfg_.window) + 2) {
        if (!st.trained &&
            len >= std::max<std::size_t>(cfg_.window + 2, 20)) {
          train_class(c, st, now_us);
        } else if (st.trained) {
          // Rolling accuracy check on the newest sample.
          std::vector<double> w =
              normalized_tail(c, static_cast<std::size_t>(cfg_.window) + 1, st);
          std::vector<double> window(w.begin(), w.end() - 1);
          double pred_n = st.lstm->predict_next(window);
          double err = pred_n - w.back();
          st.recent_err2.push_back(err * err);
          if (st.recent_err2.size() > 10) st.recent_err2.pop_front();
          double span = st.norm_hi - st.norm_lo;
          predicted = st.norm_lo + pred_n * std::max(span, 0.0);
          double mse = 0.0;
          for (double e : st.recent_err2) mse += e;
          mse /= static_cast<double>(st.recent_err2.size());
          if (mse > cfg_.retrain_mse && st.recent_err2.size() >= 5 &&
              now_us - st.last_train_us >= cfg_.min_retrain_gap_us) {
            train_class(c, st, now_us);
          }
        }
      }
      csv_ += std::to_string(interval_count_ - 1) + ',' + std::to_string(class_id) +
              ',' + format(actual) + ',' + format(predicted) + '\n';
      ++class_id;
    }
  }

  // Forecast each class h ahead from the window that excludes the newest
  // sample; untrained classes fall back to last-value (wv contribution 0).
  double evaluate_wv() {
    std::vector<double> current, ahead;
    for (const WorkloadClass& c : classes_) {
      ClassState& st = states_[class_key(c)];
      std::vector<double> s = full_series(c);
      double cur = s.back();
      double fc = cur;
      if (cfg_.use_lstm && st.trained &&
          s.size() >= static_cast<std::size_t>(cfg_.window) + 1) {
        std::vector<double> tail =
            normalized_tail(c, static_cast<std::size_t>(cfg_.window) + 1, st);
        std::vector<double> window(tail.begin(), tail.end() - 1);
        std::vector<double> out = st.lstm->forecast(window, cfg_.horizon);
        double span = st.norm_hi - st.norm_lo;
        fc = st.norm_lo + (out.empty() ? window.back() : out.back()) *
                              std::max(span, 0.0);
        fc = std::max(fc, 0.0);
      }
      current.push_back(cur);
      ahead.push_back(fc);
    }
    if (current.empty()) return 0.0;
    return wv_from_rates(current, ahead);
  }

  // Best current estimate of each class's future level: trained classes
  // forecast from the window including the newest sample, others use it
  // directly. A degenerate normalization span (constant training history)
  // cannot express values away from that constant, so such classes also
  // fall back to the newest sample.
  std::vector<double> anticipated_rates() {
    std::vector<double> out;
    for (const WorkloadClass& c : classes_) {
      ClassState& st = states_[class_key(c)];
      std::vector<double> s = full_series(c);
      double level = s.back();
      if (cfg_.use_lstm && st.trained && st.norm_hi - st.norm_lo > 1e-12 &&
          s.size() >= static_cast<std::size_t>(cfg_.window)) {
        std::vector<double> tail =
            normalized_tail(c, static_cast<std::size_t>(cfg_.window), st);
        std::vector<double> fc = st.lstm->forecast(tail, cfg_.horizon);
        double span = st.norm_hi - st.norm_lo;
        if (!fc.empty())
          level = std::max(st.norm_lo + fc.back() * std::max(span, 0.0), 0.0);
      }
      out.push_back(level);
    }
    return out;
  }

  static std::string format(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  Config cfg_;
  Rng rng_;
  std::map<TemplateId, TemplateSeries> series_;
  std::map<TemplateId, double> pending_;
  std::map<std::string, ClassState> states_;
  std::vector<WorkloadClass> classes_;
  std::size_t interval_count_ = 0;
  double max_amplitude_ = 0.0;
  std::uint64_t last_trigger_us_ = 0;
  std::string csv_;
};

}  // namespace lion
