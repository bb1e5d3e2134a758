#include "ramp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ramp/error.hpp"
#include "ramp/text.hpp"

namespace ramp {

Eigen::MatrixXd predict_step(const ModelParams& params, const HistoryBlock& history) {
  const Dims dim = dims_of(params);
  if (history.rows() != dim.d || history.cols() != dim.K)
    throw DimensionError("history block does not match parameter dimensions");
  require_feasible(params);
  return state_probs(params, history);
}

std::string to_string(PolicyKind kind) { return kind == PolicyKind::fixed ? "static" : "dynamic"; }

PolicyKind parse_policy(const std::string& name) {
  if (name == "static") return PolicyKind::fixed;
  if (name == "dynamic") return PolicyKind::dynamic;
  throw ValidationError("unknown threshold policy '" + name + "'");
}

void ThresholdPolicy::validate() const {
  if (w2 < 1) throw ValidationError("w2 must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (static_tau.size() > 0 && ((static_tau.array() < 0.0).any() || (static_tau.array() > 1.0).any()))
    throw ValidationError("static thresholds must lie in [0, 1]");
}

TuneResult tune_static(std::span<const double> preds, std::span<const int> truth, int grid_size) {
  if (preds.size() != truth.size()) throw DimensionError("predictions and labels differ in length");
  if (preds.empty()) throw InsufficientDataError("validation split is empty");
  if (grid_size < 2) throw ValidationError("threshold grid needs at least 2 points");
  TuneResult best;
  if (std::none_of(truth.begin(), truth.end(), [](int v) { return v != 0; })) {
    best.fallback = true;
    return best;
  }
  best.f1 = -1.0;
  for (int i = 0; i < grid_size; ++i) {
    const double tau = static_cast<double>(i) / (grid_size - 1);
    long tp = 0, fp = 0, fn = 0;
    for (size_t j = 0; j < preds.size(); ++j) {
      const bool yes = preds[j] >= tau, real = truth[j] != 0;
      tp += yes && real;
      fp += yes && !real;
      fn += !yes && real;
    }
    const double f1 = metrics_from_counts(1, tp, fp, fn).f1;
    // Equal F1 computed from different counts can differ in the last bit;
    // such ties still go to the smaller tau.
    if (f1 > best.f1 + 1e-12) {
      best.f1 = f1;
      best.tau = tau;
    }
  }
  return best;
}

double dynamic_tau(std::span<const int> events, std::span<const double> preds, double alpha, double fallback) {
  if (events.size() != preds.size()) throw DimensionError("window lengths differ");
  double abn = 0.0, norm = 0.0;
  long na = 0, nn = 0;
  for (size_t i = 0; i < events.size(); ++i) {
    if (events[i] != 0) {
      abn += preds[i];
      ++na;
    } else {
      norm += preds[i];
      ++nn;
    }
  }
  if (na == 0 || nn == 0) return fallback;
  return alpha * (abn / na) + (1.0 - alpha) * (norm / nn);
}

double dynamic_tau_multi(std::span<const int> events, const Eigen::MatrixXd& preds, int M, int i, double fallback) {
  if (static_cast<long>(events.size()) != preds.rows() || preds.cols() != M)
    throw DimensionError("window shapes differ");
  if (i < 1 || i > M) throw ValidationError("boundary index must lie in 1..M");
  double total = 0.0;
  for (int m = 1; m <= M; ++m) {
    double sum = 0.0;
    long n = 0;
    for (size_t j = 0; j < events.size(); ++j)
      if (events[j] == m) {
        sum += preds(static_cast<long>(j), m - 1);
        ++n;
      }
    if (n == 0) return fallback;
    total += sum / n;
  }
  return static_cast<double>(i) / (M + 1) * total;
}

int decide(const Eigen::VectorXd& p_hat, const Eigen::VectorXd& tau) {
  if (p_hat.size() != tau.size()) throw DimensionError("probability and threshold vectors differ in length");
  int best = 0;
  for (int m = 1; m <= p_hat.size(); ++m)
    if (p_hat(m - 1) >= tau(m - 1) && (best == 0 || p_hat(m - 1) > p_hat(best - 1))) best = m;
  return best;
}

std::vector<PredictionRecord> run_sequential(const ModelParams& params, const EventSequence& events,
                                             const ThresholdPolicy& policy, const std::optional<IntervalSpec>& ci,
                                             int begin, int end) {
  const Dims dim = dims_of(params);
  const int K = dim.K, d = dim.d, M = dim.M;
  if (events.locations() != K || events.M != M) throw DimensionError("parameters and events disagree on K or M");
  policy.validate();
  if (policy.static_tau.rows() != K || policy.static_tau.cols() != M)
    throw DimensionError("static thresholds must be K x M");
  require_feasible(params);
  if (ci && ci->se.size() != dim.kappa) throw DimensionError("interval spread must have kappa entries");
  if (begin < 0) begin = events.valid_from + d;
  if (end < 0) end = events.days();
  if (begin < events.valid_from + d) throw InsufficientHistoryError("prediction starts before a full history");
  if (end > events.days() || begin > end) throw ValidationError("prediction range outside the event sequence");
  const int steps = end - begin;

  std::vector<std::vector<PredictionRecord>> per(K, std::vector<PredictionRecord>(steps));
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    std::vector<int> truth_win;
    Eigen::MatrixXd pred_win;
    for (int i = 0; i < steps; ++i) {
      const int t = begin + i;
      const HistoryBlock h = history_at(events, t, d);
      const Eigen::MatrixXd P = state_probs(params, h);
      PredictionRecord& r = per[k][i];
      r.t = t;
      r.k = k;
      r.p_hat = P.row(k).tail(M).transpose();
      r.truth = events.states(t, k);
      r.tau = policy.static_tau.row(k).transpose();
      if (policy.kind == PolicyKind::dynamic && i >= policy.w2) {
        const int w = policy.w2;
        truth_win.resize(w);
        pred_win.resize(w, M);
        for (int j = 0; j < w; ++j) {
          const auto& past = per[k][i - w + j];
          truth_win[j] = past.truth;
          pred_win.row(j) = past.p_hat.transpose();
        }
        if (M == 1) {
          std::vector<double> p1(pred_win.data(), pred_win.data() + w);
          r.tau(0) = dynamic_tau(truth_win, p1, policy.alpha, policy.static_tau(k, 0));
        } else {
          for (int b = 1; b <= M; ++b)
            r.tau(b - 1) = dynamic_tau_multi(truth_win, pred_win, M, b, policy.static_tau(k, b - 1));
        }
      }
      r.decision = decide(r.p_hat, r.tau);
      r.ci_low = r.p_hat;
      r.ci_high = r.p_hat;
      if (ci) {
        for (int p = 1; p <= M; ++p) {
          // Each probability is a sum of coefficients with unit weights, so
          // the endpoint plug-in widens it by z times the summed spreads.
          double spread;
          if (M == 1) {
            spread = ci->se(k);
            for (int s = 1; s <= d; ++s)
              for (int l = 0; l < K; ++l)
                if (h(s - 1, l)) spread += ci->se(SingleStateParams::vec_index(K, d, s, k, l));
          } else {
            spread = ci->se(static_cast<long>(k) * M + (p - 1));
            for (int s = 1; s <= d; ++s)
              for (int l = 0; l < K; ++l) spread += ci->se(MultiStateParams::vec_index(K, d, M, s, k, l, p, h(s - 1, l)));
          }
          const double v = r.p_hat(p - 1);
          r.ci_low(p - 1) = std::min(v, std::clamp(v - ci->z * spread, 0.0, 1.0));
          r.ci_high(p - 1) = std::max(v, std::clamp(v + ci->z * spread, 0.0, 1.0));
        }
      }
    }
  }
  std::vector<PredictionRecord> out;
  out.reserve(static_cast<size_t>(steps) * K);
  for (int i = 0; i < steps; ++i)
    for (int k = 0; k < K; ++k) out.push_back(std::move(per[k][i]));
  return out;
}

StateMetrics metrics_from_counts(int state, long tp, long fp, long fn) {
  StateMetrics m;
  m.state = state;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

MetricReport evaluate(const std::vector<PredictionRecord>& records, int K, int M) {
  if (records.empty()) throw InsufficientDataError("no prediction records to evaluate");
  MetricReport rep;
  rep.records = static_cast<long>(records.size());
  std::vector<long> tp(M + 1, 0), fp(M + 1, 0), fn(M + 1, 0);
  std::vector<long> ltp(K, 0), lfp(K, 0), lfn(K, 0);
  rep.avg_freq_pred = Eigen::MatrixXd::Zero(K, M);
  rep.avg_freq_true = Eigen::MatrixXd::Zero(K, M);
  Eigen::VectorXd per_loc = Eigen::VectorXd::Zero(K);
  for (const auto& r : records) {
    if (r.k < 0 || r.k >= K) throw DimensionError("record location out of range");
    per_loc(r.k) += 1.0;
    for (int m = 1; m <= M; ++m) {
      const bool yes = r.decision == m, real = r.truth == m;
      tp[m] += yes && real;
      fp[m] += yes && !real;
      fn[m] += !yes && real;
      ltp[r.k] += yes && real;
      lfp[r.k] += yes && !real;
      lfn[r.k] += !yes && real;
      rep.avg_freq_pred(r.k, m - 1) += yes;
      rep.avg_freq_true(r.k, m - 1) += real;
    }
  }
  long TP = 0, FP = 0, FN = 0;
  for (int m = 1; m <= M; ++m) {
    rep.per_state.push_back(metrics_from_counts(m, tp[m], fp[m], fn[m]));
    TP += tp[m];
    FP += fp[m];
    FN += fn[m];
  }
  rep.micro = metrics_from_counts(0, TP, FP, FN);
  for (int k = 0; k < K; ++k) rep.per_location.push_back(metrics_from_counts(0, ltp[k], lfp[k], lfn[k]));
  for (int k = 0; k < K; ++k)
    if (per_loc(k) > 0) {
      rep.avg_freq_pred.row(k) /= per_loc(k);
      rep.avg_freq_true.row(k) /= per_loc(k);
    }
  return rep;
}

ProtocolResult run_protocol(const ModelParams& params, const EventSequence& events, int begin,
                            const ProtocolConfig& cfg) {
  const Dims dim = dims_of(params);
  const int K = dim.K, M = dim.M;
  if (!(cfg.tune_split > 0.0 && cfg.tune_split < 1.0)) throw ValidationError("tune split must lie in (0, 1)");
  if (begin < 0) begin = events.valid_from + dim.d;
  const int T = events.days();
  if (begin >= T) throw InsufficientDataError("nothing to predict");
  ProtocolResult res;
  res.begin = begin;
  res.score_from = begin + static_cast<int>(std::floor(cfg.tune_split * (T - begin)));
  if (res.score_from <= begin || res.score_from >= T)
    throw InsufficientDataError("prediction period too short to split into tuning and scoring parts");

  ThresholdPolicy probe;
  probe.static_tau = Eigen::MatrixXd::Constant(K, M, 0.5);
  const auto raw = run_sequential(params, events, probe, std::nullopt, begin, res.score_from);

  ThresholdPolicy policy;
  policy.kind = cfg.kind;
  policy.alpha = cfg.alpha;
  policy.w2 = cfg.w2;
  policy.static_tau.resize(K, M);
  for (int k = 0; k < K; ++k)
    for (int m = 1; m <= M; ++m) {
      std::vector<double> preds;
      std::vector<int> truth;
      for (const auto& r : raw)
        if (r.k == k) {
          preds.push_back(r.p_hat(m - 1));
          truth.push_back(r.truth == m);
        }
      if (cfg.fixed_tau) {
        policy.static_tau(k, m - 1) = *cfg.fixed_tau;
        continue;
      }
      const TuneResult tr = tune_static(preds, truth, cfg.grid_size);
      policy.static_tau(k, m - 1) = tr.tau;
      if (tr.fallback) {
        const std::string id = k < static_cast<int>(events.location_ids.size()) ? events.location_ids[k]
                                                                                 : std::to_string(k);
        res.warnings.push_back("location " + id + ", state " + std::to_string(m) +
                               ": no events in the tuning period, threshold 0.5");
      }
    }

  if (cfg.tune_w2 && cfg.kind == PolicyKind::dynamic) {
    double best = -1.0;
    for (int i = 0; i < 25; ++i) {
      ThresholdPolicy trial = policy;
      trial.w2 = static_cast<int>(std::lround(10.0 + 100.0 * i / 24.0));
      const auto recs = run_sequential(params, events, trial, std::nullopt, begin, res.score_from);
      const double f1 = evaluate(recs, K, M).micro.f1;
      if (f1 > best) {
        best = f1;
        policy.w2 = trial.w2;
      }
    }
  }
  res.policy = policy;
  auto all = run_sequential(params, events, policy, cfg.ci, begin, T);
  for (auto& r : all)
    if (r.t >= res.score_from) res.scored.push_back(std::move(r));
  res.metrics = evaluate(res.scored, K, M);
  return res;
}

void write_predictions_csv(const std::vector<PredictionRecord>& records, const EventSequence& events, int M,
                           std::ostream& out) {
  out << "date,location_id";
  for (const char* name : {"p", "ci_low", "ci_high", "tau"})
    for (int m = 1; m <= M; ++m) out << ',' << name << '_' << m;
  out << ",decision,truth\n";
  for (const auto& r : records) {
    out << events.date_of(r.t).str() << ',' << events.location_ids.at(r.k);
    for (const Eigen::VectorXd* v : {&r.p_hat, &r.ci_low, &r.ci_high, &r.tau})
      for (int m = 0; m < M; ++m) out << ',' << text::fixed((*v)(m), 10);
    out << ',' << r.decision << ',' << r.truth << '\n';
  }
}

namespace {

nlohmann::json state_json(const StateMetrics& m) {
  return {{"state", m.state},         {"tp", m.tp},         {"fp", m.fp}, {"fn", m.fn},
          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

}  // namespace

nlohmann::json metrics_json(const MetricReport& report, const std::vector<std::string>& location_ids) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& m : report.per_state) per.push_back(state_json(m));
  auto id_of = [&](int k) { return k < static_cast<int>(location_ids.size()) ? location_ids[k] : std::to_string(k); };
  nlohmann::json loc = nlohmann::json::array();
  for (size_t k = 0; k < report.per_location.size(); ++k) {
    nlohmann::json j = state_json(report.per_location[k]);
    j.erase("state");
    j["location_id"] = id_of(static_cast<int>(k));
    loc.push_back(j);
  }
  nlohmann::json freq = nlohmann::json::array();
  for (int k = 0; k < report.avg_freq_pred.rows(); ++k)
    for (int m = 0; m < report.avg_freq_pred.cols(); ++m)
      freq.push_back({{"location_id", id_of(k)},
                      {"state", m + 1},
                      {"predicted", report.avg_freq_pred(k, m)},
                      {"observed", report.avg_freq_true(k, m)}});
  return {{"records", report.records}, {"per_state", per}, {"micro", state_json(report.micro)},
          {"per_location", loc},    {"avg_freq", freq}};
}

nlohmann::json policy_json(const ThresholdPolicy& policy) {
  nlohmann::json tau = nlohmann::json::array();
  for (int k = 0; k < policy.static_tau.rows(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (int m = 0; m < policy.static_tau.cols(); ++m) row.push_back(policy.static_tau(k, m));
    tau.push_back(row);
  }
  return {{"kind", to_string(policy.kind)}, {"alpha", policy.alpha}, {"w2", policy.w2}, {"static_tau", tau}};
}

}  // namespace ramp
