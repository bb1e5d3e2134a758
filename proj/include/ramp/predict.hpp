#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramp/events.hpp"
#include "ramp/model.hpp"

namespace ramp {

// One-step-ahead state probabilities (K x (M+1), column 0 normal) from the
// observed history. Throws ConstraintViolation for infeasible parameters.
Eigen::MatrixXd predict_step(const ModelParams& params, const HistoryBlock& history);

// ---------------------------------------------------------------------------
// Thresholds

enum class PolicyKind { fixed, dynamic };
std::string to_string(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);

struct ThresholdPolicy {
  PolicyKind kind = PolicyKind::fixed;
  Eigen::MatrixXd static_tau;  // K x M; also the dynamic fallback
  int w2 = 50;
  double alpha = 0.5;

  void validate() const;  // throws ValidationError
};

struct TuneResult {
  double tau = 0.5;
  double f1 = 0.0;
  bool fallback = false;  // no positive labels
};

// Grid i/(grid_size-1), i = 0..grid_size-1; the best F1 wins, ties go to
// the smaller tau. truth is binary.
TuneResult tune_static(std::span<const double> preds, std::span<const int> truth, int grid_size = 25);

// alpha * mean(preds on abnormal days) + (1 - alpha) * mean(preds on normal
// days); fallback when either class is absent.
double dynamic_tau(std::span<const int> events, std::span<const double> preds, double alpha, double fallback);

// (i/(M+1)) * sum_m mean(preds(:, m-1) over days in state m); fallback when
// some state m in 1..M is absent. preds is w2 x M.
double dynamic_tau_multi(std::span<const int> events, const Eigen::MatrixXd& preds, int M, int i, double fallback);

// Binary: 1 iff p >= tau. Categorical: the most probable state among those
// clearing their own threshold, else 0.
int decide(const Eigen::VectorXd& p_hat, const Eigen::VectorXd& tau);

// ---------------------------------------------------------------------------
// Sequential prediction

struct PredictionRecord {
  int t = 0;
  int k = 0;
  Eigen::VectorXd p_hat;  // M, states 1..M
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
  Eigen::VectorXd tau;
  int decision = 0;
  int truth = 0;
};

// Bootstrap spread in canonical parameter order.
struct IntervalSpec {
  Eigen::VectorXd se;
  double z = 0.0;
};

// Predicts days [begin, end) (end < 0: through the last day) in time order.
// Dynamic thresholds use the records of this call only, so the first w2
// days fall back to the static thresholds. Records are ordered by day,
// then location.
std::vector<PredictionRecord> run_sequential(const ModelParams& params, const EventSequence& events,
                                             const ThresholdPolicy& policy,
                                             const std::optional<IntervalSpec>& ci = {}, int begin = -1,
                                             int end = -1);

// ---------------------------------------------------------------------------
// Metrics

struct StateMetrics {
  int state = 0;  // 0 for the micro average
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

StateMetrics metrics_from_counts(int state, long tp, long fp, long fn);

struct MetricReport {
  long records = 0;
  std::vector<StateMetrics> per_state;  // states 1..M
  StateMetrics micro;
  std::vector<StateMetrics> per_location;  // micro average over states, one per location
  Eigen::MatrixXd avg_freq_pred;  // K x M
  Eigen::MatrixXd avg_freq_true;
};

MetricReport evaluate(const std::vector<PredictionRecord>& records, int K, int M);

// ---------------------------------------------------------------------------
// Tuning protocol: the first tune_split share of the stream tunes static
// thresholds (and optionally w2), the remainder is scored.

struct ProtocolConfig {
  PolicyKind kind = PolicyKind::fixed;
  double alpha = 0.5;
  int w2 = 50;
  double tune_split = 0.3;
  int grid_size = 25;
  bool tune_w2 = false;
  std::optional<double> fixed_tau;  // static thresholds for every (k, m); skips tuning
  std::optional<IntervalSpec> ci;
};

struct ProtocolResult {
  ThresholdPolicy policy;
  int begin = 0;       // first predicted day
  int score_from = 0;  // first scored day
  std::vector<PredictionRecord> scored;
  MetricReport metrics;
  std::vector<std::string> warnings;
};

ProtocolResult run_protocol(const ModelParams& params, const EventSequence& events, int begin,
                            const ProtocolConfig& cfg);

// ---------------------------------------------------------------------------
// Serialization

void write_predictions_csv(const std::vector<PredictionRecord>& records, const EventSequence& events, int M,
                           std::ostream& out);
nlohmann::json metrics_json(const MetricReport& report, const std::vector<std::string>& location_ids);
nlohmann::json policy_json(const ThresholdPolicy& policy);

}  // namespace ramp
