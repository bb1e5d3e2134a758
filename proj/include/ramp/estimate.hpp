#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramp/events.hpp"
#include "ramp/extract.hpp"
#include "ramp/ingest.hpp"
#include "ramp/kernels.hpp"
#include "ramp/model.hpp"
#include "ramp/solver.hpp"

namespace ramp {

// Usable days are valid_from + d .. T-1: each has a complete, extracted
// d-day history. N is their count.
long usable_steps(const EventSequence& events, int d);

// ---------------------------------------------------------------------------
// Design matrix

// A = (1/N) sum_t eta eta^T. With the canonical ordering A is block
// diagonal up to a permutation: K identical copies of the per-location
// matrix over (1, vec(history)), so only that block is stored.
struct DesignMatrix {
  int K = 0;
  int d = 0;
  int M = 1;
  long N = 0;
  Eigen::MatrixXd block;  // (1 + d*K*M) square, reduced coordinates when M > 1

  long kappa() const;
  // Full kappa x kappa matrix in canonical order (binary model only).
  Eigen::MatrixXd dense() const;
};

DesignMatrix design_matrix(const EventSequence& events, int d);

// ---------------------------------------------------------------------------
// Objectives on full parameter sets (reference implementations; the
// solver works on the per-location reduced form).

double ls_objective(const ModelParams& params, const EventSequence& events);
double ml_objective(const ModelParams& params, const EventSequence& events);      // DomainError
Eigen::VectorXd ml_gradient(const ModelParams& params, const EventSequence& events);  // canonical order

// ---------------------------------------------------------------------------
// Condition numbers

enum class Norm { one, two, inf };
std::string to_string(Norm p);

struct ConditionNumbers {
  double theta_1 = 0.0;    // certified lower bound
  double theta_2 = 0.0;
  double theta_inf = 0.0;
  std::string theta_1_certificate = "bounded";  // "singular" when A is not invertible

  double get(Norm p) const { return p == Norm::one ? theta_1 : (p == Norm::two ? theta_2 : theta_inf); }
};

struct ConditionValue {
  double value = 0.0;
  std::string certificate;  // "exact", "bounded" or "singular"
};

ConditionValue condition_number(const Eigen::MatrixXd& A, Norm p);
ConditionNumbers condition_numbers(const Eigen::MatrixXd& A);
// Uses the block structure: theta_2 and theta_inf equal those of one
// block, and the theta_1 bound of K copies is the block's bound over K.
ConditionNumbers condition_numbers(const DesignMatrix& A);

// ---------------------------------------------------------------------------
// Error bounds

struct ErrorBound {
  Norm p = Norm::two;
  double value = 0.0;  // +inf when theta_p * theta_1 = 0
  double epsilon = 0.1;
  Objective method = Objective::ls;
  double rho = 0.0;
};

double bound_numerator(long kappa, long N, double epsilon, Objective method, double rho);
ErrorBound error_bound(const ConditionNumbers& thetas, Norm p, long kappa, long N, double epsilon,
                       Objective method, double rho = 1e-3);

// ---------------------------------------------------------------------------
// Fitting

struct FitOptions {
  SolverOptions solver;
  double epsilon = 0.1;        // confidence level of the reported bounds
  bool compute_bounds = true;
  int bootstrap = 0;           // replicates; 0 disables
  double ci_epsilon = 0.05;
  std::uint64_t seed = 0;
  // Optional sparsity hook: interaction from source l at lag s into target
  // k is estimated only when allowed(s, k, l). Unset estimates all.
  std::function<bool(int s, int k, int l)> allowed;
};

struct BootstrapResult {
  int requested = 0;
  int used = 0;
  int dropped = 0;
  double z = 0.0;  // Bonferroni normal quantile
  Eigen::VectorXd se;
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
};

struct FitReport {
  ModelParams params;
  std::vector<std::string> location_ids;
  Objective objective = Objective::ls;
  SolverOptions solver;
  int K = 0;
  int d = 0;
  int M = 1;
  long N = 0;
  double objective_value = 0.0;
  std::vector<double> objective_trace;
  double final_gradient_norm = 0.0;  // worst per-location stationarity
  int iterations = 0;                // worst per-location count
  bool converged = true;
  std::vector<std::string> warnings;
  DesignMatrix A;
  ConditionNumbers thetas;
  std::vector<ErrorBound> bounds;
  std::optional<BootstrapResult> bootstrap;
};

FitReport fit(const EventSequence& events, int d, const FitOptions& opts = {});

// Parameters only; weights (one per usable day, may be empty) multiply the
// contribution of each day. Sets converged to false if any location failed.
ModelParams fit_params(const EventSequence& events, int d, const FitOptions& opts,
                       std::span<const double> weights = {}, bool* converged = nullptr);

BootstrapResult bootstrap(const EventSequence& events, int d, const FitOptions& opts, const ModelParams& estimate,
                          int replicates, std::uint64_t seed);

// Held-out frequency check used by the delta sweep: fit on the first half
// of the usable days, then compare the mean predicted probability of each
// abnormal state on the second half with its empirical frequency; returns
// the mean squared difference over locations and states.
double frequency_mse(const EventSequence& events, int d, const FitOptions& opts);
FrequencyEvaluator frequency_mse_evaluator(int d, FitOptions opts);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const ConditionNumbers& thetas);
nlohmann::json to_json(const ErrorBound& bound);
nlohmann::json fit_report_json(const FitReport& report);

// Nodes carry the birthrate (summed over abnormal states); one edge per
// (lag, target, source) carrying the interaction of largest magnitude.
nlohmann::json graph_json(const FitReport& report, const std::vector<SensorMeta>& sites = {});

}  // namespace ramp
