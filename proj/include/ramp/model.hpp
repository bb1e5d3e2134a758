#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ramp/events.hpp"

namespace ramp {

// Recent events at all locations; row s-1 holds the states observed s days
// before the predicted day (lag s), column l is location l.
using HistoryBlock = Eigen::MatrixXi;  // d x K

// History block preceding day t. Requires t >= d.
HistoryBlock history_at(const EventSequence& events, int t, int d);

// Binary model:
//   P[w_tk = 1 | history] = birthrate_k + sum_{s,l} interaction(s,k,l) * w_{t-s,l}.
//
// Canonical parameter vector (shared by the feature map, the design matrix,
// the solver and every serialized form): the K birthrates, then for each
// location k a block of d*K interactions stacked as vec() of the d x K lag
// matrix, i.e. index K + k*d*K + l*d + (s-1).
struct SingleStateParams {
  int K = 0;
  int d = 0;
  Eigen::VectorXd birthrate;        // K
  std::vector<double> interaction;  // d*K*K, see inter()

  SingleStateParams() = default;
  SingleStateParams(int K, int d);

  // Lag s in 1..d, target k, source l (both 0-based).
  double& inter(int s, int k, int l) { return interaction[index(s, k, l)]; }
  double inter(int s, int k, int l) const { return interaction[index(s, k, l)]; }

  long kappa() const { return static_cast<long>(K) * K * d + K; }
  Eigen::VectorXd vec() const;
  static SingleStateParams from_vec(int K, int d, const Eigen::VectorXd& v);
  static long vec_index(int K, int d, int s, int k, int l) {
    return K + static_cast<long>(k) * d * K + static_cast<long>(l) * d + (s - 1);
  }

 private:
  size_t index(int s, int k, int l) const {
    return (static_cast<size_t>(s - 1) * K + k) * K + l;
  }
};

// Categorical model with states {0..M}:
//   P[w_tk = p | history] = birthrate(k,p) + sum_{s,l} interaction(s,k,l,p,w_{t-s,l}), p >= 1
// and state 0 takes the remaining mass.
//
// Canonical vector: birthrates (k major, p minor), then per location k,
// per state p, per source l, per lag s, the M+1 entries over q.
struct MultiStateParams {
  int K = 0;
  int d = 0;
  int M = 2;
  Eigen::MatrixXd birthrate;        // K x M, column p-1
  std::vector<double> interaction;  // d*K*K*M*(M+1)

  MultiStateParams() = default;
  MultiStateParams(int K, int d, int M);

  // p in 1..M, q in 0..M
  double& inter(int s, int k, int l, int p, int q) { return interaction[index(s, k, l, p, q)]; }
  double inter(int s, int k, int l, int p, int q) const { return interaction[index(s, k, l, p, q)]; }

  long kappa() const { return static_cast<long>(K) * M + static_cast<long>(K) * K * d * M * (M + 1); }
  Eigen::VectorXd vec() const;
  static MultiStateParams from_vec(int K, int d, int M, const Eigen::VectorXd& v);
  static long vec_index(int K, int d, int M, int s, int k, int l, int p, int q);

  // Re-expresses the parameters in the gauge of minimum Euclidean norm.
  // Shifting a (s,l) block by a constant over q while moving the same
  // constant into the birthrate leaves every probability and every
  // constraint unchanged, so the model is only identified up to that shift.
  MultiStateParams min_norm_gauge() const;

 private:
  size_t index(int s, int k, int l, int p, int q) const {
    return ((((static_cast<size_t>(s - 1) * K + k) * K + l) * M + (p - 1)) * (M + 1)) + q;
  }
};

using ModelParams = std::variant<SingleStateParams, MultiStateParams>;

struct Dims {
  int K = 0;
  int d = 0;
  int M = 1;
  long kappa = 0;
};
Dims dims_of(const ModelParams& params);
Eigen::VectorXd to_vec(const ModelParams& params);
ModelParams with_vec(const ModelParams& shape, const Eigen::VectorXd& v);

// K x kappa matrix [I_K, I_K kron vec(history)^T]; history entries must be 0/1.
Eigen::MatrixXd feature_map(const HistoryBlock& history);
Eigen::MatrixXd feature_map(const HistoryBlock& history, int K, int d);
// (K*M) x kappa analogue for the categorical model; row k*M + (p-1).
Eigen::MatrixXd feature_map_multi(const HistoryBlock& history, int M);

struct Violation {
  int location = 0;
  int state = 0;  // 0 for the single-state constraints and the multi-state upper constraint
  bool upper = false;
  double slack = 0.0;  // negative when violated
  std::string describe() const;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<Violation> violations;
  Eigen::VectorXd worst_slack;       // per location, min over its inequalities
  std::vector<Violation> worst;      // per location, the inequality attaining worst_slack
};

// Evaluates every inequality of the feasible set, tightened to
// [rho, 1-rho] when rho is given.
FeasibilityReport check_feasible(const SingleStateParams& params, std::optional<double> rho = {});
FeasibilityReport check_feasible(const MultiStateParams& params, std::optional<double> rho = {});
FeasibilityReport check_feasible(const ModelParams& params, std::optional<double> rho = {});

// Throws ConstraintViolation naming the worst violated inequality.
void require_feasible(const ModelParams& params, std::optional<double> rho = {}, double tol = 1e-9);

Eigen::VectorXd cond_prob_single(const SingleStateParams& params, const HistoryBlock& history);
Eigen::MatrixXd cond_prob_multi(const MultiStateParams& params, const HistoryBlock& history);

// K x (M+1) state probabilities without feasibility checks; column 0 is the
// normal state. Hot loops (simulation, prediction, objectives) use this.
Eigen::MatrixXd state_probs(const ModelParams& params, const HistoryBlock& history);

// Forward sampler. Locations are conditionally independent given the
// history; init defaults to an all-zero block. Returns T sampled days.
EventSequence simulate(const ModelParams& params, int T, std::uint64_t seed,
                       std::optional<HistoryBlock> init = {});

nlohmann::json params_to_json(const ModelParams& params,
                              const std::vector<std::string>& location_ids = {});
ModelParams params_from_json(const nlohmann::json& doc, std::vector<std::string>* location_ids = nullptr);

inline constexpr int kSchemaVersion = 1;

}  // namespace ramp
