#pragma once

// Per-location constrained solvers. The joint LS and ML problems separate
// over target locations: the terms and constraints for location k involve
// only its own birthrates and the interactions pointing into it. Each
// subproblem is stated over distinct history patterns (rows of features)
// with per-pattern outcome counts, so repeated histories cost nothing.

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "ramp/kernels.hpp"
#include "ramp/polytope.hpp"

namespace ramp {

enum class Objective { ls, ml };
enum class Method { projected_gradient, frank_wolfe };

std::string to_string(Objective objective);
Objective parse_objective(const std::string& name);
std::string to_string(Method method);
Method parse_method(const std::string& name);

struct SolverOptions {
  Objective objective = Objective::ls;
  Method method = Method::projected_gradient;
  double rho = 1e-3;       // ML margin
  double tol = -1.0;       // stationarity; negative selects 1e-8 (LS) or 1e-6 (ML)
  int max_iter = 50000;
  double ridge = 1e-12;    // only for the unconstrained LS candidate
  bool direct_ls = true;   // try the unconstrained LS solution first; false starts at the centre

  double tolerance() const { return tol > 0.0 ? tol : (objective == Objective::ls ? 1e-8 : 1e-6); }
};

struct LocationProblem {
  std::shared_ptr<const kernels::SparseRows> features;  // distinct history patterns
  Eigen::MatrixXd counts;  // patterns x (M+1), outcome weights
  double total = 0.0;      // N
  int M = 1;
  int groups = 0;          // d*K
  std::vector<bool> allowed;  // optional per-group mask; empty allows all
};

struct LocationSolution {
  Eigen::MatrixXd x;           // M x (1 + groups*M)
  double objective = 0.0;
  std::vector<double> trace;   // objective after each accepted iterate
  double stationarity = 0.0;   // ||x - P(x - grad f(x))||_inf
  int iterations = 0;
  bool converged = false;
};

// Objective of the subproblem at x (ML: +inf outside the domain).
double location_objective(const LocationProblem& prob, Objective objective, const Eigen::MatrixXd& x);

LocationSolution solve_location(const LocationProblem& prob, const SolverOptions& opts);

// Moves x toward an interior point just enough that every inequality holds
// with slack at least margin; no-op when it already does.
Eigen::MatrixXd pull_inside(const FeasibleSet& set, const Eigen::MatrixXd& x, double margin);

}  // namespace ramp
