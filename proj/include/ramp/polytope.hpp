#pragma once

#include <Eigen/Dense>

namespace ramp {

// Feasible set of one location's coefficients in the reduced coordinates
// used by the solver. x is M x m with m = 1 + G*M: column 0 is the
// birthrate, column 1 + g*M + (q-1) the interaction of history group g
// (one source location at one lag) when that source was in state q >= 1.
// The q = 0 interaction is pinned at zero; any parameter vector can be
// shifted into that gauge without changing a probability.
//
// Constraints, with [lo, hi] = [0, 1] or the margin-tightened [rho, 1-rho]:
//   lower(p): x(p,0) + sum_g min(0, min_q x(p,g,q))           >= lo   (p = 1..M)
//   upper:    sum_p x(p,0) + sum_g max(0, max_q sum_p x(p,g,q)) <= hi
// For M = 1 these are exactly the binary model's min/max constraints.
struct FeasibleSet {
  int M = 1;
  int groups = 0;
  double lo = 0.0;
  double hi = 1.0;

  int width() const { return 1 + groups * M; }
  int col(int g, int q) const { return 1 + g * M + (q - 1); }

  static FeasibleSet with_margin(int M, int groups, double rho) {
    return FeasibleSet{M, groups, rho, 1.0 - rho};
  }
};

struct SetSlack {
  Eigen::VectorXd lower;  // per state, value minus lo
  double upper = 0.0;     // hi minus value
  double worst() const { return std::min(lower.minCoeff(), upper); }
};

SetSlack slack(const FeasibleSet& set, const Eigen::MatrixXd& x);

// Euclidean projection. Exact (up to bisection on doubles) for M = 1; for
// M > 1 Dykstra's alternating projection between the product of the lower
// sets and the upper set, each of which is projected exactly.
Eigen::MatrixXd project(const FeasibleSet& set, const Eigen::MatrixXd& y);

// The individual pieces, exposed for tests.
Eigen::MatrixXd project_lower(const FeasibleSet& set, const Eigen::MatrixXd& y);
Eigen::MatrixXd project_upper(const FeasibleSet& set, const Eigen::MatrixXd& y);

// Linear minimization oracle argmin_{v in set} <g, v> for M = 1. The set is
// the convex hull of lo*e0, hi*e0, lo*e0 + (hi-lo)*e_j and hi*e0 - (hi-lo)*e_j.
Eigen::MatrixXd lp_vertex(const FeasibleSet& set, const Eigen::MatrixXd& g);

}  // namespace ramp
