#include "ramp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ramp/error.hpp"

namespace ramp {

std::string to_string(Objective objective) { return objective == Objective::ls ? "ls" : "ml"; }

Objective parse_objective(const std::string& name) {
  if (name == "ls" || name == "LS") return Objective::ls;
  if (name == "ml" || name == "ML") return Objective::ml;
  throw ValidationError("unknown objective '" + name + "'");
}

std::string to_string(Method method) {
  return method == Method::projected_gradient ? "projected-gradient" : "frank-wolfe";
}

Method parse_method(const std::string& name) {
  if (name == "projected-gradient" || name == "pg") return Method::projected_gradient;
  if (name == "frank-wolfe" || name == "fw") return Method::frank_wolfe;
  throw ValidationError("unknown solver method '" + name + "'");
}

namespace {

// Quadratic form of the LS subproblem: f(x) = 1/2 tr(x A x^T) - <B, x> + c.
struct Quadratic {
  Eigen::MatrixXd A;  // m x m
  Eigen::MatrixXd B;  // M x m
  double c = 0.0;

  double value(const Eigen::MatrixXd& x) const {
    return 0.5 * (x * A).cwiseProduct(x).sum() - B.cwiseProduct(x).sum() + c;
  }
  Eigen::MatrixXd grad(const Eigen::MatrixXd& x) const { return x * A - B; }
};

Quadratic make_quadratic(const LocationProblem& prob) {
  const auto& rows = *prob.features;
  const Eigen::VectorXd weight = prob.counts.rowwise().sum();
  Quadratic q;
  q.A = kernels::gram_omp(rows, {weight.data(), static_cast<size_t>(weight.size())}) / prob.total;
  const Eigen::MatrixXd mom = kernels::moments_omp(rows, prob.counts) / prob.total;  // m x (M+1)
  q.B = mom.rightCols(prob.M).transpose();
  q.c = 0.5 * prob.counts.rightCols(prob.M).sum() / prob.total;
  return q;
}

FeasibleSet feasible_set(const LocationProblem& prob, const SolverOptions& opts) {
  return opts.objective == Objective::ml ? FeasibleSet::with_margin(prob.M, prob.groups, opts.rho)
                                         : FeasibleSet{prob.M, prob.groups, 0.0, 1.0};
}

void apply_mask(const LocationProblem& prob, const FeasibleSet& set, Eigen::MatrixXd& x) {
  if (prob.allowed.empty()) return;
  for (int g = 0; g < prob.groups; ++g)
    if (!prob.allowed[g])
      for (int q = 1; q <= prob.M; ++q) x.col(set.col(g, q)).setZero();
}

struct Context {
  const LocationProblem& prob;
  const SolverOptions& opts;
  FeasibleSet set;
  Quadratic quad;

  kernels::LossGrad eval(const Eigen::MatrixXd& x, bool with_grad) const {
    if (opts.objective == Objective::ls) {
      kernels::LossGrad r;
      r.loss = quad.value(x);
      if (with_grad) r.grad = quad.grad(x);
      return r;
    }
    return kernels::nll_omp(*prob.features, prob.counts, prob.total, x, with_grad);
  }

  Eigen::MatrixXd proj(Eigen::MatrixXd y) const {
    apply_mask(prob, set, y);
    return project(set, y);
  }

  double stationarity(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g) const {
    return (x - proj(x - g)).cwiseAbs().maxCoeff();
  }
};

double max_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return std::max(es.eigenvalues().maxCoeff(), 1e-12);
}

// Monotone accelerated projected gradient with function-value restarts.
// LS uses the fixed step 1/lambda_max(A); ML backtracks on the Lipschitz
// estimate and restarts whenever the extrapolated point leaves the domain.
void accelerated(const Context& ctx, LocationSolution& sol) {
  const bool ml = ctx.opts.objective == Objective::ml;
  const double tol = ctx.opts.tolerance();
  double L = max_eigenvalue(ctx.quad.A);
  const double L_floor = L;
  Eigen::MatrixXd x = sol.x, y = sol.x;
  auto at_x = ctx.eval(x, true);
  double fx = at_x.loss;
  double t = 1.0;
  sol.trace.push_back(fx);
  sol.stationarity = ctx.stationarity(x, at_x.grad);
  if (sol.stationarity <= tol) {
    sol.converged = true;
    sol.objective = fx;
    return;
  }
  for (int it = 1; it <= ctx.opts.max_iter; ++it) {
    auto at_y = ctx.eval(y, true);
    if (!at_y.in_domain) {
      y = x;
      t = 1.0;
      at_y = at_x;
    }
    if (ml) L = std::max(L * 0.9, L_floor);
    Eigen::MatrixXd z;
    double fz;
    while (true) {
      z = ctx.proj(y - at_y.grad / L);
      fz = ctx.eval(z, false).loss;
      if (!ml) break;
      const Eigen::MatrixXd dz = z - y;
      const double model = at_y.loss + at_y.grad.cwiseProduct(dz).sum() + 0.5 * L * dz.squaredNorm();
      if (fz <= model + 1e-14 * std::abs(model)) break;
      L *= 2.0;
      if (!std::isfinite(L)) break;
    }
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Eigen::MatrixXd x_new;
    if (fz <= fx) {
      x_new = z;
      y = x_new + (t / t_next) * (z - x_new) + ((t - 1.0) / t_next) * (x_new - x);
    } else {
      x_new = x;
      t_next = 1.0;
      y = x;
    }
    x = std::move(x_new);
    fx = std::min(fx, fz);
    t = t_next;
    sol.trace.push_back(fx);
    sol.iterations = it;
    at_x = ctx.eval(x, true);
    sol.stationarity = ctx.stationarity(x, at_x.grad);
    if (sol.stationarity <= tol) {
      sol.converged = true;
      break;
    }
  }
  sol.x = x;
  sol.objective = fx;
}

// Conditional gradient with exact (LS) or bisection (ML) line search;
// stops on the duality gap.
void frank_wolfe(const Context& ctx, LocationSolution& sol) {
  if (ctx.prob.M != 1) throw ValidationError("Frank-Wolfe is available for the binary model only");
  const bool ml = ctx.opts.objective == Objective::ml;
  const double tol = ctx.opts.tolerance();
  Eigen::MatrixXd x = sol.x;
  auto at_x = ctx.eval(x, true);
  sol.trace.push_back(at_x.loss);
  for (int it = 1; it <= ctx.opts.max_iter; ++it) {
    Eigen::MatrixXd g = at_x.grad;
    apply_mask(ctx.prob, ctx.set, g);
    const Eigen::MatrixXd v = lp_vertex(ctx.set, g);
    const Eigen::MatrixXd dir = v - x;
    const double gap = -at_x.grad.cwiseProduct(dir).sum();
    sol.iterations = it;
    if (gap <= tol) {
      sol.converged = true;
      break;
    }
    double step;
    if (!ml) {
      const double curv = (dir * ctx.quad.A).cwiseProduct(dir).sum();
      step = curv > 0.0 ? std::min(1.0, gap / curv) : 1.0;
    } else {
      double a = 0.0, b = 1.0;
      for (int k = 0; k < 50; ++k) {
        const double mid = 0.5 * (a + b);
        const auto r = ctx.eval(x + mid * dir, true);
        if (r.grad.cwiseProduct(dir).sum() < 0.0)
          a = mid;
        else
          b = mid;
      }
      step = 0.5 * (a + b);
    }
    Eigen::MatrixXd cand = x + step * dir;
    auto at_c = ctx.eval(cand, true);
    if (at_c.loss <= at_x.loss) {
      x = std::move(cand);
      at_x = std::move(at_c);
    }
    sol.trace.push_back(at_x.loss);
  }
  sol.x = x;
  sol.objective = at_x.loss;
  sol.stationarity = ctx.stationarity(x, at_x.grad);
}

}  // namespace

double location_objective(const LocationProblem& prob, Objective objective, const Eigen::MatrixXd& x) {
  if (objective == Objective::ml) return kernels::nll_omp(*prob.features, prob.counts, prob.total, x, false).loss;
  const auto& rows = *prob.features;
  double acc = 0.0;
  for (int i = 0; i < rows.rows(); ++i) {
    auto r = rows.row(i);
    for (int o = 0; o <= prob.M; ++o) {
      const double c = prob.counts(i, o);
      if (c == 0.0) continue;
      double sq = 0.0;
      for (int p = 1; p <= prob.M; ++p) {
        double v = 0.0;
        for (int j : r) v += x(p - 1, j);
        const double e = v - (o == p ? 1.0 : 0.0);
        sq += e * e;
      }
      acc += c * sq;
    }
  }
  return 0.5 * acc / prob.total;
}

namespace {

// Birthrates only, every state at the same level with equal slack above
// lo and below hi.
Eigen::MatrixXd center(const FeasibleSet& set) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(set.M, set.width());
  z.col(0).setConstant(set.lo + (set.hi - set.M * set.lo) / (2.0 * set.M));
  return z;
}

}  // namespace

Eigen::MatrixXd pull_inside(const FeasibleSet& set, const Eigen::MatrixXd& x, double margin) {
  if (slack(set, x).worst() >= margin) return x;
  const Eigen::MatrixXd z = center(set);
  if (slack(set, z).worst() < margin) return z;
  double a = 0.0, b = 1.0;  // slack at a stays >= margin
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (a + b);
    if (slack(set, z + mid * (x - z)).worst() >= margin)
      a = mid;
    else
      b = mid;
  }
  return z + a * (x - z);
}

LocationSolution solve_location(const LocationProblem& prob, const SolverOptions& opts) {
  if (!prob.features || prob.total <= 0.0) throw InsufficientDataError("location problem has no observations");
  if (prob.counts.rows() != prob.features->rows() || prob.counts.cols() != prob.M + 1)
    throw DimensionError("count matrix does not match the history patterns");
  Context ctx{prob, opts, feasible_set(prob, opts), make_quadratic(prob)};
  const int m = ctx.set.width();
  if (prob.features->cols != m) throw DimensionError("feature width does not match the feasible set");

  LocationSolution sol;
  // Unconstrained LS minimizer with a tiny ridge (minimum-norm tie-break
  // along flat directions).
  Eigen::MatrixXd ridge_A = ctx.quad.A;
  ridge_A.diagonal().array() += opts.ridge;
  Eigen::MatrixXd cand = ridge_A.ldlt().solve(ctx.quad.B.transpose()).transpose();
  apply_mask(prob, ctx.set, cand);

  if (opts.objective == Objective::ls && opts.direct_ls && prob.allowed.empty() &&
      slack(ctx.set, cand).worst() >= 0.0) {
    sol.x = cand;
    sol.objective = ctx.quad.value(cand);
    sol.trace = {sol.objective};
    sol.stationarity = ctx.stationarity(cand, ctx.quad.grad(cand));
    sol.converged = sol.stationarity <= opts.tolerance();
    if (sol.converged) return sol;
  }

  if (opts.objective == Objective::ml) {
    // Warm start: the LS fit on the same data, moved into the margin set.
    SolverOptions ls = opts;
    ls.objective = Objective::ls;
    ls.method = Method::projected_gradient;
    ls.tol = 1e-6;
    ls.max_iter = std::min(opts.max_iter, 5000);
    Context lctx{prob, ls, feasible_set(prob, ls), ctx.quad};
    LocationSolution warm;
    warm.x = lctx.proj(cand);
    accelerated(lctx, warm);
    sol.x = ctx.proj(warm.x);
  } else {
    // Without the direct path the iteration starts from the centre of the set.
    sol.x = opts.direct_ls ? ctx.proj(cand) : center(ctx.set);
  }
  sol.trace.clear();
  sol.iterations = 0;
  sol.converged = false;
  if (opts.method == Method::frank_wolfe)
    frank_wolfe(ctx, sol);
  else
    accelerated(ctx, sol);
  return sol;
}

}  // namespace ramp
