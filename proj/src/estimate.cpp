#include "ramp/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/normal.hpp>

#include "ramp/error.hpp"
#include "ramp/rng.hpp"

namespace ramp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_depth(int d) {
  if (d < 1) throw ValidationError("memory depth d must be at least 1");
}

}  // namespace

long usable_steps(const EventSequence& events, int d) {
  require_depth(d);
  return std::max(0L, static_cast<long>(events.days()) - events.valid_from - d);
}

namespace {

// Distinct history patterns over the usable days, in order of first
// appearance. A pattern lists the active reduced features: the intercept
// and, for each (source l, lag s) whose state q is abnormal, column
// 1 + (l*d + s-1)*M + (q-1).
struct Patterns {
  int K = 0, d = 0, M = 1;
  int first = 0;  // first usable day
  long N = 0;
  std::shared_ptr<kernels::SparseRows> rows;
  std::vector<int> of_step;  // pattern of usable day first + i

  int groups() const { return d * K; }
  int width() const { return 1 + groups() * M; }
};

Patterns build_patterns(const EventSequence& events, int d) {
  events.validate();
  Patterns pt;
  pt.K = events.locations();
  pt.d = d;
  pt.M = events.M;
  pt.first = events.valid_from + d;
  pt.N = usable_steps(events, d);
  if (pt.K < 1) throw InsufficientDataError("event sequence has no locations");
  if (pt.N < 1)
    throw InsufficientDataError("no usable days: need more than valid_from + d = " + std::to_string(pt.first) +
                                " days, have " + std::to_string(events.days()));
  pt.rows = std::make_shared<kernels::SparseRows>();
  pt.rows->cols = pt.width();
  std::map<std::vector<int>, int> seen;
  std::vector<int> active;
  pt.of_step.reserve(pt.N);
  for (int t = pt.first; t < events.days(); ++t) {
    active.assign(1, 0);
    for (int l = 0; l < pt.K; ++l)
      for (int s = 1; s <= d; ++s) {
        const int q = events.states(t - s, l);
        if (q >= 1) active.push_back(1 + (l * d + s - 1) * pt.M + (q - 1));
      }
    auto [it, fresh] = seen.try_emplace(active, static_cast<int>(seen.size()));
    if (fresh) pt.rows->add(active);
    pt.of_step.push_back(it->second);
  }
  return pt;
}

LocationProblem location_problem(const Patterns& pt, const EventSequence& events, int k,
                                 std::span<const double> weights) {
  LocationProblem prob;
  prob.features = pt.rows;
  prob.M = pt.M;
  prob.groups = pt.groups();
  prob.counts = Eigen::MatrixXd::Zero(pt.rows->rows(), pt.M + 1);
  double total = 0.0;
  for (long i = 0; i < pt.N; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    prob.counts(pt.of_step[i], events.states(pt.first + i, k)) += w;
    total += w;
  }
  prob.total = total;
  return prob;
}

FeasibleSet solver_set(const Patterns& pt, const SolverOptions& opts) {
  return opts.objective == Objective::ml ? FeasibleSet::with_margin(pt.M, pt.groups(), opts.rho)
                                         : FeasibleSet{pt.M, pt.groups(), 0.0, 1.0};
}

ModelParams assemble(const Patterns& pt, const std::vector<Eigen::MatrixXd>& xs) {
  const int K = pt.K, d = pt.d, M = pt.M;
  if (M == 1) {
    SingleStateParams p(K, d);
    for (int k = 0; k < K; ++k) {
      p.birthrate(k) = xs[k](0, 0);
      for (int l = 0; l < K; ++l)
        for (int s = 1; s <= d; ++s) p.inter(s, k, l) = xs[k](0, 1 + l * d + s - 1);
    }
    return p;
  }
  MultiStateParams p(K, d, M);
  for (int k = 0; k < K; ++k)
    for (int c = 1; c <= M; ++c) {
      p.birthrate(k, c - 1) = xs[k](c - 1, 0);
      for (int l = 0; l < K; ++l)
        for (int s = 1; s <= d; ++s)
          for (int q = 1; q <= M; ++q) p.inter(s, k, l, c, q) = xs[k](c - 1, 1 + (l * d + s - 1) * M + (q - 1));
    }
  return p.min_norm_gauge();
}

struct Solved {
  std::vector<LocationSolution> per_location;
  ModelParams params;
  bool converged = true;
};

Solved solve_all(const Patterns& pt, const EventSequence& events, const FitOptions& opts,
                 std::span<const double> weights, bool parallel) {
  const int K = pt.K;
  Solved out;
  out.per_location.resize(K);
  std::vector<std::string> failures(K);
  const FeasibleSet set = solver_set(pt, opts.solver);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int k = 0; k < K; ++k) {
    try {
      LocationProblem prob = location_problem(pt, events, k, weights);
      if (opts.allowed) {
        prob.allowed.assign(pt.groups(), true);
        for (int l = 0; l < K; ++l)
          for (int s = 1; s <= pt.d; ++s) prob.allowed[l * pt.d + s - 1] = opts.allowed(s, k, l);
      }
      LocationSolution sol = solve_location(prob, opts.solver);
      // Leaves room for rounding when the reduced solution is re-expressed
      // in canonical coordinates.
      sol.x = pull_inside(set, sol.x, 1e-12);
      out.per_location[k] = std::move(sol);
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  }
  for (int k = 0; k < K; ++k)
    if (!failures[k].empty()) throw InsufficientDataError("location " + std::to_string(k) + ": " + failures[k]);
  std::vector<Eigen::MatrixXd> xs;
  for (const auto& s : out.per_location) {
    xs.push_back(s.x);
    out.converged = out.converged && s.converged;
  }
  out.params = assemble(pt, xs);
  return out;
}

Eigen::MatrixXd pattern_gram(const Patterns& pt) {
  std::vector<double> mult(pt.rows->rows(), 0.0);
  for (int p : pt.of_step) mult[p] += 1.0;
  return kernels::gram_omp(*pt.rows, mult) / static_cast<double>(pt.N);
}

void require_match(const ModelParams& params, const EventSequence& events) {
  const Dims dim = dims_of(params);
  if (dim.K != events.locations()) throw DimensionError("parameters and events disagree on K");
  if (dim.M != events.M) throw DimensionError("parameters and events disagree on M");
}

}  // namespace

// ---------------------------------------------------------------------------
// Design matrix

long DesignMatrix::kappa() const {
  return M == 1 ? static_cast<long>(K) + static_cast<long>(K) * K * d
                : static_cast<long>(K) * M + static_cast<long>(K) * K * d * M * (M + 1);
}

Eigen::MatrixXd DesignMatrix::dense() const {
  if (M != 1) throw DimensionError("dense design matrix is defined for the binary model");
  const long n = kappa();
  const int m = static_cast<int>(block.rows());
  auto global = [&](int k, int j) -> long {
    return j == 0 ? k : K + static_cast<long>(k) * d * K + (j - 1);
  };
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) A(global(k, i), global(k, j)) = block(i, j);
  return A;
}

DesignMatrix design_matrix(const EventSequence& events, int d) {
  const Patterns pt = build_patterns(events, d);
  DesignMatrix A;
  A.K = pt.K;
  A.d = d;
  A.M = pt.M;
  A.N = pt.N;
  A.block = pattern_gram(pt);
  return A;
}

// ---------------------------------------------------------------------------
// Objectives

double ls_objective(const ModelParams& params, const EventSequence& events) {
  require_match(params, events);
  const Dims dim = dims_of(params);
  const long N = usable_steps(events, dim.d);
  if (N < 1) throw InsufficientDataError("no usable days");
  double acc = 0.0;
  for (int t = events.valid_from + dim.d; t < events.days(); ++t) {
    const Eigen::MatrixXd P = state_probs(params, history_at(events, t, dim.d));
    for (int k = 0; k < dim.K; ++k)
      for (int p = 1; p <= dim.M; ++p) {
        const double e = P(k, p) - (events.states(t, k) == p ? 1.0 : 0.0);
        acc += e * e;
      }
  }
  return 0.5 * acc / static_cast<double>(N);
}

namespace {

void check_domain(const Eigen::MatrixXd& P, int t) {
  for (int k = 0; k < P.rows(); ++k)
    for (int o = 0; o < P.cols(); ++o)
      if (!(P(k, o) > 0.0 && P(k, o) < 1.0))
        throw DomainError("probability " + std::to_string(P(k, o)) + " outside (0, 1) at day " + std::to_string(t) +
                          ", location " + std::to_string(k));
}

}  // namespace

double ml_objective(const ModelParams& params, const EventSequence& events) {
  require_match(params, events);
  const Dims dim = dims_of(params);
  const long N = usable_steps(events, dim.d);
  if (N < 1) throw InsufficientDataError("no usable days");
  double acc = 0.0;
  for (int t = events.valid_from + dim.d; t < events.days(); ++t) {
    const Eigen::MatrixXd P = state_probs(params, history_at(events, t, dim.d));
    check_domain(P, t);
    for (int k = 0; k < dim.K; ++k) acc -= std::log(P(k, events.states(t, k)));
  }
  return acc / static_cast<double>(N);
}

Eigen::VectorXd ml_gradient(const ModelParams& params, const EventSequence& events) {
  require_match(params, events);
  const Dims dim = dims_of(params);
  const long N = usable_steps(events, dim.d);
  if (N < 1) throw InsufficientDataError("no usable days");
  const int K = dim.K, d = dim.d, M = dim.M;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim.kappa);
  for (int t = events.valid_from + d; t < events.days(); ++t) {
    const HistoryBlock h = history_at(events, t, d);
    const Eigen::MatrixXd P = state_probs(params, h);
    check_domain(P, t);
    for (int k = 0; k < K; ++k) {
      const int w = events.states(t, k);
      for (int p = 1; p <= M; ++p) {
        const double c = (w == 0 ? 1.0 / P(k, 0) : 0.0) - (w == p ? 1.0 / P(k, p) : 0.0);
        if (c == 0.0) continue;
        if (M == 1) {
          g(k) += c;
          for (int s = 1; s <= d; ++s)
            for (int l = 0; l < K; ++l)
              if (h(s - 1, l)) g(SingleStateParams::vec_index(K, d, s, k, l)) += c;
        } else {
          g(static_cast<long>(k) * M + (p - 1)) += c;
          for (int s = 1; s <= d; ++s)
            for (int l = 0; l < K; ++l) g(MultiStateParams::vec_index(K, d, M, s, k, l, p, h(s - 1, l))) += c;
        }
      }
    }
  }
  return g / static_cast<double>(N);
}

// ---------------------------------------------------------------------------
// Condition numbers

std::string to_string(Norm p) { return p == Norm::one ? "1" : (p == Norm::two ? "2" : "inf"); }

namespace {

// min x^T A x subject to x_i = 1 and |x_j| <= 1, by exact cyclic
// coordinate minimization.
double box_qp(const Eigen::MatrixXd& A, int i) {
  const int m = static_cast<int>(A.rows());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  x(i) = 1.0;
  Eigen::VectorXd g = A.col(i);  // A x
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double moved = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i || A(j, j) <= 0.0) continue;
      const double nv = std::clamp(x(j) - g(j) / A(j, j), -1.0, 1.0);
      const double step = nv - x(j);
      if (step == 0.0) continue;
      g += A.col(j) * step;
      x(j) = nv;
      moved = std::max(moved, std::abs(step));
    }
    if (moved <= 1e-13) break;
  }
  return std::max(x.dot(A * x), 0.0);
}

void require_square(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw DimensionError("condition number needs a nonempty square matrix");
}

}  // namespace

ConditionValue condition_number(const Eigen::MatrixXd& A, Norm p) {
  require_square(A);
  if (p == Norm::inf) {
    double best = kInf;
    for (int i = 0; i < A.rows(); ++i) best = std::min(best, box_qp(A, i));
    return {best, "exact"};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::VectorXd& lam = es.eigenvalues();
  if (p == Norm::two) return {std::max(lam.minCoeff(), 0.0), "exact"};
  const double top = std::max(lam.maxCoeff(), std::numeric_limits<double>::min());
  if (lam.minCoeff() <= 1e-12 * top) return {0.0, "singular"};
  const Eigen::MatrixXd Q = es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  // Diag(lambda) - Q is diagonally dominant when lambda_i = sum_j |Q_ij|,
  // so max_{|x|_inf <= 1} x^T Q x <= sum_i lambda_i.
  return {1.0 / Q.cwiseAbs().sum(), "bounded"};
}

ConditionNumbers condition_numbers(const Eigen::MatrixXd& A) {
  ConditionNumbers c;
  const auto one = condition_number(A, Norm::one);
  c.theta_1 = one.value;
  c.theta_1_certificate = one.certificate;
  c.theta_2 = condition_number(A, Norm::two).value;
  c.theta_inf = condition_number(A, Norm::inf).value;
  return c;
}

ConditionNumbers condition_numbers(const DesignMatrix& A) {
  ConditionNumbers c = condition_numbers(A.block);
  c.theta_1 /= A.K;
  return c;
}

// ---------------------------------------------------------------------------
// Error bounds

double bound_numerator(long kappa, long N, double epsilon, Objective method, double rho) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
  if (kappa < 1 || N < 1) throw ValidationError("bound needs kappa >= 1 and N >= 1");
  const double lg = std::log(2.0 * static_cast<double>(kappa) / epsilon);
  const double n = static_cast<double>(N);
  if (method == Objective::ls) return std::sqrt(lg / (2.0 * n)) + lg / (3.0 * n);
  if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("rho must lie in (0, 1)");
  return (1.0 - rho) * (1.0 - rho) / rho * std::sqrt(2.0 * lg / n);
}

ErrorBound error_bound(const ConditionNumbers& thetas, Norm p, long kappa, long N, double epsilon, Objective method,
                       double rho) {
  ErrorBound b;
  b.p = p;
  b.epsilon = epsilon;
  b.method = method;
  b.rho = method == Objective::ml ? rho : 0.0;
  const double num = bound_numerator(kappa, N, epsilon, method, rho);
  const double prod = thetas.get(p) * thetas.theta_1;
  b.value = prod > 0.0 ? num / std::sqrt(prod) : kInf;
  return b;
}

// ---------------------------------------------------------------------------
// Fitting

ModelParams fit_params(const EventSequence& events, int d, const FitOptions& opts, std::span<const double> weights,
                       bool* converged) {
  const Patterns pt = build_patterns(events, d);
  if (!weights.empty() && static_cast<long>(weights.size()) != pt.N)
    throw DimensionError("one weight per usable day is required");
  Solved s = solve_all(pt, events, opts, weights, true);
  if (converged) *converged = s.converged;
  return s.params;
}

BootstrapResult bootstrap(const EventSequence& events, int d, const FitOptions& opts, const ModelParams& estimate,
                          int replicates, std::uint64_t seed) {
  if (replicates < 2) throw ValidationError("bootstrap needs at least 2 replicates");
  const Patterns pt = build_patterns(events, d);
  const long kappa = dims_of(estimate).kappa;
  std::vector<Eigen::VectorXd> draws(replicates);
  std::vector<char> ok(replicates, 0);
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < replicates; ++b) {
    Rng rng(seed, static_cast<std::uint64_t>(b));
    std::vector<double> w(pt.N, 0.0);
    for (long i = 0; i < pt.N; ++i) w[rng.below(static_cast<std::uint64_t>(pt.N))] += 1.0;
    try {
      Solved s = solve_all(pt, events, opts, w, false);
      if (s.converged) {
        draws[b] = to_vec(s.params);
        ok[b] = 1;
      }
    } catch (const Error&) {
      // dropped replicate
    }
  }
  BootstrapResult r;
  r.requested = replicates;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kappa);
  for (int b = 0; b < replicates; ++b)
    if (ok[b]) {
      mean += draws[b];
      ++r.used;
    }
  r.dropped = replicates - r.used;
  if (r.used < 2) throw InsufficientDataError("fewer than 2 bootstrap replicates converged");
  mean /= r.used;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(kappa);
  for (int b = 0; b < replicates; ++b)
    if (ok[b]) var += (draws[b] - mean).cwiseAbs2();
  r.se = (var / (r.used - 1)).cwiseSqrt();
  boost::math::normal standard;
  r.z = boost::math::quantile(standard, 1.0 - opts.ci_epsilon / (2.0 * static_cast<double>(kappa)));
  const Eigen::VectorXd centre = to_vec(estimate);
  r.ci_low = centre - r.z * r.se;
  r.ci_high = centre + r.z * r.se;
  return r;
}

FitReport fit(const EventSequence& events, int d, const FitOptions& opts) {
  const Patterns pt = build_patterns(events, d);
  Solved s = solve_all(pt, events, opts, {}, true);

  FitReport r;
  r.params = s.params;
  r.location_ids = events.location_ids;
  r.objective = opts.solver.objective;
  r.solver = opts.solver;
  r.K = pt.K;
  r.d = d;
  r.M = pt.M;
  r.N = pt.N;
  r.converged = s.converged;
  size_t longest = 0;
  for (int k = 0; k < pt.K; ++k) {
    const auto& sol = s.per_location[k];
    r.objective_value += sol.objective;
    r.final_gradient_norm = std::max(r.final_gradient_norm, sol.stationarity);
    r.iterations = std::max(r.iterations, sol.iterations);
    longest = std::max(longest, sol.trace.size());
    if (!sol.converged) {
      const std::string id = k < static_cast<int>(events.location_ids.size()) ? events.location_ids[k]
                                                                               : std::to_string(k);
      r.warnings.push_back("location " + id + " did not converge in " + std::to_string(sol.iterations) +
                           " iterations (stationarity " + std::to_string(sol.stationarity) + ")");
    }
  }
  // Sum of the per-location traces; a finished location keeps its last value.
  r.objective_trace.assign(longest, 0.0);
  for (const auto& sol : s.per_location)
    for (size_t i = 0; i < longest; ++i)
      r.objective_trace[i] += sol.trace.empty() ? sol.objective : sol.trace[std::min(i, sol.trace.size() - 1)];

  const auto feas = check_feasible(r.params, opts.solver.objective == Objective::ml
                                                 ? std::optional<double>(opts.solver.rho)
                                                 : std::nullopt);
  if (!feas.feasible) r.warnings.push_back("fitted parameters violate a constraint: " + feas.violations[0].describe());

  r.A.K = pt.K;
  r.A.d = d;
  r.A.M = pt.M;
  r.A.N = pt.N;
  r.A.block = pattern_gram(pt);
  if (opts.compute_bounds) {
    r.thetas = condition_numbers(r.A);
    const long kappa = dims_of(r.params).kappa;
    for (Norm p : {Norm::one, Norm::two, Norm::inf})
      r.bounds.push_back(error_bound(r.thetas, p, kappa, pt.N, opts.epsilon, opts.solver.objective, opts.solver.rho));
  }
  if (opts.bootstrap > 0) {
    try {
      BootstrapResult b = bootstrap(events, d, opts, r.params, opts.bootstrap, opts.seed);
      if (b.dropped > 0) r.warnings.push_back(std::to_string(b.dropped) + " bootstrap replicates dropped");
      r.bootstrap = std::move(b);
    } catch (const InsufficientDataError& e) {
      r.warnings.push_back(std::string("bootstrap failed: ") + e.what());
    }
  }
  return r;
}

double frequency_mse(const EventSequence& events, int d, const FitOptions& opts) {
  const long N = usable_steps(events, d);
  const long half = N / 2;
  if (half < 1 || N - half < 1) throw InsufficientDataError("too few usable days to split for the frequency check");
  const int split = events.valid_from + d + static_cast<int>(half);
  EventSequence train = events;
  train.states = events.states.topRows(split);
  FitOptions o = opts;
  o.compute_bounds = false;
  o.bootstrap = 0;
  const ModelParams params = fit_params(train, d, o);
  const int K = events.locations(), M = events.M;
  Eigen::MatrixXd predicted = Eigen::MatrixXd::Zero(K, M + 1);
  Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(K, M + 1);
  for (int t = split; t < events.days(); ++t) {
    predicted += state_probs(params, history_at(events, t, d));
    for (int k = 0; k < K; ++k) observed(k, events.states(t, k)) += 1.0;
  }
  const double n = events.days() - split;
  const Eigen::MatrixXd diff = (predicted - observed).rightCols(M) / n;
  return diff.squaredNorm() / static_cast<double>(K * M);
}

FrequencyEvaluator frequency_mse_evaluator(int d, FitOptions opts) {
  return [d, opts](const EventSequence& events) { return frequency_mse(events, d, opts); };
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

}  // namespace

nlohmann::json to_json(const ConditionNumbers& thetas) {
  return {{"theta_1", number(thetas.theta_1)},
          {"theta_1_certificate", thetas.theta_1_certificate},
          {"theta_2", number(thetas.theta_2)},
          {"theta_inf", number(thetas.theta_inf)}};
}

nlohmann::json to_json(const ErrorBound& bound) {
  nlohmann::json j = {{"p", to_string(bound.p)},
                      {"value", number(bound.value)},
                      {"epsilon", bound.epsilon},
                      {"method", to_string(bound.method)}};
  if (bound.method == Objective::ml) j["rho"] = bound.rho;
  return j;
}

nlohmann::json fit_report_json(const FitReport& r) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["objective"] = to_string(r.objective);
  j["solver"] = {{"method", to_string(r.solver.method)},
                 {"tol", r.solver.tolerance()},
                 {"max_iter", r.solver.max_iter},
                 {"rho", r.solver.rho}};
  j["dims"] = {{"K", r.K}, {"d", r.d}, {"M", r.M}, {"kappa", dims_of(r.params).kappa}, {"N", r.N}};
  j["params"] = params_to_json(r.params, r.location_ids);
  j["objective_value"] = number(r.objective_value);
  nlohmann::json trace = nlohmann::json::array();
  const size_t shown = std::min<size_t>(r.objective_trace.size(), 20);
  for (size_t i = 0; i < shown; ++i) trace.push_back(number(r.objective_trace[i]));
  j["objective_trace"] = {{"length", r.objective_trace.size()},
                          {"head", trace},
                          {"last", r.objective_trace.empty() ? nlohmann::json(nullptr)
                                                             : number(r.objective_trace.back())}};
  j["final_gradient_norm"] = number(r.final_gradient_norm);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["warnings"] = r.warnings;
  j["thetas"] = to_json(r.thetas);
  nlohmann::json bounds = nlohmann::json::array();
  for (const auto& b : r.bounds) bounds.push_back(to_json(b));
  j["bounds"] = bounds;
  if (r.bootstrap) {
    const auto& b = *r.bootstrap;
    j["bootstrap"] = {{"requested", b.requested}, {"used", b.used},         {"dropped", b.dropped},
                      {"z", b.z},                 {"se", vector_json(b.se)}, {"ci_low", vector_json(b.ci_low)},
                      {"ci_high", vector_json(b.ci_high)}};
  } else {
    j["bootstrap"] = nullptr;
  }
  return j;
}

nlohmann::json graph_json(const FitReport& report, const std::vector<SensorMeta>& sites) {
  const Dims dim = dims_of(report.params);
  auto id_of = [&](int k) {
    return k < static_cast<int>(report.location_ids.size()) ? report.location_ids[k] : "L" + std::to_string(k);
  };
  nlohmann::json nodes = nlohmann::json::array();
  for (int k = 0; k < dim.K; ++k) {
    nlohmann::json n = {{"id", id_of(k)}};
    n["lat"] = nullptr;
    n["lon"] = nullptr;
    for (const auto& s : sites)
      if (s.id == id_of(k)) {
        n["lat"] = s.latitude;
        n["lon"] = s.longitude;
      }
    if (const auto* p = std::get_if<SingleStateParams>(&report.params))
      n["birthrate"] = p->birthrate(k);
    else
      n["birthrate"] = std::get<MultiStateParams>(report.params).birthrate.row(k).sum();
    nodes.push_back(n);
  }
  nlohmann::json edges = nlohmann::json::array();
  for (int s = 1; s <= dim.d; ++s)
    for (int k = 0; k < dim.K; ++k)
      for (int l = 0; l < dim.K; ++l) {
        double w = 0.0;
        if (const auto* p = std::get_if<SingleStateParams>(&report.params)) {
          w = p->inter(s, k, l);
        } else {
          const auto& mp = std::get<MultiStateParams>(report.params);
          for (int c = 1; c <= dim.M; ++c)
            for (int q = 0; q <= dim.M; ++q)
              if (std::abs(mp.inter(s, k, l, c, q)) > std::abs(w)) w = mp.inter(s, k, l, c, q);
        }
        edges.push_back({{"from", id_of(l)},
                         {"to", id_of(k)},
                         {"lag", s},
                         {"weight", std::abs(w)},
                         {"sign", w > 0.0 ? 1 : (w < 0.0 ? -1 : 0)}});
      }
  return {{"schema_version", kSchemaVersion}, {"nodes", nodes}, {"edges", edges}};
}

}  // namespace ramp
