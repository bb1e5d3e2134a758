#include "ramp/model.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "ramp/error.hpp"
#include "ramp/rng.hpp"

namespace ramp {

HistoryBlock history_at(const EventSequence& events, int t, int d) {
  if (t < d) throw InsufficientHistoryError("day " + std::to_string(t) + " has fewer than d prior days");
  HistoryBlock h(d, events.locations());
  for (int s = 1; s <= d; ++s) h.row(s - 1) = events.states.row(t - s);
  return h;
}

// ---------------------------------------------------------------------------
// Parameter containers

SingleStateParams::SingleStateParams(int K_, int d_)
    : K(K_), d(d_), birthrate(Eigen::VectorXd::Zero(K_)), interaction(size_t(d_) * K_ * K_, 0.0) {
  if (K_ < 1 || d_ < 1) throw DimensionError("single-state params need K >= 1 and d >= 1");
}

Eigen::VectorXd SingleStateParams::vec() const {
  Eigen::VectorXd v(kappa());
  v.head(K) = birthrate;
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l)
      for (int s = 1; s <= d; ++s) v(vec_index(K, d, s, k, l)) = inter(s, k, l);
  return v;
}

SingleStateParams SingleStateParams::from_vec(int K, int d, const Eigen::VectorXd& v) {
  SingleStateParams p(K, d);
  if (v.size() != p.kappa())
    throw DimensionError("parameter vector has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(p.kappa()));
  p.birthrate = v.head(K);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l)
      for (int s = 1; s <= d; ++s) p.inter(s, k, l) = v(vec_index(K, d, s, k, l));
  return p;
}

MultiStateParams::MultiStateParams(int K_, int d_, int M_)
    : K(K_), d(d_), M(M_), birthrate(Eigen::MatrixXd::Zero(K_, M_)),
      interaction(size_t(d_) * K_ * K_ * M_ * (M_ + 1), 0.0) {
  if (K_ < 1 || d_ < 1 || M_ < 1) throw DimensionError("multi-state params need K, d, M >= 1");
}

long MultiStateParams::vec_index(int K, int d, int M, int s, int k, int l, int p, int q) {
  const long block = static_cast<long>(M) * K * d * (M + 1);
  return static_cast<long>(K) * M + k * block + static_cast<long>(p - 1) * K * d * (M + 1) +
         static_cast<long>(l) * d * (M + 1) + static_cast<long>(s - 1) * (M + 1) + q;
}

Eigen::VectorXd MultiStateParams::vec() const {
  Eigen::VectorXd v(kappa());
  for (int k = 0; k < K; ++k)
    for (int p = 1; p <= M; ++p) v(k * M + p - 1) = birthrate(k, p - 1);
  for (int s = 1; s <= d; ++s)
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < K; ++l)
        for (int p = 1; p <= M; ++p)
          for (int q = 0; q <= M; ++q) v(vec_index(K, d, M, s, k, l, p, q)) = inter(s, k, l, p, q);
  return v;
}

MultiStateParams MultiStateParams::from_vec(int K, int d, int M, const Eigen::VectorXd& v) {
  MultiStateParams out(K, d, M);
  if (v.size() != out.kappa())
    throw DimensionError("parameter vector has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(out.kappa()));
  for (int k = 0; k < K; ++k)
    for (int p = 1; p <= M; ++p) out.birthrate(k, p - 1) = v(k * M + p - 1);
  for (int s = 1; s <= d; ++s)
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < K; ++l)
        for (int p = 1; p <= M; ++p)
          for (int q = 0; q <= M; ++q) out.inter(s, k, l, p, q) = v(vec_index(K, d, M, s, k, l, p, q));
  return out;
}

MultiStateParams MultiStateParams::min_norm_gauge() const {
  MultiStateParams out = *this;
  const int G = d * K;
  for (int k = 0; k < K; ++k)
    for (int p = 1; p <= M; ++p) {
      const double b = birthrate(k, p - 1);
      double total = 0.0;
      std::vector<double> sums(G, 0.0);
      for (int s = 1; s <= d; ++s)
        for (int l = 0; l < K; ++l) {
          double acc = 0.0;
          for (int q = 0; q <= M; ++q) acc += inter(s, k, l, p, q);
          sums[(s - 1) * K + l] = acc;
          total += acc;
        }
      const double shift = (total - G * b) / (M + 1 + G);
      out.birthrate(k, p - 1) = b + shift;
      for (int s = 1; s <= d; ++s)
        for (int l = 0; l < K; ++l) {
          const double c = (sums[(s - 1) * K + l] - b - shift) / (M + 1);
          for (int q = 0; q <= M; ++q) out.inter(s, k, l, p, q) -= c;
        }
    }
  return out;
}

Dims dims_of(const ModelParams& params) {
  return std::visit(
      [](const auto& p) -> Dims {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SingleStateParams>)
          return {p.K, p.d, 1, p.kappa()};
        else
          return {p.K, p.d, p.M, p.kappa()};
      },
      params);
}

Eigen::VectorXd to_vec(const ModelParams& params) {
  return std::visit([](const auto& p) { return p.vec(); }, params);
}

ModelParams with_vec(const ModelParams& shape, const Eigen::VectorXd& v) {
  if (auto* s = std::get_if<SingleStateParams>(&shape)) return SingleStateParams::from_vec(s->K, s->d, v);
  const auto& m = std::get<MultiStateParams>(shape);
  return MultiStateParams::from_vec(m.K, m.d, m.M, v);
}

// ---------------------------------------------------------------------------
// Feature maps

Eigen::MatrixXd feature_map(const HistoryBlock& history) {
  const int d = static_cast<int>(history.rows());
  const int K = static_cast<int>(history.cols());
  if (d < 1 || K < 1) throw DimensionError("empty history block");
  if ((history.array() < 0).any() || (history.array() > 1).any())
    throw DimensionError("single-state feature map needs a binary history");
  const long kappa = static_cast<long>(K) * K * d + K;
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(K, kappa);
  // vec() stacks the columns of the d x K block.
  Eigen::VectorXd v(d * K);
  for (int l = 0; l < K; ++l)
    for (int s = 0; s < d; ++s) v(l * d + s) = history(s, l);
  for (int k = 0; k < K; ++k) {
    eta(k, k) = 1.0;
    eta.block(k, K + static_cast<long>(k) * d * K, 1, d * K) = v.transpose();
  }
  return eta;
}

Eigen::MatrixXd feature_map(const HistoryBlock& history, int K, int d) {
  if (history.rows() != d || history.cols() != K)
    throw DimensionError("history block is " + std::to_string(history.rows()) + "x" +
                         std::to_string(history.cols()) + ", expected " + std::to_string(d) + "x" +
                         std::to_string(K));
  return feature_map(history);
}

Eigen::MatrixXd feature_map_multi(const HistoryBlock& history, int M) {
  const int d = static_cast<int>(history.rows());
  const int K = static_cast<int>(history.cols());
  if ((history.array() < 0).any() || (history.array() > M).any())
    throw DimensionError("history entries must lie in {0..M}");
  MultiStateParams shape(K, d, M);
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(static_cast<long>(K) * M, shape.kappa());
  for (int k = 0; k < K; ++k)
    for (int p = 1; p <= M; ++p) {
      const long row = static_cast<long>(k) * M + p - 1;
      eta(row, row) = 1.0;
      for (int s = 1; s <= d; ++s)
        for (int l = 0; l < K; ++l)
          eta(row, MultiStateParams::vec_index(K, d, M, s, k, l, p, history(s - 1, l))) = 1.0;
    }
  return eta;
}

// ---------------------------------------------------------------------------
// Feasibility

std::string Violation::describe() const {
  std::ostringstream os;
  os << "location " << location << (upper ? " upper" : " lower") << " bound";
  if (state > 0) os << " for state " << state;
  os << " (slack " << slack << ")";
  return os.str();
}

namespace {

FeasibilityReport finish(std::vector<Violation> all, int K) {
  FeasibilityReport r;
  r.worst_slack = Eigen::VectorXd::Constant(K, std::numeric_limits<double>::infinity());
  r.worst.resize(K);
  for (const auto& v : all) {
    if (v.slack < r.worst_slack(v.location)) {
      r.worst_slack(v.location) = v.slack;
      r.worst[v.location] = v;
    }
    if (v.slack < 0.0) {
      r.feasible = false;
      r.violations.push_back(v);
    }
  }
  return r;
}

}  // namespace

FeasibilityReport check_feasible(const SingleStateParams& params, std::optional<double> rho) {
  const double lo = rho.value_or(0.0);
  const double hi = 1.0 - rho.value_or(0.0);
  std::vector<Violation> all;
  for (int k = 0; k < params.K; ++k) {
    double neg = 0.0, pos = 0.0;
    for (int s = 1; s <= params.d; ++s)
      for (int l = 0; l < params.K; ++l) {
        double b = params.inter(s, k, l);
        neg += std::min(b, 0.0);
        pos += std::max(b, 0.0);
      }
    all.push_back({k, 0, false, params.birthrate(k) + neg - lo});
    all.push_back({k, 0, true, hi - (params.birthrate(k) + pos)});
  }
  return finish(std::move(all), params.K);
}

FeasibilityReport check_feasible(const MultiStateParams& params, std::optional<double> rho) {
  const double lo = rho.value_or(0.0);
  const double hi = 1.0 - rho.value_or(0.0);
  const int M = params.M;
  std::vector<Violation> all;
  for (int k = 0; k < params.K; ++k) {
    double upper = params.birthrate.row(k).sum();
    for (int p = 1; p <= M; ++p) {
      double lower = params.birthrate(k, p - 1);
      for (int s = 1; s <= params.d; ++s)
        for (int l = 0; l < params.K; ++l) {
          double m = std::numeric_limits<double>::infinity();
          for (int q = 0; q <= M; ++q) m = std::min(m, params.inter(s, k, l, p, q));
          lower += m;
        }
      all.push_back({k, p, false, lower - lo});
    }
    for (int s = 1; s <= params.d; ++s)
      for (int l = 0; l < params.K; ++l) {
        double m = -std::numeric_limits<double>::infinity();
        for (int q = 0; q <= M; ++q) {
          double col = 0.0;
          for (int p = 1; p <= M; ++p) col += params.inter(s, k, l, p, q);
          m = std::max(m, col);
        }
        upper += m;
      }
    all.push_back({k, 0, true, hi - upper});
  }
  return finish(std::move(all), params.K);
}

FeasibilityReport check_feasible(const ModelParams& params, std::optional<double> rho) {
  return std::visit([&](const auto& p) { return check_feasible(p, rho); }, params);
}

void require_feasible(const ModelParams& params, std::optional<double> rho, double tol) {
  auto report = check_feasible(params, rho);
  const Violation* worst = nullptr;
  for (const auto& v : report.violations)
    if (v.slack < -tol && (!worst || v.slack < worst->slack)) worst = &v;
  if (worst) throw ConstraintViolation("infeasible parameters: " + worst->describe());
}

// ---------------------------------------------------------------------------
// Conditional probabilities

Eigen::MatrixXd state_probs(const ModelParams& params, const HistoryBlock& history) {
  if (const auto* sp = std::get_if<SingleStateParams>(&params)) {
    const auto& p = *sp;
    Eigen::MatrixXd out(p.K, 2);
    for (int k = 0; k < p.K; ++k) {
      double v = p.birthrate(k);
      for (int s = 1; s <= p.d; ++s)
        for (int l = 0; l < p.K; ++l)
          if (history(s - 1, l)) v += p.inter(s, k, l);
      out(k, 1) = v;
      out(k, 0) = 1.0 - v;
    }
    return out;
  }
  const auto& p = std::get<MultiStateParams>(params);
  Eigen::MatrixXd out(p.K, p.M + 1);
  for (int k = 0; k < p.K; ++k) {
    double rest = 1.0;
    for (int c = 1; c <= p.M; ++c) {
      double v = p.birthrate(k, c - 1);
      for (int s = 1; s <= p.d; ++s)
        for (int l = 0; l < p.K; ++l) v += p.inter(s, k, l, c, history(s - 1, l));
      out(k, c) = v;
      rest -= v;
    }
    out(k, 0) = rest;
  }
  return out;
}

Eigen::VectorXd cond_prob_single(const SingleStateParams& params, const HistoryBlock& history) {
  if (history.rows() != params.d || history.cols() != params.K)
    throw DimensionError("history block does not match parameter dimensions");
  if ((history.array() < 0).any() || (history.array() > 1).any())
    throw DimensionError("single-state history must be binary");
  require_feasible(params);
  return state_probs(params, history).col(1);
}

Eigen::MatrixXd cond_prob_multi(const MultiStateParams& params, const HistoryBlock& history) {
  if (history.rows() != params.d || history.cols() != params.K)
    throw DimensionError("history block does not match parameter dimensions");
  if ((history.array() < 0).any() || (history.array() > params.M).any())
    throw DimensionError("history entries must lie in {0..M}");
  require_feasible(params);
  return state_probs(params, history);
}

// ---------------------------------------------------------------------------
// Simulation

EventSequence simulate(const ModelParams& params, int T, std::uint64_t seed, std::optional<HistoryBlock> init) {
  const Dims dim = dims_of(params);
  require_feasible(params);
  if (T < 1) throw ValidationError("simulation needs T >= 1");
  HistoryBlock hist = init.value_or(HistoryBlock::Zero(dim.d, dim.K));
  if (hist.rows() != dim.d || hist.cols() != dim.K)
    throw DimensionError("initial history block does not match parameter dimensions");

  EventSequence ev;
  ev.M = dim.M;
  ev.valid_from = 0;
  for (int k = 0; k < dim.K; ++k) ev.location_ids.push_back("L" + std::to_string(k));
  ev.states.resize(T, dim.K);

  Rng rng(seed);
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd probs = state_probs(params, hist);
    for (int k = 0; k < dim.K; ++k) {
      const double u = rng.uniform();
      int state = 0;
      double cum = 0.0;
      for (int c = 1; c <= dim.M; ++c) {
        cum += probs(k, c);
        if (u < cum) {
          state = c;
          break;
        }
      }
      ev.states(t, k) = state;
    }
    // Shift lags: row 0 becomes the day just drawn.
    for (int s = dim.d - 1; s > 0; --s) hist.row(s) = hist.row(s - 1);
    hist.row(0) = ev.states.row(t);
  }
  return ev;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json params_to_json(const ModelParams& params, const std::vector<std::string>& location_ids) {
  using nlohmann::json;
  const Dims dim = dims_of(params);
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = std::holds_alternative<SingleStateParams>(params) ? "single" : "multi";
  doc["dims"] = {{"K", dim.K}, {"d", dim.d}, {"M", dim.M}, {"kappa", dim.kappa}};
  if (!location_ids.empty()) doc["locations"] = location_ids;
  const Eigen::VectorXd v = to_vec(params);
  doc["vector"] = std::vector<double>(v.data(), v.data() + v.size());

  if (const auto* sp = std::get_if<SingleStateParams>(&params)) {
    doc["birthrate"] = std::vector<double>(sp->birthrate.data(), sp->birthrate.data() + sp->K);
    json inter = json::array();
    for (int s = 1; s <= sp->d; ++s) {
      json lag = json::array();
      for (int k = 0; k < sp->K; ++k) {
        json row = json::array();
        for (int l = 0; l < sp->K; ++l) row.push_back(sp->inter(s, k, l));
        lag.push_back(row);
      }
      inter.push_back(lag);
    }
    doc["interaction"] = inter;  // [lag][target][source]
  } else {
    const auto& mp = std::get<MultiStateParams>(params);
    json birth = json::array();
    for (int k = 0; k < mp.K; ++k) {
      json row = json::array();
      for (int p = 1; p <= mp.M; ++p) row.push_back(mp.birthrate(k, p - 1));
      birth.push_back(row);
    }
    doc["birthrate"] = birth;
    json inter = json::array();
    for (int s = 1; s <= mp.d; ++s) {
      json lag = json::array();
      for (int k = 0; k < mp.K; ++k) {
        json tgt = json::array();
        for (int l = 0; l < mp.K; ++l) {
          json src = json::array();
          for (int p = 1; p <= mp.M; ++p) {
            json row = json::array();
            for (int q = 0; q <= mp.M; ++q) row.push_back(mp.inter(s, k, l, p, q));
            src.push_back(row);
          }
          tgt.push_back(src);
        }
        lag.push_back(tgt);
      }
      inter.push_back(lag);
    }
    doc["interaction"] = inter;  // [lag][target][source][state p-1][source state q]
  }
  return doc;
}

ModelParams params_from_json(const nlohmann::json& doc, std::vector<std::string>* location_ids) {
  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
      throw FormatError("unsupported params schema_version");
    const auto& dims = doc.at("dims");
    const int K = dims.at("K").get<int>();
    const int d = dims.at("d").get<int>();
    const int M = dims.at("M").get<int>();
    auto raw = doc.at("vector").get<std::vector<double>>();
    Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(raw.data(), static_cast<long>(raw.size()));
    if (location_ids && doc.contains("locations"))
      *location_ids = doc.at("locations").get<std::vector<std::string>>();
    if (doc.at("kind").get<std::string>() == "single") return SingleStateParams::from_vec(K, d, v);
    return MultiStateParams::from_vec(K, d, M, v);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed params document: ") + e.what());
  }
}

}  // namespace ramp
