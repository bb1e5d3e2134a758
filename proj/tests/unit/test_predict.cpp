#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ramp/error.hpp"
#include "ramp/predict.hpp"
#include "support.hpp"

using namespace ramp;
using testing::random_single;

namespace {

double f1_at(std::span<const double> preds, std::span<const int> truth, double tau) {
  long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const bool yes = preds[i] >= tau;
    tp += yes && truth[i];
    fp += yes && !truth[i];
    fn += !yes && truth[i];
  }
  return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
}

ThresholdPolicy static_policy(int K, int M, double tau) {
  ThresholdPolicy p;
  p.static_tau = Eigen::MatrixXd::Constant(K, M, tau);
  return p;
}

PredictionRecord record(int k, std::initializer_list<double> p, int decision, int truth) {
  PredictionRecord r;
  r.k = k;
  r.p_hat = Eigen::VectorXd::Map(std::data(p), static_cast<long>(p.size()));
  r.decision = decision;
  r.truth = truth;
  return r;
}

}  // namespace

TEST_SUITE("predict") {
  TEST_CASE("dynamic thresholds") {
    const std::vector<int> ev{1, 0, 1, 0};
    const std::vector<double> pr{0.8, 0.2, 0.6, 0.4};
    CHECK(dynamic_tau(ev, pr, 0.5, 0.9) == doctest::Approx(0.5));
    const std::vector<double> flat(4, 0.37);
    CHECK(dynamic_tau(ev, flat, 0.3, 0.9) == doctest::Approx(0.37));
    const std::vector<int> calm(4, 0);
    CHECK(dynamic_tau(calm, pr, 0.5, 0.9) == 0.9);

    Eigen::MatrixXd one(2, 1);
    one << 0.6, 0.8;
    CHECK(dynamic_tau_multi(std::vector<int>{1, 1}, one, 1, 1, 0.9) == doctest::Approx(0.35));

    const double c = 0.3;
    Eigen::MatrixXd two = Eigen::MatrixXd::Constant(4, 2, c);
    const std::vector<int> mixed{1, 2, 0, 2};
    CHECK(dynamic_tau_multi(mixed, two, 2, 1, 0.9) == doctest::Approx(2 * c / 3));
    CHECK(dynamic_tau_multi(mixed, two, 2, 2, 0.9) == doctest::Approx(4 * c / 3));
    CHECK(dynamic_tau_multi(std::vector<int>{1, 1, 0, 0}, two, 2, 1, 0.9) == 0.9);
  }

  TEST_CASE("dynamic threshold is a convex combination of the window") {
    Rng rng(41);
    for (int i = 0; i < 500; ++i) {
      const int w = 2 + static_cast<int>(rng.below(60));
      std::vector<int> ev(w);
      std::vector<double> pr(w);
      for (int j = 0; j < w; ++j) {
        ev[j] = rng.uniform() < 0.3;
        pr[j] = rng.uniform();
      }
      const double tau = dynamic_tau(ev, pr, rng.uniform(), -1.0);
      if (tau == -1.0) continue;
      CHECK(tau >= *std::min_element(pr.begin(), pr.end()) - 1e-15);
      CHECK(tau <= *std::max_element(pr.begin(), pr.end()) + 1e-15);
    }
  }

  TEST_CASE("decisions") {
    CHECK(decide(Eigen::VectorXd::Constant(1, 0.7), Eigen::VectorXd::Constant(1, 0.5)) == 1);
    CHECK(decide(Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 0.5)) == 1);
    CHECK(decide(Eigen::VectorXd::Constant(1, 0.4), Eigen::VectorXd::Constant(1, 0.5)) == 0);
    Eigen::Vector2d p(0.4, 0.1), tau(0.3, 0.3);
    CHECK(decide(p, tau) == 1);
    p << 0.35, 0.45;
    CHECK(decide(p, tau) == 2);
    tau << 0.3, 0.5;
    CHECK(decide(p, tau) == 1);
    tau << 0.5, 0.5;
    CHECK(decide(p, tau) == 0);
  }

  TEST_CASE("metrics") {
    const auto m = metrics_from_counts(1, 3, 1, 2);
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.6));
    CHECK(m.f1 == doctest::Approx(0.6667).epsilon(1e-4));
    CHECK(metrics_from_counts(1, 0, 0, 0).f1 == 0.0);
    const auto perfect = metrics_from_counts(1, 5, 0, 0);
    CHECK(perfect.f1 == 1.0);

    // Precision 0.97 and recall 0.98 give 0.975 to three places.
    const auto table = metrics_from_counts(1, 97 * 98, 3 * 98, 2 * 97);
    CHECK(table.precision == doctest::Approx(0.97));
    CHECK(table.recall == doctest::Approx(0.98));
    CHECK(std::round(table.f1 * 1000) / 1000 == doctest::Approx(0.975));

    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
      const auto r = metrics_from_counts(1, static_cast<long>(rng.below(50)), static_cast<long>(rng.below(50)),
                                         static_cast<long>(rng.below(50)));
      if (r.precision + r.recall > 0)
        CHECK(std::abs(r.f1 - 2 * r.precision * r.recall / (r.precision + r.recall)) <= 1e-12);
    }

    const std::vector<PredictionRecord> recs{record(0, {0.1, 0.5}, 2, 2), record(1, {0.6, 0.1}, 1, 2),
                                             record(0, {0.1, 0.1}, 0, 1), record(1, {0.7, 0.1}, 1, 1),
                                             record(0, {0.1, 0.1}, 0, 0), record(1, {0.1, 0.9}, 2, 0)};
    const MetricReport rep = evaluate(recs, 2, 2);
    CHECK(rep.records == 6);
    REQUIRE(rep.per_state.size() == 2);
    CHECK(rep.per_state[0].tp == 1);
    CHECK(rep.per_state[0].fp == 1);
    CHECK(rep.per_state[0].fn == 1);
    CHECK(rep.per_state[1].tp == 1);
    CHECK(rep.per_state[1].fp == 1);
    CHECK(rep.per_state[1].fn == 1);
    CHECK(rep.micro.tp == 2);
    CHECK(rep.micro.fp == 2);
    CHECK(rep.micro.fn == 2);
    REQUIRE(rep.per_location.size() == 2);
    CHECK(rep.per_location[0].tp == 1);
    CHECK(rep.per_location[0].fn == 1);
    CHECK(rep.per_location[1].tp == 1);
    CHECK(rep.per_location[1].fp == 2);
    CHECK(rep.avg_freq_pred(1, 0) == doctest::Approx(2.0 / 3));
    CHECK(rep.avg_freq_true(0, 1) == doctest::Approx(1.0 / 3));
  }

  TEST_CASE("static tuning") {
    // Separated at 0.5: every grid point in (0.3, 0.7] scores 1, the
    // smallest of them wins.
    const std::vector<double> sep{0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
    const std::vector<int> lab{0, 0, 0, 1, 1, 1};
    const TuneResult r = tune_static(sep, lab);
    CHECK(r.f1 == 1.0);
    CHECK(r.tau == doctest::Approx(8.0 / 24));

    Rng rng(43);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> p(12);
      std::vector<int> y(12);
      for (int i = 0; i < 12; ++i) {
        p[i] = std::round(4 * rng.uniform()) / 4;
        y[i] = rng.uniform() < 0.4;
      }
      if (std::count(y.begin(), y.end(), 1) == 0) continue;
      for (int grid : {3, 5}) {
        double best = -1, arg = 0;
        for (int i = 0; i < grid; ++i) {
          const double tau = static_cast<double>(i) / (grid - 1);
          if (f1_at(p, y, tau) > best + 1e-12) {
            best = f1_at(p, y, tau);
            arg = tau;
          }
        }
        const TuneResult got = tune_static(p, y, grid);
        CHECK(got.tau == arg);
        CHECK(got.f1 == doctest::Approx(best));
      }
    }
    const TuneResult none = tune_static(sep, std::vector<int>(6, 0));
    CHECK(none.fallback);
    CHECK(none.tau == 0.5);
  }

  TEST_CASE("sequential prediction against a second implementation") {
    Rng rng(44);
    const int K = 2, d = 2, w2 = 10, steps = 100;
    const auto truth = random_single(K, d, rng);
    const auto ev = simulate(truth, steps + d, 4);
    ThresholdPolicy pol = static_policy(K, 1, 0.45);
    pol.kind = PolicyKind::dynamic;
    pol.w2 = w2;
    pol.alpha = 0.4;
    const auto recs = run_sequential(truth, ev, pol);
    REQUIRE(recs.size() == static_cast<size_t>(K * steps));

    std::vector<std::vector<double>> p(K);
    std::vector<std::vector<int>> y(K);
    size_t idx = 0;
    for (int t = d; t < steps + d; ++t)
      for (int k = 0; k < K; ++k, ++idx) {
        double v = truth.birthrate(k);
        for (int s = 1; s <= d; ++s)
          for (int l = 0; l < K; ++l) v += truth.inter(s, k, l) * ev.states(t - s, l);
        double tau = 0.45;
        const int i = t - d;
        if (i >= w2) {
          double hi = 0, lo = 0;
          int nh = 0, nl = 0;
          for (int j = i - w2; j < i; ++j) (y[k][j] ? (hi += p[k][j], ++nh) : (lo += p[k][j], ++nl));
          if (nh > 0 && nl > 0) tau = 0.4 * hi / nh + 0.6 * lo / nl;
        }
        p[k].push_back(v);
        y[k].push_back(ev.states(t, k));
        const auto& r = recs[idx];
        CHECK(r.t == t);
        CHECK(r.k == k);
        CHECK(std::abs(r.p_hat(0) - v) <= 1e-14);
        CHECK(std::abs(r.tau(0) - tau) <= 1e-14);
        CHECK(r.decision == (v >= tau ? 1 : 0));
        CHECK(r.truth == ev.states(t, k));
      }

    const auto again = run_sequential(truth, ev, pol);
    for (size_t i = 0; i < recs.size(); ++i) {
      CHECK(again[i].decision == recs[i].decision);
      CHECK(again[i].tau == recs[i].tau);
    }
  }

  TEST_CASE("raising a static threshold never adds positives") {
    Rng rng(45);
    const auto truth = random_single(3, 1, rng);
    const auto ev = simulate(truth, 300, 8);
    long last = -1;
    for (int i = 0; i <= 20; ++i) {
      const auto recs = run_sequential(truth, ev, static_policy(3, 1, i / 20.0));
      long pos = 0;
      for (const auto& r : recs) pos += r.decision;
      if (last >= 0) CHECK(pos <= last);
      last = pos;
    }
    const auto all = evaluate(run_sequential(truth, ev, static_policy(3, 1, 0.0)), 3, 1);
    CHECK((all.avg_freq_pred.array() == 1.0).all());
    CHECK(all.micro.recall == 1.0);
    const auto none = evaluate(run_sequential(truth, ev, static_policy(3, 1, 1.0)), 3, 1);  // every p_hat is below 1
    CHECK((none.avg_freq_pred.array() == 0.0).all());
  }

  TEST_CASE("interval endpoints bracket the estimate") {
    Rng rng(46);
    for (int M : {1, 2}) {
      ModelParams params = M == 1 ? ModelParams{random_single(2, 2, rng)}
                                  : ModelParams{testing::random_multi(2, 2, 2, rng)};
      const Dims dim = dims_of(params);
      const auto ev = simulate(params, 200, 3);
      IntervalSpec ci;
      ci.z = 2.5;
      ci.se = Eigen::VectorXd(dim.kappa);
      for (long i = 0; i < dim.kappa; ++i) ci.se(i) = 0.05 * rng.uniform();
      const auto recs = run_sequential(params, ev, static_policy(2, M, 0.5), ci);
      for (const auto& r : recs) {
        CHECK((r.ci_low.array() <= r.p_hat.array()).all());
        CHECK((r.p_hat.array() <= r.ci_high.array()).all());
        CHECK(r.ci_low.minCoeff() >= 0.0);
        CHECK(r.ci_high.maxCoeff() <= 1.0);
      }
      ci.se.setZero();
      for (const auto& r : run_sequential(params, ev, static_policy(2, M, 0.5), ci)) {
        CHECK(r.ci_low == r.p_hat);
        CHECK(r.ci_high == r.p_hat);
      }
    }
  }

  TEST_CASE("protocol splits tuning from scoring") {
    Rng rng(47);
    const auto truth = random_single(2, 1, rng);
    const auto ev = simulate(truth, 401, 12);
    ProtocolConfig cfg;
    const auto res = run_protocol(truth, ev, 101, cfg);
    CHECK(res.begin == 101);
    CHECK(res.score_from == 101 + 90);
    CHECK(res.scored.size() == 2u * 210);
    CHECK(res.scored.front().t == res.score_from);

    cfg.fixed_tau = 0.0;
    const auto fixed = run_protocol(truth, ev, 101, cfg);
    CHECK((fixed.policy.static_tau.array() == 0.0).all());
    CHECK(fixed.metrics.micro.recall == 1.0);
  }

  TEST_CASE("validation of policies and ranges") {
    ThresholdPolicy p = static_policy(1, 1, 1.5);
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = static_policy(1, 1, 0.5);
    p.w2 = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    CHECK(parse_policy("dynamic") == PolicyKind::dynamic);
    CHECK_THROWS(parse_policy("sometimes"));

    Rng rng(48);
    const auto truth = random_single(2, 2, rng);
    const auto ev = simulate(truth, 20, 1);
    CHECK_THROWS_AS(run_sequential(truth, ev, static_policy(2, 1, 0.5), {}, 1), InsufficientHistoryError);
    CHECK_THROWS_AS(run_sequential(truth, ev, static_policy(3, 1, 0.5)), DimensionError);
  }

  TEST_CASE("prediction file layout") {
    Rng rng(49);
    const auto truth = random_single(2, 1, rng);
    auto ev = simulate(truth, 5, 1);
    ev.start_date = Date(2020, 2, 28);
    const auto recs = run_sequential(truth, ev, static_policy(2, 1, 0.5));
    std::ostringstream out;
    write_predictions_csv(recs, ev, 1, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line.find("date") != std::string::npos);
    std::getline(in, line);
    CHECK(line.rfind("2020-02-29,L0,", 0) == 0);
    int rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 8);
  }
}
