#include "ramp/extract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ramp/error.hpp"
#include "ramp/kernels.hpp"

namespace ramp {

std::string to_string(ExtractMode mode) {
  return mode == ExtractMode::intra_day ? "intra-day" : "daily-average";
}

ExtractMode parse_extract_mode(const std::string& name) {
  if (name == "intra-day" || name == "intra_day") return ExtractMode::intra_day;
  if (name == "daily-average" || name == "daily_average") return ExtractMode::daily_average;
  throw ValidationError("unknown extraction mode '" + name + "'");
}

void ExtractionConfig::validate() const {
  if (w1 < 1) throw ValidationError("w1 must be at least 1");
  if (!(delta > 0.0 && delta < 0.5)) throw ValidationError("delta must lie in (0, 0.5)");
  if (!(frac > 0.0 && frac <= 1.0)) throw ValidationError("frac must lie in (0, 1]");
  if (states != 1 && states != 2) throw ValidationError("states must be 1 or 2");
}

std::vector<double> history_window(const RadiationSeries& series, int t, int w1) {
  if (w1 < 1) throw ValidationError("w1 must be at least 1");
  if (t < w1) throw InsufficientHistoryError("day " + std::to_string(t) + " has fewer than w1 prior days");
  if (t > series.days()) throw DimensionError("day index past the end of the series");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(w1) * series.n);
  for (int day = t - w1; day < t; ++day)
    for (int j = 0; j < series.n; ++j) out.push_back(series.ghi(day, j));
  return out;
}

std::pair<double, double> quantile_pair(std::span<const double> window, double delta) {
  if (window.empty()) throw InsufficientDataError("quantile of an empty window");
  if (!(delta > 0.0 && delta < 0.5)) throw ValidationError("delta must lie in (0, 0.5)");
  std::vector<double> v(window.begin(), window.end());
  std::sort(v.begin(), v.end());
  auto [lo, hi] = kernels::quantile_ranks(static_cast<long>(v.size()), delta);
  return {v[lo - 1], v[hi - 1]};
}

Eigen::VectorXi extract_states(const RadiationSeries& input, const ExtractionConfig& cfg) {
  cfg.validate();
  const RadiationSeries series = cfg.mode == ExtractMode::daily_average ? daily_average(input) : input;
  const int T = series.days();
  if (T <= cfg.w1)
    throw InsufficientDataError("series of " + std::to_string(T) + " days is not longer than w1 = " +
                                std::to_string(cfg.w1));
  const auto bands = kernels::quantile_bands_omp(series.ghi, cfg.w1, cfg.delta);
  Eigen::VectorXi out = Eigen::VectorXi::Constant(T, EventSequence::kUnavailable);
  const double n = series.n;
  for (int t = cfg.w1; t < T; ++t) {
    int above = 0, below = 0;
    for (int j = 0; j < series.n; ++j) {
      const double x = series.ghi(t, j);
      above += x > bands.high(t);
      below += x < bands.low(t);
    }
    const bool high = above / n >= cfg.frac;
    const bool low = below / n >= cfg.frac;
    if (high)
      out(t) = 1;
    else if (low)
      out(t) = cfg.states == 2 ? 2 : 1;
    else
      out(t) = 0;
  }
  return out;
}

EventSequence extract_events(const RadiationSeries& series, const ExtractionConfig& cfg) {
  EventSequence ev;
  ev.M = cfg.states;
  ev.valid_from = cfg.w1;
  ev.start_date = series.start_date;
  ev.location_ids = {series.meta.id};
  ev.states = extract_states(series, cfg);
  return ev;
}

EventSequence extract_events(const Dataset& data, const ExtractionConfig& cfg) {
  cfg.validate();
  const int K = data.locations();
  if (K == 0) throw InsufficientDataError("dataset has no locations");
  EventSequence ev;
  ev.M = cfg.states;
  ev.valid_from = cfg.w1;
  ev.start_date = data.start_date();
  ev.location_ids = data.ids();
  ev.states.resize(data.days(), K);
  std::vector<Eigen::VectorXi> cols(K);
  // Errors thrown inside the parallel region are collected, not propagated.
  std::vector<std::string> failures(K);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < K; ++k) {
    try {
      cols[k] = extract_states(data.series[k], cfg);
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  }
  for (int k = 0; k < K; ++k) {
    if (!failures[k].empty()) throw InsufficientDataError(data.series[k].meta.id + ": " + failures[k]);
    ev.states.col(k) = cols[k];
  }
  return ev;
}

SweepResult delta_sweep(const Dataset& data, const std::vector<double>& grid, const ExtractionConfig& base,
                        const FrequencyEvaluator& evaluate) {
  if (grid.empty()) throw ValidationError("delta grid is empty");
  SweepResult result;
  double best = std::numeric_limits<double>::infinity();
  for (double delta : grid) {
    ExtractionConfig cfg = base;
    cfg.delta = delta;
    SweepPoint point;
    point.delta = delta;
    const EventSequence ev = extract_events(data, cfg);
    const auto usable = ev.states.bottomRows(ev.days() - ev.valid_from);
    point.events = (usable.array() > 0).count();
    if (point.events == 0) {
      point.degenerate = true;
      point.note = "no events extracted";
    }
    try {
      point.mse = evaluate(ev);
    } catch (const Error& e) {
      point.degenerate = true;
      point.mse = std::numeric_limits<double>::quiet_NaN();
      point.note = e.what();
    }
    if (!point.degenerate && point.mse < best) {
      best = point.mse;
      result.best_delta = delta;
    }
    result.points.push_back(point);
  }
  return result;
}

}  // namespace ramp
