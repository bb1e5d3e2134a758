#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ramp/events.hpp"
#include "ramp/ingest.hpp"

namespace ramp {

enum class ExtractMode { intra_day, daily_average };

std::string to_string(ExtractMode mode);
ExtractMode parse_extract_mode(const std::string& name);

// frac is the share of a day's readings that must fall strictly outside
// one band for the day to count as a ramping event.
struct ExtractionConfig {
  int w1 = 30;
  double delta = 0.0005;
  double frac = 0.5;
  int states = 1;  // 1: normal/abnormal, 2: normal/high/low
  ExtractMode mode = ExtractMode::intra_day;

  void validate() const;  // throws ValidationError
};

// Readings of days t-w1 .. t-1, day by day in time order.
std::vector<double> history_window(const RadiationSeries& series, int t, int w1);

// Ceiling-rank order statistics at levels delta and 1-delta.
std::pair<double, double> quantile_pair(std::span<const double> window, double delta);

// States for one location; days before w1 hold kUnavailable. A day is high
// (state 1) when at least frac of its readings exceed the upper band and
// low when at least frac fall below the lower band. With states = 1 both
// map to 1; with states = 2 low is state 2 and high wins a tie.
Eigen::VectorXi extract_states(const RadiationSeries& series, const ExtractionConfig& cfg);

EventSequence extract_events(const RadiationSeries& series, const ExtractionConfig& cfg);
EventSequence extract_events(const Dataset& data, const ExtractionConfig& cfg);

// ---------------------------------------------------------------------------
// Frequency sweep over delta.

// Maps an extracted event sequence to the mean squared error between
// model-implied and empirical event frequencies.
using FrequencyEvaluator = std::function<double(const EventSequence&)>;

struct SweepPoint {
  double delta = 0.0;
  double mse = 0.0;
  long events = 0;          // abnormal days over all locations
  bool degenerate = false;  // no events at all; excluded from the argmin
  std::string note;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<double> best_delta;
};

SweepResult delta_sweep(const Dataset& data, const std::vector<double>& grid, const ExtractionConfig& base,
                        const FrequencyEvaluator& evaluate);

}  // namespace ramp
