#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ramp/date.hpp"

namespace ramp {

// Day-by-location matrix of event states in {0,...,M}. Days before
// valid_from had no full extraction window and hold kUnavailable.
struct EventSequence {
  static constexpr int kUnavailable = -1;

  int M = 1;
  int valid_from = 0;
  Date start_date{2000, 1, 1};
  std::vector<std::string> location_ids;
  Eigen::MatrixXi states;  // T x K

  int days() const { return static_cast<int>(states.rows()); }
  int locations() const { return static_cast<int>(states.cols()); }
  Date date_of(int t) const { return start_date + t; }

  // Throws ValidationError when entries leave {0..M} after valid_from or
  // unavailable marks appear after it.
  void validate() const;
};

// Provenance lines are written as "# key=value" ahead of the column header.
using Provenance = std::vector<std::pair<std::string, std::string>>;

void write_events_csv(const EventSequence& events, std::ostream& out, const Provenance& provenance = {});
EventSequence read_events_csv(std::istream& in, Provenance* provenance = nullptr);

// Restriction to the days inside range; valid_from is rebased.
EventSequence slice_events(const EventSequence& events, const DateRange& range);

// Merges states 1..M into a single abnormal state.
EventSequence collapse_states(const EventSequence& events);

}  // namespace ramp
