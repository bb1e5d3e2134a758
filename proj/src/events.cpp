#include "ramp/events.hpp"

#include <istream>
#include <ostream>

#include "ramp/error.hpp"
#include "ramp/text.hpp"

namespace ramp {

void EventSequence::validate() const {
  if (M < 1) throw ValidationError("event sequence needs M >= 1");
  if (static_cast<int>(location_ids.size()) != locations())
    throw ValidationError("location id count does not match event columns");
  if (valid_from < 0) throw ValidationError("negative valid_from");
  for (int t = 0; t < days(); ++t)
    for (int k = 0; k < locations(); ++k) {
      int s = states(t, k);
      if (t < valid_from) {
        if (s != kUnavailable) throw ValidationError("state recorded before valid_from");
      } else if (s < 0 || s > M) {
        throw ValidationError("state " + std::to_string(s) + " outside {0.." + std::to_string(M) +
                              "} on " + date_of(t).str());
      }
    }
}

void write_events_csv(const EventSequence& events, std::ostream& out, const Provenance& provenance) {
  out << "# M=" << events.M << '\n';
  out << "# valid_from=" << events.valid_from << '\n';
  for (const auto& [k, v] : provenance) out << "# " << k << '=' << v << '\n';
  out << "date,location_id,state\n";
  for (int t = 0; t < events.days(); ++t) {
    const std::string date = events.date_of(t).str();
    for (int k = 0; k < events.locations(); ++k) {
      out << date << ',' << events.location_ids[k] << ',';
      int s = events.states(t, k);
      if (s == EventSequence::kUnavailable)
        out << "NA";
      else
        out << s;
      out << '\n';
    }
  }
}

EventSequence read_events_csv(std::istream& in, Provenance* provenance) {
  EventSequence ev;
  int declared_m = 0;
  std::string line;
  long lineno = 0;
  bool header = false;
  std::vector<Date> dates;
  std::vector<std::vector<int>> rows;
  std::map<std::string, int> index;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    if (line.front() == '#') {
      auto body = text::trim(std::string_view(line).substr(1));
      auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      std::string key(text::trim(body.substr(0, eq)));
      std::string value(text::trim(body.substr(eq + 1)));
      if (key == "M") {
        declared_m = static_cast<int>(text::to_long(value).value_or(0));
      } else if (key == "valid_from") {
        // recomputed from the NA prefix below
      } else if (provenance) {
        provenance->emplace_back(key, value);
      }
      continue;
    }
    auto f = text::split(line);
    if (!header) {
      if (f.size() != 3 || f[0] != "date" || f[1] != "location_id" || f[2] != "state")
        throw FormatError("events header must be date,location_id,state");
      header = true;
      continue;
    }
    if (f.size() != 3) throw ParseError("events line " + std::to_string(lineno) + ": expected 3 fields", lineno);
    Date d;
    try {
      d = Date::parse(f[0]);
    } catch (const FormatError&) {
      throw ParseError("events line " + std::to_string(lineno) + ": bad date", lineno);
    }
    int state = EventSequence::kUnavailable;
    if (f[2] != "NA") {
      auto v = text::to_long(f[2]);
      if (!v || *v < 0) throw ParseError("events line " + std::to_string(lineno) + ": bad state", lineno);
      state = static_cast<int>(*v);
    }
    if (dates.empty() || dates.back() != d) {
      if (!dates.empty() && d - dates.back() != 1)
        throw ParseError("events line " + std::to_string(lineno) + ": dates must be consecutive", lineno);
      dates.push_back(d);
      rows.emplace_back();
    }
    auto [it, inserted] = index.emplace(f[1], static_cast<int>(index.size()));
    if (inserted) {
      if (dates.size() > 1) throw ParseError("location '" + f[1] + "' appears late", lineno);
      ev.location_ids.push_back(f[1]);
    }
    auto& row = rows.back();
    if (it->second != static_cast<int>(row.size()))
      throw ParseError("events line " + std::to_string(lineno) + ": locations out of order", lineno);
    row.push_back(state);
  }
  if (rows.empty()) throw FormatError("events file has no rows");
  const int K = static_cast<int>(ev.location_ids.size());
  ev.states.resize(static_cast<int>(rows.size()), K);
  int max_state = 1;
  for (size_t t = 0; t < rows.size(); ++t) {
    if (static_cast<int>(rows[t].size()) != K) throw FormatError("day " + dates[t].str() + " is missing locations");
    for (int k = 0; k < K; ++k) {
      ev.states(t, k) = rows[t][k];
      max_state = std::max(max_state, rows[t][k]);
    }
  }
  ev.start_date = dates.front();
  ev.M = declared_m > 0 ? declared_m : max_state;
  ev.valid_from = 0;
  while (ev.valid_from < ev.days() && ev.states(ev.valid_from, 0) == EventSequence::kUnavailable)
    ++ev.valid_from;
  ev.validate();
  return ev;
}

EventSequence slice_events(const EventSequence& events, const DateRange& range) {
  long first = std::max(0L, range.first - events.start_date);
  long last = std::min<long>(events.days() - 1, range.last - events.start_date);
  if (first > last) throw EmptySliceError("date range does not intersect the event sequence");
  EventSequence out = events;
  out.start_date = events.start_date + first;
  out.states = events.states.middleRows(first, last - first + 1);
  out.valid_from = static_cast<int>(std::max(0L, events.valid_from - first));
  out.valid_from = std::min(out.valid_from, out.days());
  return out;
}

EventSequence collapse_states(const EventSequence& events) {
  EventSequence out = events;
  out.M = 1;
  out.states = events.states.unaryExpr([](int s) { return s > 0 ? 1 : s; });
  return out;
}

}  // namespace ramp
