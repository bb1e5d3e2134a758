#include "ramp/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "ramp/error.hpp"
#include "ramp/text.hpp"

namespace ramp {

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(s.meta.id);
  return out;
}

Dataset make_dataset(std::vector<RadiationSeries> series) {
  if (series.empty()) throw ValidationError("dataset needs at least one location");
  std::set<std::string> seen;
  const auto& first = series.front();
  for (const auto& s : series) {
    if (!seen.insert(s.meta.id).second) throw ValidationError("duplicate location id '" + s.meta.id + "'");
    if (s.meta.latitude < -90.0 || s.meta.latitude > 90.0)
      throw ValidationError("latitude out of range for '" + s.meta.id + "'");
    if (s.meta.longitude < -180.0 || s.meta.longitude > 180.0)
      throw ValidationError("longitude out of range for '" + s.meta.id + "'");
    if (s.n < 1 || s.days() < 1 || s.ghi.cols() != s.n)
      throw ValidationError("series '" + s.meta.id + "' is empty or malformed");
    if (s.days() != first.days() || s.n != first.n || s.start_date != first.start_date)
      throw ValidationError("series '" + s.meta.id + "' is not aligned with '" + first.meta.id + "'");
    if ((s.ghi.array() < 0.0).any()) throw ValidationError("negative GHI in '" + s.meta.id + "'");
  }
  return Dataset{std::move(series)};
}

namespace {

struct Row {
  Date date;
  int minute_of_day;
  long line;
  double ghi, dni, dhi, zenith;
};

int find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

double cell(const std::vector<std::string>& fields, int col, long line, const std::string& name) {
  if (col >= static_cast<int>(fields.size()))
    throw ParseError("row " + std::to_string(line) + ": missing value for " + name, line);
  auto v = text::to_double(fields[col]);
  if (!v)
    throw ParseError("row " + std::to_string(line) + ": non-numeric " + name + " '" + fields[col] + "'",
                     line);
  return *v;
}

// "YYYY-MM-DD[T ]HH:MM[:SS][...]"
std::pair<Date, int> parse_iso(const std::string& s, long line) {
  try {
    auto sep = s.find_first_of("T ");
    Date d = Date::parse(s.substr(0, sep));
    int minutes = 0;
    if (sep != std::string::npos) {
      auto hh = text::to_long(s.substr(sep + 1, 2));
      auto mm = text::to_long(s.substr(sep + 4, 2));
      if (!hh || !mm || s.size() < sep + 6 || s[sep + 3] != ':') throw FormatError("time");
      minutes = static_cast<int>(*hh * 60 + *mm);
    }
    return {d, minutes};
  } catch (const FormatError&) {
    throw ParseError("row " + std::to_string(line) + ": bad timestamp '" + s + "'", line);
  }
}

}  // namespace

RadiationSeries parse_nsrdb(std::istream& in, const ColumnMap& columns, SensorMeta meta) {
  std::string line;
  long lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!text::trim(line).empty()) return true;
    }
    return false;
  };

  if (!next()) throw FormatError("empty radiation file");
  auto header = text::split(line);
  // NSRDB downloads start with a metadata header/value pair.
  if (!header.empty() && header.front() == "Source") {
    auto keys = header;
    if (!next()) throw FormatError("truncated NSRDB metadata block");
    auto values = text::split(line);
    auto lookup = [&](const char* key) -> std::optional<std::string> {
      int c = find_column(keys, key);
      if (c < 0 || c >= static_cast<int>(values.size())) return std::nullopt;
      return values[c];
    };
    if (meta.id.empty())
      if (auto v = lookup("Location ID")) meta.id = *v;
    if (meta.latitude == 0.0)
      if (auto v = lookup("Latitude"); v && text::to_double(*v)) meta.latitude = *text::to_double(*v);
    if (meta.longitude == 0.0)
      if (auto v = lookup("Longitude"); v && text::to_double(*v)) meta.longitude = *text::to_double(*v);
    if (!next()) throw FormatError("missing column header");
    header = text::split(line);
  }

  auto require = [&](const std::string& name) {
    int c = find_column(header, name);
    if (c < 0) throw FormatError("missing column '" + name + "'");
    return c;
  };
  const bool iso = !columns.timestamp.empty() && find_column(header, columns.timestamp) >= 0;
  int c_ts = -1, c_year = -1, c_month = -1, c_day = -1, c_hour = -1, c_minute = -1;
  if (iso) {
    c_ts = require(columns.timestamp);
  } else {
    if (!columns.timestamp.empty() && find_column(header, columns.year) < 0)
      throw FormatError("missing column '" + columns.timestamp + "'");
    c_year = require(columns.year);
    c_month = require(columns.month);
    c_day = require(columns.day);
    c_hour = require(columns.hour);
    c_minute = find_column(header, columns.minute);
  }
  const int c_ghi = require(columns.ghi);
  const int c_dni = find_column(header, columns.dni);
  const int c_dhi = find_column(header, columns.dhi);
  const int c_zen = find_column(header, columns.zenith);
  const bool aux = c_dni >= 0 && c_dhi >= 0 && c_zen >= 0;

  std::vector<Row> rows;
  while (next()) {
    auto f = text::split(line);
    Row r{};
    r.line = lineno;
    if (iso) {
      if (c_ts >= static_cast<int>(f.size()))
        throw ParseError("row " + std::to_string(lineno) + ": missing timestamp", lineno);
      std::tie(r.date, r.minute_of_day) = parse_iso(f[c_ts], lineno);
    } else {
      double y = cell(f, c_year, lineno, columns.year);
      double mo = cell(f, c_month, lineno, columns.month);
      double d = cell(f, c_day, lineno, columns.day);
      double h = cell(f, c_hour, lineno, columns.hour);
      double mi = c_minute >= 0 ? cell(f, c_minute, lineno, columns.minute) : 0.0;
      try {
        r.date = Date(static_cast<int>(y), static_cast<unsigned>(mo), static_cast<unsigned>(d));
      } catch (const FormatError&) {
        throw ParseError("row " + std::to_string(lineno) + ": invalid date", lineno);
      }
      r.minute_of_day = static_cast<int>(h * 60 + mi);
    }
    r.ghi = cell(f, c_ghi, lineno, columns.ghi);
    if (r.ghi < 0.0)
      throw ParseError("row " + std::to_string(lineno) + ": negative GHI", lineno);
    if (aux) {
      r.dni = cell(f, c_dni, lineno, columns.dni);
      r.dhi = cell(f, c_dhi, lineno, columns.dhi);
      r.zenith = cell(f, c_zen, lineno, columns.zenith);
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw FormatError("radiation file has no data rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.date != b.date ? a.date < b.date : a.minute_of_day < b.minute_of_day;
  });

  // Day boundaries in sorted order.
  std::vector<std::pair<size_t, size_t>> days;
  for (size_t i = 0; i < rows.size();) {
    size_t j = i;
    while (j < rows.size() && rows[j].date == rows[i].date) ++j;
    if (!days.empty() && rows[i].date - rows[days.back().first].date != 1)
      throw RaggedDayError("missing day before " + rows[i].date.str(), rows[i].date.str());
    days.emplace_back(i, j);
    i = j;
  }

  int n = columns.readings_per_day;
  if (n <= 0) {
    std::map<size_t, int> freq;
    for (auto [b, e] : days) ++freq[e - b];
    n = static_cast<int>(std::max_element(freq.begin(), freq.end(), [](auto& a, auto& b) {
                           return a.second != b.second ? a.second < b.second : a.first < b.first;
                         })->first);
  }
  for (auto [b, e] : days) {
    if (static_cast<int>(e - b) != n) {
      auto d = rows[b].date.str();
      throw RaggedDayError("day " + d + " has " + std::to_string(e - b) + " readings, expected " +
                               std::to_string(n),
                           d);
    }
  }

  const int T = static_cast<int>(days.size());
  RadiationSeries s;
  s.meta = std::move(meta);
  s.start_date = rows.front().date;
  s.n = n;
  s.ghi.resize(T, n);
  if (aux) {
    s.dni = Eigen::MatrixXd(T, n);
    s.dhi = Eigen::MatrixXd(T, n);
    s.zenith = Eigen::MatrixXd(T, n);
  }
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < n; ++j) {
      const Row& r = rows[days[t].first + j];
      s.ghi(t, j) = r.ghi;
      if (aux) {
        (*s.dni)(t, j) = r.dni;
        (*s.dhi)(t, j) = r.dhi;
        (*s.zenith)(t, j) = r.zenith;
      }
    }
  }
  return s;
}

RadiationSeries parse_nsrdb(const std::filesystem::path& path, const ColumnMap& columns, SensorMeta meta) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return parse_nsrdb(in, columns, std::move(meta));
}

double validate_ghi(double ghi, double dni, double dhi, double zenith_deg) {
  const double rad = zenith_deg * std::numbers::pi / 180.0;
  return ghi - (dni * std::cos(rad) + dhi);
}

std::vector<GhiResidual> check_ghi_identity(const Dataset& data, double tol) {
  std::vector<GhiResidual> out;
  for (const auto& s : data.series) {
    if (!s.has_aux()) continue;
    for (int t = 0; t < s.days(); ++t)
      for (int j = 0; j < s.n; ++j) {
        double r = validate_ghi(s.ghi(t, j), (*s.dni)(t, j), (*s.dhi)(t, j), (*s.zenith)(t, j));
        if (std::abs(r) > tol) out.push_back({s.meta.id, s.date_of(t), j, r});
      }
  }
  return out;
}

RadiationSeries daily_average(const RadiationSeries& series) {
  RadiationSeries out;
  out.meta = series.meta;
  out.start_date = series.start_date;
  out.n = 1;
  out.ghi = series.ghi.rowwise().mean();
  if (series.has_aux()) {
    out.dni = Eigen::MatrixXd(series.dni->rowwise().mean());
    out.dhi = Eigen::MatrixXd(series.dhi->rowwise().mean());
    out.zenith = Eigen::MatrixXd(series.zenith->rowwise().mean());
  }
  return out;
}

Dataset daily_average(const Dataset& data) {
  Dataset out;
  for (const auto& s : data.series) out.series.push_back(daily_average(s));
  return out;
}

Dataset seasonal_slice(const Dataset& data, const DateRange& range) {
  if (data.series.empty()) throw EmptySliceError("empty dataset");
  const Date start = data.start_date();
  const long T = data.days();
  long first = std::max(0L, range.first - start);
  long last = std::min(T - 1, range.last - start);
  if (first > last)
    throw EmptySliceError("date range " + range.first.str() + ":" + range.last.str() +
                          " does not intersect the dataset");
  const int len = static_cast<int>(last - first + 1);
  Dataset out;
  for (const auto& s : data.series) {
    RadiationSeries r;
    r.meta = s.meta;
    r.start_date = start + first;
    r.n = s.n;
    r.ghi = s.ghi.middleRows(first, len);
    if (s.has_aux()) {
      r.dni = Eigen::MatrixXd(s.dni->middleRows(first, len));
      r.dhi = Eigen::MatrixXd(s.dhi->middleRows(first, len));
      r.zenith = Eigen::MatrixXd(s.zenith->middleRows(first, len));
    }
    out.series.push_back(std::move(r));
  }
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  Manifest m;
  const auto base = path.parent_path();
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = text::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("manifest line " + std::to_string(lineno) + ": expected key = value", lineno);
    std::string key(text::trim(body.substr(0, eq)));
    std::string value(text::trim(body.substr(eq + 1)));
    if (key == "location") {
      auto f = text::split(value);
      if (f.size() != 4)
        throw ParseError("manifest line " + std::to_string(lineno) + ": location = id, lat, lon, file",
                         lineno);
      auto lat = text::to_double(f[1]);
      auto lon = text::to_double(f[2]);
      if (!lat || !lon) throw ParseError("manifest line " + std::to_string(lineno) + ": bad coordinates", lineno);
      std::filesystem::path file(f[3]);
      if (file.is_relative()) file = base / file;
      m.entries.push_back({SensorMeta{f[0], *lat, *lon}, file});
    } else if (key == "readings_per_day") {
      auto v = text::to_long(value);
      if (!v || *v < 1) throw ParseError("manifest line " + std::to_string(lineno) + ": bad readings_per_day", lineno);
      m.columns.readings_per_day = static_cast<int>(*v);
    } else if (key.rfind("column.", 0) == 0) {
      auto which = key.substr(7);
      auto& c = m.columns;
      std::map<std::string, std::string*> slots{{"year", &c.year},     {"month", &c.month},
                                                {"day", &c.day},       {"hour", &c.hour},
                                                {"minute", &c.minute}, {"timestamp", &c.timestamp},
                                                {"ghi", &c.ghi},       {"dni", &c.dni},
                                                {"dhi", &c.dhi},       {"zenith", &c.zenith}};
      auto it = slots.find(which);
      if (it == slots.end())
        throw ParseError("manifest line " + std::to_string(lineno) + ": unknown column key " + key, lineno);
      *it->second = value;
    } else {
      throw ParseError("manifest line " + std::to_string(lineno) + ": unknown key " + key, lineno);
    }
  }
  if (m.entries.empty()) throw FormatError("manifest lists no locations");
  return m;
}

Dataset load_dataset(const Manifest& manifest) {
  std::vector<RadiationSeries> series(manifest.entries.size());
  // Files are independent; errors are collected and rethrown in manifest order.
  std::vector<std::exception_ptr> errors(manifest.entries.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) {
    try {
      series[i] = parse_nsrdb(manifest.entries[i].file, manifest.columns, manifest.entries[i].meta);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return make_dataset(std::move(series));
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  for (const auto& s : data.series)
    out << "# location," << s.meta.id << ',' << text::shortest(s.meta.latitude) << ','
        << text::shortest(s.meta.longitude) << '\n';
  const bool aux = !data.series.empty() &&
                   std::all_of(data.series.begin(), data.series.end(),
                               [](const RadiationSeries& s) { return s.has_aux(); });
  out << "location_id,date,slot,ghi" << (aux ? ",dni,dhi,zenith" : "") << '\n';
  for (const auto& s : data.series)
    for (int t = 0; t < s.days(); ++t) {
      const std::string date = s.date_of(t).str();
      for (int j = 0; j < s.n; ++j) {
        out << s.meta.id << ',' << date << ',' << j << ',' << text::shortest(s.ghi(t, j));
        if (aux)
          out << ',' << text::shortest((*s.dni)(t, j)) << ',' << text::shortest((*s.dhi)(t, j)) << ','
              << text::shortest((*s.zenith)(t, j));
        out << '\n';
      }
    }
}

Dataset read_dataset_csv(std::istream& in) {
  std::vector<SensorMeta> metas;
  std::map<std::string, std::map<std::pair<Date, int>, std::array<double, 4>>> values;
  std::string line;
  long lineno = 0;
  bool aux = false;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    if (line.front() == '#') {
      auto f = text::split(text::trim(line.substr(1)));
      if (f.size() == 4 && f[0] == "location") {
        auto lat = text::to_double(f[2]);
        auto lon = text::to_double(f[3]);
        if (!lat || !lon) throw ParseError("bad location header on line " + std::to_string(lineno), lineno);
        metas.push_back({f[1], *lat, *lon});
      }
      continue;
    }
    auto f = text::split(line);
    if (!header_seen) {
      if (f.size() < 4 || f[0] != "location_id" || f[3] != "ghi") throw FormatError("bad dataset header");
      aux = f.size() == 7;
      header_seen = true;
      continue;
    }
    if (f.size() != (aux ? 7u : 4u)) throw ParseError("wrong field count on line " + std::to_string(lineno), lineno);
    Date d;
    try {
      d = Date::parse(f[1]);
    } catch (const FormatError&) {
      throw ParseError("bad date on line " + std::to_string(lineno), lineno);
    }
    auto slot = text::to_long(f[2]);
    if (!slot) throw ParseError("bad slot on line " + std::to_string(lineno), lineno);
    std::array<double, 4> v{};
    for (size_t c = 3; c < f.size(); ++c) {
      auto x = text::to_double(f[c]);
      if (!x) throw ParseError("non-numeric value on line " + std::to_string(lineno), lineno);
      v[c - 3] = *x;
    }
    values[f[0]][{d, static_cast<int>(*slot)}] = v;
  }
  if (metas.empty())
    for (auto& [id, _] : values) metas.push_back({id, 0.0, 0.0});

  std::vector<RadiationSeries> series;
  for (const auto& meta : metas) {
    auto it = values.find(meta.id);
    if (it == values.end()) throw FormatError("no rows for location '" + meta.id + "'");
    const auto& cells = it->second;
    RadiationSeries s;
    s.meta = meta;
    s.start_date = cells.begin()->first.first;
    int n = 0;
    for (auto& [key, _] : cells)
      if (key.first == s.start_date) ++n;
    const long T = (cells.rbegin()->first.first - s.start_date) + 1;
    if (static_cast<long>(cells.size()) != T * n)
      throw RaggedDayError("ragged day in dump for '" + meta.id + "'", "");
    s.n = n;
    s.ghi.resize(T, n);
    if (aux) {
      s.dni = Eigen::MatrixXd(T, n);
      s.dhi = Eigen::MatrixXd(T, n);
      s.zenith = Eigen::MatrixXd(T, n);
    }
    for (auto& [key, v] : cells) {
      long t = key.first - s.start_date;
      int j = key.second;
      if (j < 0 || j >= n) throw RaggedDayError("slot out of range in dump", key.first.str());
      s.ghi(t, j) = v[0];
      if (aux) {
        (*s.dni)(t, j) = v[1];
        (*s.dhi)(t, j) = v[2];
        (*s.zenith)(t, j) = v[3];
      }
    }
    series.push_back(std::move(s));
  }
  return make_dataset(std::move(series));
}

}  // namespace ramp
