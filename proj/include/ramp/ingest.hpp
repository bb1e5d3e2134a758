#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ramp/date.hpp"

namespace ramp {

struct SensorMeta {
  std::string id;
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees
};

// One location's irradiance readings grouped into whole days: row t is day
// start_date + t, column j is the j-th reading of that day.
struct RadiationSeries {
  SensorMeta meta;
  Date start_date;
  int n = 0;                         // readings per day
  Eigen::MatrixXd ghi;               // T x n, W/m^2
  std::optional<Eigen::MatrixXd> dni;     // W/m^2
  std::optional<Eigen::MatrixXd> dhi;     // W/m^2
  std::optional<Eigen::MatrixXd> zenith;  // degrees

  int days() const { return static_cast<int>(ghi.rows()); }
  Date date_of(int t) const { return start_date + t; }
  bool has_aux() const { return dni && dhi && zenith; }
};

// Aligned collection of series; every member shares T, n and start_date.
struct Dataset {
  std::vector<RadiationSeries> series;

  int locations() const { return static_cast<int>(series.size()); }
  int days() const { return series.empty() ? 0 : series.front().days(); }
  int readings_per_day() const { return series.empty() ? 0 : series.front().n; }
  Date start_date() const { return series.empty() ? Date{} : series.front().start_date; }
  std::vector<std::string> ids() const;
};

// Checks invariants and returns the dataset; throws ValidationError otherwise.
Dataset make_dataset(std::vector<RadiationSeries> series);

// Names of the source columns. Timestamps come either from the NSRDB
// Year/Month/Day/Hour/Minute columns or from one ISO-8601 column.
struct ColumnMap {
  std::string year = "Year";
  std::string month = "Month";
  std::string day = "Day";
  std::string hour = "Hour";
  std::string minute = "Minute";
  std::string timestamp;  // when set, takes precedence over the split columns
  std::string ghi = "GHI";
  std::string dni = "DNI";
  std::string dhi = "DHI";
  std::string zenith = "Solar Zenith Angle";
  int readings_per_day = 0;  // 0: infer from the most common day length
};

RadiationSeries parse_nsrdb(std::istream& in, const ColumnMap& columns, SensorMeta meta = {});
RadiationSeries parse_nsrdb(const std::filesystem::path& path, const ColumnMap& columns,
                            SensorMeta meta = {});

// ghi - (dni * cos(zenith) + dhi)
double validate_ghi(double ghi, double dni, double dhi, double zenith_deg);

struct GhiResidual {
  std::string location_id;
  Date date;
  int slot = 0;
  double residual = 0.0;
};

// Readings whose GHI identity residual exceeds tol in absolute value.
std::vector<GhiResidual> check_ghi_identity(const Dataset& data, double tol);

RadiationSeries daily_average(const RadiationSeries& series);
Dataset daily_average(const Dataset& data);

// Restricts every series to days inside range (inclusive).
Dataset seasonal_slice(const Dataset& data, const DateRange& range);

struct ManifestEntry {
  SensorMeta meta;
  std::filesystem::path file;
};

// Key-value manifest:
//   readings_per_day = 48
//   column.ghi = GHI
//   location = ATL01, 33.749, -84.388, atl01.csv
struct Manifest {
  ColumnMap columns;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::filesystem::path& path);
Dataset load_dataset(const Manifest& manifest);

// Canonical dump: location_id,date,slot,ghi[,dni,dhi,zenith] preceded by
// "# location,<id>,<lat>,<lon>" lines. Values print in shortest round-trip form.
void write_dataset_csv(const Dataset& data, std::ostream& out);
Dataset read_dataset_csv(std::istream& in);

}  // namespace ramp
