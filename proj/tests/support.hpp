#pragma once

// Shared fixtures: random feasible parameters, scratch directories and a
// synthetic radiation dataset with planted anomalous days.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "ramp/ingest.hpp"
#include "ramp/model.hpp"
#include "ramp/rng.hpp"

namespace ramp::testing {

inline double uniform(Rng& rng, double a, double b) { return a + (b - a) * rng.uniform(); }

// Interactions are drawn in [-1, 1] and then shrunk until every inequality
// holds with slack margin; the shrink factor itself is random so that some
// draws sit close to the boundary.
inline SingleStateParams random_single(int K, int d, Rng& rng, double margin = 0.05) {
  SingleStateParams p(K, d);
  for (int k = 0; k < K; ++k) {
    const double b = uniform(rng, 0.25, 0.6);
    p.birthrate(k) = b;
    double neg = 0.0, pos = 0.0;
    for (int s = 1; s <= d; ++s)
      for (int l = 0; l < K; ++l) {
        const double v = uniform(rng, -1.0, 1.0);
        p.inter(s, k, l) = v;
        (v < 0 ? neg : pos) += std::abs(v);
      }
    double cap = 1.0;
    if (neg > 0) cap = std::min(cap, (b - margin) / neg);
    if (pos > 0) cap = std::min(cap, (1.0 - margin - b) / pos);
    const double shrink = cap * uniform(rng, 0.3, 0.95);
    for (int s = 1; s <= d; ++s)
      for (int l = 0; l < K; ++l) p.inter(s, k, l) *= shrink;
  }
  return p;
}

inline MultiStateParams random_multi(int K, int d, int M, Rng& rng, double margin = 0.05) {
  MultiStateParams p(K, d, M);
  for (int k = 0; k < K; ++k) {
    double total_b = 0.0;
    for (int m = 1; m <= M; ++m) {
      p.birthrate(k, m - 1) = uniform(rng, 0.1, 0.5 / M + 0.05);
      total_b += p.birthrate(k, m - 1);
    }
    for (int s = 1; s <= d; ++s)
      for (int l = 0; l < K; ++l)
        for (int m = 1; m <= M; ++m)
          for (int q = 0; q <= M; ++q) p.inter(s, k, l, m, q) = uniform(rng, -1.0, 1.0);
    // Constraint terms are positively homogeneous in the interactions.
    double up = 0.0;
    std::vector<double> low(M, 0.0);
    for (int s = 1; s <= d; ++s)
      for (int l = 0; l < K; ++l) {
        double best = 0.0;
        for (int q = 0; q <= M; ++q) {
          double col = 0.0;
          for (int m = 1; m <= M; ++m) col += p.inter(s, k, l, m, q);
          best = std::max(best, col);
        }
        up += best;
        for (int m = 1; m <= M; ++m) {
          double worst = 0.0;
          for (int q = 0; q <= M; ++q) worst = std::min(worst, p.inter(s, k, l, m, q));
          low[m - 1] -= worst;
        }
      }
    double cap = 1.0;
    if (up > 0) cap = std::min(cap, (1.0 - margin - total_b) / up);
    for (int m = 1; m <= M; ++m)
      if (low[m - 1] > 0) cap = std::min(cap, (p.birthrate(k, m - 1) - margin) / low[m - 1]);
    const double shrink = cap * uniform(rng, 0.3, 0.95);
    for (int s = 1; s <= d; ++s)
      for (int l = 0; l < K; ++l)
        for (int m = 1; m <= M; ++m)
          for (int q = 0; q <= M; ++q) p.inter(s, k, l, m, q) *= shrink;
  }
  return p;
}

inline EventSequence random_events(int T, int K, int M, Rng& rng, double rate = 0.3) {
  EventSequence ev;
  ev.M = M;
  ev.states.resize(T, K);
  for (int k = 0; k < K; ++k) ev.location_ids.push_back("L" + std::to_string(k));
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k)
      ev.states(t, k) = rng.uniform() < rate ? 1 + static_cast<int>(rng.below(M)) : 0;
  return ev;
}

inline HistoryBlock random_history(int d, int K, int M, Rng& rng) {
  HistoryBlock h(d, K);
  for (int s = 0; s < d; ++s)
    for (int l = 0; l < K; ++l) h(s, l) = static_cast<int>(rng.below(M + 1));
  return h;
}

// Fresh directory under the system temp path, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    namespace fs = std::filesystem;
    static int counter = 0;
    for (int i = 0;; ++i) {
      path_ = fs::temp_directory_path() /
              ("ramp_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
      if (fs::create_directories(path_)) break;
      if (i > 100) throw std::runtime_error("cannot create scratch directory");
    }
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = {}) const { return (leaf.empty() ? path_ : path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.empty() || line.front() != '#') out += line + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Planted anomalies. Location 0 draws high and low days at random; each
// later location copies the kind of an anomaly at its predecessor one day
// later with probability spread, and also has its own background rate.

struct PlantedData {
  Dataset data;
  Eigen::MatrixXi kind;  // T x K: 0 ordinary, 1 high, 2 low
};

inline PlantedData planted_dataset(int K, int T, int n, std::uint64_t seed, double driver_rate = 0.015,
                                   double background = 0.004, double spread = 0.7) {
  Rng rng(seed);
  PlantedData out;
  out.kind = Eigen::MatrixXi::Zero(T, K);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) {
      const double u = rng.uniform();
      const double own = k == 0 ? driver_rate : background;
      int kind = u < own ? 1 : (u < 2 * own ? 2 : 0);
      if (k > 0 && t > 0 && out.kind(t - 1, k - 1) != 0 && rng.uniform() < spread) kind = out.kind(t - 1, k - 1);
      out.kind(t, k) = kind;
    }
  std::vector<RadiationSeries> series;
  for (int k = 0; k < K; ++k) {
    RadiationSeries s;
    s.meta = {"S" + std::to_string(k), 33.7 + 0.076 * k, -84.4 + 0.076 * (k % 2)};
    s.start_date = Date(2017, 1, 1);
    s.n = n;
    s.ghi.resize(T, n);
    s.dni = Eigen::MatrixXd(T, n);
    s.dhi = Eigen::MatrixXd(T, n);
    s.zenith = Eigen::MatrixXd(T, n);
    for (int t = 0; t < T; ++t) {
      const double season = 600.0 + 250.0 * std::sin(2.0 * std::numbers::pi * (t - 80) / 365.0);
      double cloud = uniform(rng, 0.85, 0.95);
      if (out.kind(t, k) == 1) cloud = uniform(rng, 1.4, 1.6);
      if (out.kind(t, k) == 2) cloud = uniform(rng, 0.2, 0.35);
      for (int j = 0; j < n; ++j) {
        const double hour = 24.0 * (j + 0.5) / n;
        const double elev = std::sin(std::numbers::pi * (hour - 6.0) / 12.0);
        const double zen = elev > 0 ? 90.0 - 90.0 * elev : 95.0;
        const double ghi = elev > 0 ? std::round(season * elev * cloud * uniform(rng, 0.97, 1.03)) : 0.0;
        const double cz = std::cos(zen * std::numbers::pi / 180.0);
        const double dhi = cz > 0.05 ? std::round(0.3 * ghi) : ghi;
        const double dni = cz > 0.05 ? (ghi - dhi) / cz : 0.0;
        s.ghi(t, j) = ghi;
        (*s.dhi)(t, j) = dhi;
        (*s.dni)(t, j) = dni;
        (*s.zenith)(t, j) = zen;
      }
    }
    series.push_back(std::move(s));
  }
  out.data = make_dataset(std::move(series));
  return out;
}

// Writes one NSRDB-style file per location plus a manifest; returns the
// manifest path.
inline std::filesystem::path write_nsrdb_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::ofstream man(dir / "manifest.txt");
  man << "# synthetic sensors\nreadings_per_day = " << data.readings_per_day() << "\n";
  for (const auto& s : data.series) {
    const std::string file = s.meta.id + ".csv";
    man << "location = " << s.meta.id << ", " << s.meta.latitude << ", " << s.meta.longitude << ", " << file
        << "\n";
    std::ofstream out(dir / file);
    out << "Source,Location ID,Latitude,Longitude\nNSRDB," << s.meta.id << "," << s.meta.latitude << ","
        << s.meta.longitude << "\nYear,Month,Day,Hour,Minute,GHI,DNI,DHI,Solar Zenith Angle\n";
    out.precision(10);
    for (int t = 0; t < s.days(); ++t) {
      const Date date = s.date_of(t);
      for (int j = 0; j < s.n; ++j) {
        const int minute = j * (24 * 60 / s.n);
        out << date.year() << ',' << date.month() << ',' << date.day() << ',' << minute / 60 << ','
            << minute % 60 << ',' << s.ghi(t, j) << ',' << (*s.dni)(t, j) << ',' << (*s.dhi)(t, j) << ','
            << (*s.zenith)(t, j) << "\n";
      }
    }
  }
  return dir / "manifest.txt";
}

}  // namespace ramp::testing
