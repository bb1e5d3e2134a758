#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ramp/cli.hpp"
#include "ramp/config.hpp"
#include "ramp/error.hpp"
#include "ramp/events.hpp"
#include "ramp/model.hpp"
#include "ramp/text.hpp"
#include "support.hpp"

using namespace ramp;
namespace fs = std::filesystem;

namespace {

const fs::path kData = RAMP_TEST_DATA;

struct Run {
  int code = -1;
  std::string out, err;
};

Run ramp_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(testing::read_file(p)); }

EventSequence read_events(const fs::path& p) {
  std::ifstream in(p);
  return read_events_csv(in);
}

// Golden matrices are "date,id,..." with NA before the first full window.
Eigen::MatrixXi read_golden(const fs::path& p) {
  std::istringstream in(testing::read_file(p));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    const auto f = text::split(line);
    std::vector<int> row;
    for (size_t i = 1; i < f.size(); ++i) row.push_back(f[i] == "NA" ? EventSequence::kUnavailable : std::stoi(f[i]));
    rows.push_back(row);
  }
  Eigen::MatrixXi m(rows.size(), rows.front().size());
  for (size_t t = 0; t < rows.size(); ++t)
    for (size_t k = 0; k < rows[t].size(); ++k) m(t, k) = rows[t][k];
  return m;
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p) << body; }

std::string simple_params(double b0, double b1, double w) {
  SingleStateParams p(2, 1);
  p.birthrate << b0, b1;
  p.inter(1, 1, 0) = w;
  return params_to_json(p, {"A", "B"}).dump();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("extraction reproduces the reference goldens") {
    const std::string manifest = (kData / "manifest.txt").string();
    struct Case {
      const char* golden;
      std::vector<std::string> flags;
    };
    const std::vector<Case> cases = {
        {"golden_intra_w7_d10.csv", {"--w1", "7", "--delta", "0.1", "--frac", "0.2"}},
        {"golden_intra_w10_d20_two.csv", {"--w1", "10", "--delta", "0.2", "--frac", "0.3", "--states", "2"}},
        {"golden_daily_w5_d10_two.csv", {"--w1", "5", "--delta", "0.1", "--states", "2", "--mode", "daily-average"}},
    };
    testing::ScratchDir dir("cli_extract");
    for (const auto& c : cases) {
      CAPTURE(c.golden);
      std::vector<std::string> args{"extract", "--manifest", manifest, "--out", dir.str("ev.csv")};
      args.insert(args.end(), c.flags.begin(), c.flags.end());
      const Run r = ramp_cli(args);
      REQUIRE(r.code == kExitOk);
      const EventSequence ev = read_events(dir.path() / "ev.csv");
      CHECK(ev.states == read_golden(kData / c.golden));
      CHECK(ev.location_ids == std::vector<std::string>{"S0", "S1", "S2"});
      CHECK(ev.start_date == Date(2019, 5, 1));

      const std::string first = testing::read_file(dir.path() / "ev.csv");
      REQUIRE(ramp_cli(args).code == kExitOk);
      CHECK(testing::read_file(dir.path() / "ev.csv") == first);
    }
  }

  TEST_CASE("extraction errors exit with the invalid-input code") {
    const std::string manifest = (kData / "manifest.txt").string();
    testing::ScratchDir dir("cli_extract_err");
    const Run empty = ramp_cli({"extract", "--manifest", manifest, "--from", "2021-01-01", "--to", "2021-02-01",
                                "--out", dir.str("ev.csv")});
    CHECK(empty.code == kExitInvalid);
    CHECK(empty.err.find("error:") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.path() / "ev.csv"));
    CHECK(ramp_cli({"extract", "--manifest", manifest, "--w1", "60"}).code == kExitInvalid);
    CHECK(ramp_cli({"extract", "--manifest", manifest, "--delta", "0.7"}).code == kExitInvalid);
    CHECK(ramp_cli({"extract", "--manifest", dir.str("missing.txt")}).code == kExitInvalid);
    CHECK(ramp_cli({"extract", "--bogus", "1"}).code == kExitInvalid);
    CHECK(ramp_cli({"frobnicate"}).code == kExitInvalid);
  }

  TEST_CASE("the installed binary reports exit codes") {
    const std::string bin = RAMP_BINARY;
    CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
    const int rc = std::system((bin + " bound > /dev/null 2>&1").c_str());
    REQUIRE(WIFEXITED(rc));
    CHECK(WEXITSTATUS(rc) == kExitInvalid);
  }

  TEST_CASE("simulation") {
    testing::ScratchDir dir("cli_sim");
    write(dir.path() / "zero.json", simple_params(0.0, 0.0, 0.0));
    REQUIRE(ramp_cli({"simulate", "--params", dir.str("zero.json"), "--T", "200", "--out", dir.str("z.csv")}).code ==
            kExitOk);
    const EventSequence z = read_events(dir.path() / "z.csv");
    CHECK(z.days() == 200);
    CHECK(z.states.maxCoeff() == 0);
    CHECK(z.location_ids == std::vector<std::string>{"A", "B"});

    write(dir.path() / "p.json", simple_params(0.3, 0.1, 0.5));
    for (const char* name : {"a.csv", "b.csv"})
      REQUIRE(ramp_cli({"simulate", "--params", dir.str("p.json"), "--T", "20000", "--seed", "5", "--out",
                        dir.str(name)})
                  .code == kExitOk);
    // The provenance comments hash the output path, so only the body must match.
    CHECK(testing::strip_comments(testing::read_file(dir.path() / "a.csv")) ==
          testing::strip_comments(testing::read_file(dir.path() / "b.csv")));

    // Location A is Bernoulli(0.3); B fires with 0.6 after an event at A and
    // 0.1 otherwise.
    const EventSequence ev = read_events(dir.path() / "a.csv");
    long a = 0, after = 0, b_after = 0, b_quiet = 0;
    for (int t = 1; t < ev.days(); ++t) {
      a += ev.states(t, 0);
      if (ev.states(t - 1, 0)) {
        ++after;
        b_after += ev.states(t, 1);
      } else {
        b_quiet += ev.states(t, 1);
      }
    }
    const double n = ev.days() - 1;
    CHECK(std::abs(a / n - 0.3) <= 4 * std::sqrt(0.3 * 0.7 / n));
    CHECK(std::abs(double(b_after) / after - 0.6) <= 4 * std::sqrt(0.24 / after));
    CHECK(std::abs(double(b_quiet) / (n - after) - 0.1) <= 4 * std::sqrt(0.09 / (n - after)));
  }

  TEST_CASE("fit, predict and bound on simulated events") {
    testing::ScratchDir dir("cli_fit");
    write(dir.path() / "p.json", simple_params(0.3, 0.1, 0.5));
    REQUIRE(ramp_cli({"simulate", "--params", dir.str("p.json"), "--T", "730", "--seed", "3", "--start",
                      "2017-01-01", "--out", dir.str("ev.csv")})
                .code == kExitOk);
    const Run f = ramp_cli({"fit", "--events", dir.str("ev.csv"), "--d", "2", "--bootstrap", "10", "--seed", "1",
                            "--out", dir.str("fit")});
    REQUIRE(f.code == kExitOk);
    const auto report = read_json(dir.path() / "fit" / "fit_report.json");
    CHECK(report["schema_version"] == kSchemaVersion);
    CHECK(report["config_hash"].get<std::string>().size() == 16);
    CHECK(report["bounds"].size() == 3);
    CHECK(report["dims"]["kappa"] == 2 + 2 * 4);
    CHECK(report["bootstrap"]["se"].size() == 10);
    const auto graph = read_json(dir.path() / "fit" / "graph.json");
    CHECK(graph["edges"].size() == 2 * 2 * 2);

    const Run seasons = ramp_cli({"fit", "--events", dir.str("ev.csv"), "--d", "1", "--season",
                                  "2017-01-01:2017-06-30", "--season", "2018-01-01:2018-06-30", "--out",
                                  dir.str("seasons")});
    REQUIRE(seasons.code == kExitOk);
    CHECK(fs::exists(dir.path() / "seasons" / "fit_report_2017-01-01_2017-06-30.json"));
    CHECK(read_json(dir.path() / "seasons" / "graph_2018-01-01_2018-06-30.json")["edges"].size() == 4);

    const std::string rep = (dir.path() / "fit" / "fit_report.json").string();
    const Run all = ramp_cli({"predict", "--events", dir.str("ev.csv"), "--fit", rep, "--tau", "0", "--out",
                              dir.str("tau0")});
    REQUIRE(all.code == kExitOk);
    CHECK(read_json(dir.path() / "tau0" / "metrics.json")["micro"]["recall"] == 1.0);

    const Run dyn = ramp_cli({"predict", "--events", dir.str("ev.csv"), "--fit", rep, "--policy", "dynamic",
                              "--from", "2018-01-01", "--out", dir.str("dyn")});
    REQUIRE(dyn.code == kExitOk);
    const auto metrics = read_json(dir.path() / "dyn" / "metrics.json");
    CHECK(metrics["predict_from"] == "2018-01-01");
    // F1 recomputed from the prediction file.
    std::istringstream csv(testing::strip_comments(testing::read_file(dir.path() / "dyn" / "predictions.csv")));
    std::string line;
    std::getline(csv, line);
    const auto header = text::split(line);
    CHECK(header.back() == "truth");
    CHECK(header.size() == 2 + 4 + 2);
    long tp = 0, fp = 0, fn = 0, rows = 0;
    bool ci_ok = true;
    while (std::getline(csv, line)) {
      const auto f = text::split(line);
      const int dec = std::stoi(f[f.size() - 2]), truth = std::stoi(f.back());
      tp += dec && truth;
      fp += dec && !truth;
      fn += !dec && truth;
      ci_ok = ci_ok && std::stod(f[3]) <= std::stod(f[2]) && std::stod(f[2]) <= std::stod(f[4]);
      ++rows;
    }
    CHECK(ci_ok);
    CHECK(rows == metrics["records"]);
    CHECK(metrics["micro"]["tp"] == tp);
    CHECK(metrics["micro"]["f1"].get<double>() == doctest::Approx(tp ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0));
    CHECK(metrics["per_location"].size() == 2);

    const std::string first = testing::read_file(dir.path() / "dyn" / "predictions.csv");
    REQUIRE(ramp_cli({"predict", "--events", dir.str("ev.csv"), "--fit", rep, "--policy", "dynamic", "--from",
                      "2018-01-01", "--out", dir.str("dyn")})
                .code == kExitOk);
    CHECK(testing::read_file(dir.path() / "dyn" / "predictions.csv") == first);
    CHECK(first.rfind("# config_hash=", 0) == 0);

    CHECK(ramp_cli({"predict", "--events", dir.str("ev.csv"), "--fit", rep, "--tau", "1.5"}).code == kExitInvalid);

    const Run b = ramp_cli({"bound", "--events", dir.str("ev.csv"), "--d", "2", "--out", dir.str("b.json")});
    REQUIRE(b.code == kExitOk);
    const auto bound = read_json(dir.path() / "b.json");
    CHECK(bound["thetas"]["theta_2"].get<double>() ==
          doctest::Approx(report["thetas"]["theta_2"].get<double>()).epsilon(1e-12));
    CHECK(bound["kappa"] == 10);
    CHECK(bound["N"] == 728);
  }

  TEST_CASE("non-convergence exits with its own code") {
    testing::ScratchDir dir("cli_nc");
    write(dir.path() / "p.json", simple_params(0.3, 0.1, 0.5));
    REQUIRE(ramp_cli({"simulate", "--params", dir.str("p.json"), "--T", "300", "--out", dir.str("ev.csv")}).code ==
            kExitOk);
    const Run r = ramp_cli({"fit", "--events", dir.str("ev.csv"), "--d", "2", "--objective", "ml", "--max-iter", "1",
                            "--out", dir.str("fit")});
    CHECK(r.code == kExitNoConvergence);
    CHECK(r.out.find("warning:") != std::string::npos);
    CHECK(fs::exists(dir.path() / "fit" / "fit_report.json"));
  }

  TEST_CASE("bounds from matrices and given condition numbers") {
    testing::ScratchDir dir("cli_bound");
    write(dir.path() / "id.txt", "1 0 0\n0 1 0\n0 0 1\n");
    REQUIRE(ramp_cli({"bound", "--matrix", dir.str("id.txt"), "--out", dir.str("id.json")}).code == kExitOk);
    const auto id = read_json(dir.path() / "id.json");
    CHECK(id["thetas"]["theta_2"].get<double>() == doctest::Approx(1.0));
    CHECK(id["thetas"]["theta_inf"].get<double>() == doctest::Approx(1.0));

    write(dir.path() / "two.txt", "# symmetric\n2,1\n1,2\n");
    REQUIRE(ramp_cli({"bound", "--matrix", dir.str("two.txt"), "--kappa", "2", "--N", "100", "--out",
                      dir.str("two.json")})
                .code == kExitOk);
    const auto two = read_json(dir.path() / "two.json");
    CHECK(two["thetas"]["theta_1"].get<double>() == doctest::Approx(0.5));
    CHECK(two["thetas"]["theta_inf"].get<double>() == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(two["bounds"].size() == 3);

    REQUIRE(ramp_cli({"bound", "--thetas", "9e-5,0.00668,0.29315", "--kappa", "819", "--N", "365", "--out",
                      dir.str("atl.json")})
                .code == kExitOk);
    const auto atl = read_json(dir.path() / "atl.json");
    const double ratio = atl["bounds"][0]["value"].get<double>() / atl["bounds"][1]["value"].get<double>();
    CHECK(ratio == doctest::Approx(24.53408 / 2.84776).epsilon(1e-3));
    CHECK(atl["bounds"][2]["value"].get<double>() == doctest::Approx(24.171533054888524).epsilon(1e-12));

    write(dir.path() / "bad.txt", "1 2\n3 1\n");
    CHECK(ramp_cli({"bound", "--matrix", dir.str("bad.txt")}).code == kExitInvalid);
    REQUIRE(ramp_cli({"bound", "--thetas", "0,0.1,0.1", "--kappa", "6", "--N", "10", "--out", dir.str("z.json")})
                .code == kExitOk);
    CHECK(read_json(dir.path() / "z.json")["bounds"][0]["value"] == "inf");
  }

  TEST_CASE("config files and hashing") {
    const Config c = Config::parse("# run\nw1 = 30\ndelta=0.05  # level\n\nmode = daily-average\n");
    CHECK(c.integer("w1", 0) == 30);
    CHECK(c.num("delta", 0) == 0.05);
    CHECK(c.str("mode") == "daily-average");
    CHECK_FALSE(c.has("frac"));
    CHECK_THROWS_AS(c.num("mode", 0), ValidationError);

    // FNV-1a 64 of the empty string, then of "a=1\n".
    CHECK(Config{}.hash() == 0xcbf29ce484222325ULL);
    Config a;
    a.set("a", "1");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : std::string("a=1\n")) h = (h ^ ch) * 0x100000001b3ULL;
    CHECK(a.hash() == h);

    Config x, y;
    x.set("w1", "30");
    x.set("delta", "0.05");
    y.set("delta", "0.05");
    y.set("w1", "30");
    CHECK(x.hash_hex() == y.hash_hex());
    y.set("w1", "31");
    CHECK(x.hash_hex() != y.hash_hex());

    testing::ScratchDir dir("cli_cfg");
    write(dir.path() / "run.cfg", "w1 = 7\ndelta = 0.1\nfrac = 0.2\n");
    const std::string manifest = (kData / "manifest.txt").string();
    REQUIRE(ramp_cli({"extract", "--config", dir.str("run.cfg"), "--manifest", manifest, "--out", dir.str("a.csv")})
                .code == kExitOk);
    CHECK(read_events(dir.path() / "a.csv").states == read_golden(kData / "golden_intra_w7_d10.csv"));
    // Flags override the file.
    REQUIRE(ramp_cli({"extract", "--config", dir.str("run.cfg"), "--w1", "10", "--manifest", manifest, "--out",
                      dir.str("b.csv")})
                .code == kExitOk);
    CHECK(read_events(dir.path() / "b.csv").valid_from == 10);
  }
}
