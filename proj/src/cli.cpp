#include "ramp/cli.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "ramp/config.hpp"
#include "ramp/error.hpp"
#include "ramp/estimate.hpp"
#include "ramp/extract.hpp"
#include "ramp/ingest.hpp"
#include "ramp/predict.hpp"
#include "ramp/text.hpp"

namespace fs = std::filesystem;

namespace ramp {

namespace {

struct Key {
  std::string name;
  std::string fallback;  // empty: unset
  std::string help;
};

// Subcommand with its option table. Every option is a string so the
// effective configuration can be hashed uniformly.
struct Command {
  std::string name;
  std::string help;
  std::vector<Key> keys;
  std::function<int(const Config&, std::ostream&)> run;
  CLI::App* app = nullptr;
  std::map<std::string, std::string> given{};
  std::vector<std::string> seasons{};
};

const std::vector<Key> kExtractionKeys = {
    {"manifest", "", "manifest of per-location irradiance files"},
    {"dataset", "", "canonical dataset CSV (alternative to --manifest)"},
    {"w1", "30", "sliding window in days"},
    {"delta", "0.0005", "quantile level"},
    {"frac", "0.5", "share of a day's readings that must leave a band"},
    {"states", "1", "1 (normal/abnormal) or 2 (normal/high/low)"},
    {"mode", "intra-day", "intra-day or daily-average"},
};

const std::vector<Key> kFitKeys = {
    {"d", "10", "memory depth in days"},
    {"objective", "ls", "ls or ml"},
    {"method", "projected-gradient", "projected-gradient or frank-wolfe"},
    {"rho", "0.001", "ML margin"},
    {"tol", "", "stationarity tolerance (default 1e-8 LS, 1e-6 ML)"},
    {"max-iter", "50000", "iteration cap per location"},
    {"epsilon", "0.1", "confidence level of the error bounds"},
};

std::vector<Key> join(std::vector<Key> a, const std::vector<Key>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ---------------------------------------------------------------------------
// Helpers

void write_text(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << body;
}

void write_json(const fs::path& path, nlohmann::json doc, const Config& cfg) {
  doc["schema_version"] = kSchemaVersion;
  doc["config_hash"] = cfg.hash_hex();
  write_text(path, doc.dump(2) + "\n");
}

std::string require(const Config& cfg, const std::string& key) {
  auto v = cfg.find(key);
  if (!v || v->empty()) throw ValidationError("missing required option --" + key);
  return *v;
}

EventSequence load_events(const Config& cfg) {
  const fs::path path = require(cfg, "events");
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open events file " + path.string());
  return read_events_csv(in);
}

Dataset load_data(const Config& cfg) {
  if (auto m = cfg.find("manifest"); m && !m->empty()) return load_dataset(read_manifest(*m));
  if (auto d = cfg.find("dataset"); d && !d->empty()) {
    std::ifstream in(*d);
    if (!in) throw ValidationError("cannot open dataset " + *d);
    return read_dataset_csv(in);
  }
  throw ValidationError("one of --manifest or --dataset is required");
}

ExtractionConfig extraction_config(const Config& cfg) {
  ExtractionConfig e;
  e.w1 = static_cast<int>(cfg.integer("w1", e.w1));
  e.delta = cfg.num("delta", e.delta);
  e.frac = cfg.num("frac", e.frac);
  e.states = static_cast<int>(cfg.integer("states", e.states));
  e.mode = parse_extract_mode(cfg.str("mode", "intra-day"));
  e.validate();
  return e;
}

FitOptions fit_options(const Config& cfg) {
  FitOptions o;
  o.solver.objective = parse_objective(cfg.str("objective", "ls"));
  o.solver.method = parse_method(cfg.str("method", "projected-gradient"));
  o.solver.rho = cfg.num("rho", o.solver.rho);
  o.solver.tol = cfg.num("tol", -1.0);
  o.solver.max_iter = static_cast<int>(cfg.integer("max-iter", o.solver.max_iter));
  o.epsilon = cfg.num("epsilon", o.epsilon);
  o.bootstrap = static_cast<int>(cfg.integer("bootstrap", 0));
  o.ci_epsilon = cfg.num("ci-epsilon", o.ci_epsilon);
  o.seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  if (!(o.solver.rho > 0.0 && o.solver.rho < 0.5)) throw ValidationError("rho must lie in (0, 0.5)");
  if (o.solver.max_iter < 1) throw ValidationError("max-iter must be positive");
  if (o.bootstrap == 1 || o.bootstrap < 0) throw ValidationError("bootstrap needs 0 or at least 2 replicates");
  return o;
}

int depth(const Config& cfg) {
  const long d = cfg.integer("d", 10);
  if (d < 1) throw ValidationError("d must be at least 1");
  return static_cast<int>(d);
}

std::vector<double> number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : text::split(s)) {
    if (f.empty()) continue;
    auto v = text::to_double(f);
    if (!v) throw ValidationError(what + ": cannot parse '" + f + "'");
    out.push_back(*v);
  }
  return out;
}

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return v > 0 ? "inf" : "-inf";
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_extract(const Config& cfg, std::ostream& out) {
  const ExtractionConfig e = extraction_config(cfg);
  Dataset data = load_data(cfg);
  const auto from = cfg.str("from"), to = cfg.str("to");
  if (!from.empty() || !to.empty()) {
    DateRange range{from.empty() ? data.start_date() : Date::parse(from),
                    to.empty() ? data.start_date() + (data.days() - 1) : Date::parse(to)};
    data = seasonal_slice(data, range);
  }
  const EventSequence ev = extract_events(data, e);
  std::ostringstream body;
  write_events_csv(ev, body,
                   {{"w1", std::to_string(e.w1)},
                    {"delta", text::shortest(e.delta)},
                    {"frac", text::shortest(e.frac)},
                    {"states", std::to_string(e.states)},
                    {"mode", to_string(e.mode)},
                    {"config_hash", cfg.hash_hex()}});
  const fs::path path = cfg.str("out", "events.csv");
  write_text(path, body.str());
  out << "wrote " << path.string() << " (" << ev.days() << " days, " << ev.locations() << " locations)\n";
  return kExitOk;
}

int cmd_simulate(const Config& cfg, std::ostream& out) {
  const fs::path pfile = require(cfg, "params");
  std::ifstream in(pfile);
  if (!in) throw ValidationError("cannot open params file " + pfile.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("params file is not valid JSON: ") + e.what());
  }
  // A fit report embeds its parameters under "params".
  if (doc.contains("params") && doc["params"].is_object()) doc = doc["params"];
  std::vector<std::string> ids;
  const ModelParams params = params_from_json(doc, &ids);
  const long T = cfg.integer("T", 365);
  if (T < 1) throw ValidationError("T must be positive");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  EventSequence ev = simulate(params, static_cast<int>(T), seed);
  if (static_cast<int>(ids.size()) == ev.locations()) ev.location_ids = ids;
  ev.start_date = Date::parse(cfg.str("start", "2000-01-01"));
  std::ostringstream body;
  write_events_csv(ev, body, {{"seed", std::to_string(seed)}, {"T", std::to_string(T)}, {"config_hash", cfg.hash_hex()}});
  const fs::path path = cfg.str("out", "events.csv");
  write_text(path, body.str());
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_fit(const Config& cfg, std::ostream& out) {
  const EventSequence events = load_events(cfg);
  const int d = depth(cfg);
  const FitOptions opts = fit_options(cfg);
  std::vector<SensorMeta> sites;
  if (auto m = cfg.find("manifest"); m && !m->empty())
    for (const auto& e : read_manifest(*m).entries) sites.push_back(e.meta);
  const fs::path dir = cfg.str("out", ".");

  std::vector<std::pair<std::string, EventSequence>> jobs;
  const auto seasons = cfg.str("season");
  if (seasons.empty()) {
    jobs.emplace_back("", events);
  } else {
    for (const auto& spec : text::split(seasons, ';')) {
      if (spec.empty()) continue;
      const DateRange range = DateRange::parse(spec);
      jobs.emplace_back("_" + range.first.str() + "_" + range.last.str(), slice_events(events, range));
    }
  }
  bool converged = true;
  for (const auto& [suffix, ev] : jobs) {
    const FitReport report = fit(ev, d, opts);
    nlohmann::json doc = fit_report_json(report);
    if (!suffix.empty()) doc["season"] = suffix.substr(1);
    write_json(dir / ("fit_report" + suffix + ".json"), doc, cfg);
    write_json(dir / ("graph" + suffix + ".json"), graph_json(report, sites), cfg);
    converged = converged && report.converged;
    out << "fit" << suffix << ": objective " << report.objective_value << ", "
        << (report.converged ? "converged" : "NOT converged") << "\n";
    for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  }
  return converged ? kExitOk : kExitNoConvergence;
}

int cmd_predict(const Config& cfg, std::ostream& out) {
  const EventSequence events = load_events(cfg);
  const fs::path rfile = require(cfg, "fit");
  std::ifstream in(rfile);
  if (!in) throw ValidationError("cannot open fit report " + rfile.string());
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fit report is not valid JSON: ") + e.what());
  }
  if (!report.contains("params")) throw FormatError("fit report lacks params");
  const ModelParams params = params_from_json(report["params"]);

  ProtocolConfig pc;
  pc.kind = parse_policy(cfg.str("policy", "static"));
  pc.alpha = cfg.num("alpha", pc.alpha);
  pc.w2 = static_cast<int>(cfg.integer("w2", pc.w2));
  pc.tune_split = cfg.num("tune-split", pc.tune_split);
  pc.grid_size = static_cast<int>(cfg.integer("grid", pc.grid_size));
  pc.tune_w2 = cfg.flag("tune-w2", false);
  if (auto tau = cfg.find("tau"); tau && !tau->empty()) {
    pc.fixed_tau = cfg.num("tau", 0.5);
    if (!(*pc.fixed_tau >= 0.0 && *pc.fixed_tau <= 1.0)) throw ValidationError("tau must lie in [0, 1]");
  }
  if (cfg.flag("ci", true) && report.contains("bootstrap") && report["bootstrap"].is_object()) {
    const auto& b = report["bootstrap"];
    IntervalSpec spec;
    const auto se = b.at("se");
    spec.se.resize(static_cast<long>(se.size()));
    for (size_t i = 0; i < se.size(); ++i) spec.se(static_cast<long>(i)) = se[i].get<double>();
    spec.z = b.at("z").get<double>();
    pc.ci = spec;
  }
  int begin = -1;
  if (auto from = cfg.str("from"); !from.empty()) begin = static_cast<int>(Date::parse(from) - events.start_date);
  const ProtocolResult res = run_protocol(params, events, begin, pc);

  const fs::path dir = cfg.str("out", ".");
  std::ostringstream csv;
  csv << "# config_hash=" << cfg.hash_hex() << "\n";
  write_predictions_csv(res.scored, events, dims_of(params).M, csv);
  write_text(dir / "predictions.csv", csv.str());
  nlohmann::json doc = metrics_json(res.metrics, events.location_ids);
  doc["policy"] = policy_json(res.policy);
  doc["predict_from"] = events.date_of(res.begin).str();
  doc["score_from"] = events.date_of(res.score_from).str();
  doc["warnings"] = res.warnings;
  write_json(dir / "metrics.json", doc, cfg);
  out << "predict: micro P " << res.metrics.micro.precision << " R " << res.metrics.micro.recall << " F1 "
      << res.metrics.micro.f1 << "\n";
  for (const auto& w : res.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    for (char& c : line)
      if (c == ' ' || c == '\t' || c == ';') c = ',';
    std::vector<double> row;
    for (const auto& f : text::split(line)) {
      if (f.empty()) continue;
      auto v = text::to_double(f);
      if (!v) throw ParseError("matrix entry '" + f + "' is not a number", static_cast<long>(rows.size()) + 1);
      row.push_back(*v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const long n = static_cast<long>(rows.size());
  Eigen::MatrixXd A(n, n);
  for (long i = 0; i < n; ++i) {
    if (static_cast<long>(rows[i].size()) != n) throw DimensionError("matrix file must hold a square matrix");
    for (long j = 0; j < n; ++j) A(i, j) = rows[i][j];
  }
  if (n == 0) throw DimensionError("matrix file is empty");
  if (!A.isApprox(A.transpose(), 1e-12)) throw ValidationError("matrix must be symmetric");
  return A;
}

int cmd_bound(const Config& cfg, std::ostream& out) {
  const double epsilon = cfg.num("epsilon", 0.1);
  const Objective objective = parse_objective(cfg.str("objective", "ls"));
  const double rho = cfg.num("rho", 1e-3);
  ConditionNumbers thetas;
  long kappa = cfg.integer("kappa", 0);
  long N = cfg.integer("N", 0);
  nlohmann::json doc;
  if (auto e = cfg.find("events"); e && !e->empty()) {
    const EventSequence events = load_events(cfg);
    const DesignMatrix A = design_matrix(events, depth(cfg));
    thetas = condition_numbers(A);
    kappa = A.kappa();
    N = A.N;
    doc["source"] = "events";
  } else if (auto m = cfg.find("matrix"); m && !m->empty()) {
    thetas = condition_numbers(read_matrix(*m));
    doc["source"] = "matrix";
  } else if (auto t = cfg.find("thetas"); t && !t->empty()) {
    const auto v = number_list(*t, "thetas");
    if (v.size() != 3) throw ValidationError("--thetas expects theta_1,theta_2,theta_inf");
    thetas.theta_1 = v[0];
    thetas.theta_2 = v[1];
    thetas.theta_inf = v[2];
    thetas.theta_1_certificate = "given";
    doc["source"] = "thetas";
  } else {
    throw ValidationError("one of --events, --matrix or --thetas is required");
  }
  doc["thetas"] = to_json(thetas);
  nlohmann::json bounds = nlohmann::json::array();
  if (kappa > 0 && N > 0) {
    for (Norm p : {Norm::one, Norm::two, Norm::inf})
      bounds.push_back(to_json(error_bound(thetas, p, kappa, N, epsilon, objective, rho)));
    doc["kappa"] = kappa;
    doc["N"] = N;
    doc["numerator"] = bound_numerator(kappa, N, epsilon, objective, rho);
  }
  doc["bounds"] = bounds;
  const fs::path path = cfg.str("out", "bound.json");
  write_json(path, doc, cfg);
  out << "theta_1 " << thetas.theta_1 << " theta_2 " << thetas.theta_2 << " theta_inf " << thetas.theta_inf << "\n";
  return kExitOk;
}

int cmd_sweep(const Config& cfg, std::ostream& out) {
  const ExtractionConfig base = extraction_config(cfg);
  const Dataset data = load_data(cfg);
  const auto grid = number_list(cfg.str("grid", "0.0005,0.001,0.005,0.01,0.05"), "grid");
  FitOptions opts = fit_options(cfg);
  const SweepResult res = delta_sweep(data, grid, base, frequency_mse_evaluator(depth(cfg), opts));
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : res.points)
    points.push_back({{"delta", p.delta},
                      {"mse", finite_or_null(p.mse)},
                      {"events", p.events},
                      {"degenerate", p.degenerate},
                      {"note", p.note}});
  nlohmann::json doc = {{"points", points}};
  doc["best_delta"] = res.best_delta ? nlohmann::json(*res.best_delta) : nlohmann::json(nullptr);
  const fs::path path = cfg.str("out", "sweep.json");
  write_json(path, doc, cfg);
  out << "sweep: best delta " << (res.best_delta ? text::shortest(*res.best_delta) : "none") << "\n";
  return kExitOk;
}

void set_workers(const std::string& value) {
  if (value.empty()) return;
  auto n = text::to_long(value);
  if (!n || *n < 1) throw ValidationError("worker count must be a positive integer");
  omp_set_num_threads(static_cast<int>(*n));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatio-temporal ramping-event estimation and prediction"};
  app.require_subcommand(1);
  std::string workers;
  app.add_option("--workers", workers, "worker threads (default: RAMP_WORKERS or all cores)");

  std::vector<Command> commands = {
      {"extract", "extract ramping events from irradiance data",
       join(kExtractionKeys, {{"from", "", "first date (YYYY-MM-DD)"},
                              {"to", "", "last date (YYYY-MM-DD)"},
                              {"out", "events.csv", "output events CSV"}}),
       cmd_extract},
      {"simulate", "sample an event sequence from model parameters",
       {{"params", "", "parameter JSON (or fit report)"},
        {"T", "365", "days to simulate"},
        {"seed", "0", "random seed"},
        {"start", "2000-01-01", "date of the first simulated day"},
        {"out", "events.csv", "output events CSV"}},
       cmd_simulate},
      {"fit", "estimate model parameters from events",
       join(join({{"events", "", "events CSV"}}, kFitKeys),
            {{"bootstrap", "0", "bootstrap replicates (0 disables)"},
             {"ci-epsilon", "0.05", "confidence level of bootstrap intervals"},
             {"seed", "0", "random seed"},
             {"manifest", "", "manifest supplying site coordinates for the graph"},
             {"out", ".", "output directory"}}),
       cmd_fit},
      {"predict", "sequential one-step-ahead prediction",
       {{"events", "", "events CSV"},
        {"fit", "", "fit report JSON"},
        {"policy", "static", "static or dynamic"},
        {"alpha", "0.5", "dynamic threshold weight"},
        {"w2", "50", "dynamic threshold window"},
        {"tune-split", "0.3", "share of the stream used for tuning"},
        {"tune-w2", "false", "tune w2 over 25 values from 10 to 110"},
        {"grid", "25", "static threshold grid size"},
        {"tau", "", "fixed static threshold; skips tuning"},
        {"ci", "true", "attach bootstrap intervals when the report has them"},
        {"from", "", "first predicted date (default: first usable day)"},
        {"out", ".", "output directory"}},
       cmd_predict},
      {"bound", "condition numbers and error bounds",
       {{"events", "", "events CSV"},
        {"d", "10", "memory depth in days"},
        {"matrix", "", "symmetric matrix file"},
        {"thetas", "", "theta_1,theta_2,theta_inf"},
        {"kappa", "", "parameter count"},
        {"N", "", "usable days"},
        {"epsilon", "0.1", "confidence level"},
        {"objective", "ls", "ls or ml"},
        {"rho", "0.001", "ML margin"},
        {"out", "bound.json", "output JSON"}},
       cmd_bound},
      {"sweep-delta", "choose delta by the held-out frequency test",
       join(join(kExtractionKeys, kFitKeys),
            {{"grid", "0.0005,0.001,0.005,0.01,0.05", "comma-separated delta values"},
             {"out", "sweep.json", "output JSON"}}),
       cmd_sweep},
  };

  std::map<std::string, std::string> config_path;
  for (auto& c : commands) {
    c.app = app.add_subcommand(c.name, c.help);
    c.app->add_option("--config", config_path[c.name], "key-value config file; flags override it");
    for (const auto& k : c.keys) {
      std::string help = k.help;
      if (!k.fallback.empty()) help += " [" + k.fallback + "]";
      c.app->add_option("--" + k.name, c.given[k.name], help);
    }
    if (c.name == "fit") c.app->add_option("--season", c.seasons, "date range FROM:TO, one model per range");
  }

  std::vector<std::string> argv_store;
  argv_store.emplace_back("ramp");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    const char* env = std::getenv("RAMP_WORKERS");
    set_workers(!workers.empty() ? workers : (env ? env : ""));
    for (auto& c : commands) {
      if (!c.app->parsed()) continue;
      Config file;
      if (!config_path[c.name].empty()) file = Config::load(config_path[c.name]);
      Config cfg;
      for (const auto& k : c.keys) {
        if (c.app->count("--" + k.name) > 0)
          cfg.set(k.name, c.given[k.name]);
        else if (auto v = file.find(k.name))
          cfg.set(k.name, *v);
        else if (!k.fallback.empty())
          cfg.set(k.name, k.fallback);
      }
      if (c.name == "fit") {
        std::string joined;
        for (const auto& s : c.seasons) joined += (joined.empty() ? "" : ";") + s;
        if (!joined.empty())
          cfg.set("season", joined);
        else if (auto v = file.find("season"))
          cfg.set("season", *v);
      }
      return c.run(cfg, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace ramp
