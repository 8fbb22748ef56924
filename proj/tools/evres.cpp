// evres: command-line driver for the five-stage EV charging resilience pipeline.
//
//   generate -> fit-lut -> inject -> train -> forecast -> simulate -> sweep -> grid -> report
//
// Every command reads and writes files under --out-dir (overridable through
// EVRES_OUT_DIR), so stages can be rerun independently.

#include <evres/pipeline.hpp>
#include <evres/serialize.hpp>
#include <evres/service.hpp>

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace evres;

namespace {

struct TrainSettings {
  forecast::ModelDims dims;
  forecast::TailLossConfig loss;
  forecast::TrainHyper hyper;
};

// Optional --config document; every section is optional, unknown keys fail.
struct RunConfig {
  std::uint64_t seed = 42;
  fs::path out_dir = "out";
  std::size_t jobs = 1;
  int verbosity = 0;

  SynthTelemetrySpec telemetry{};
  SynthPanelSpec panel{};
  StationConfig station{};
  Json scenario = Json::object();  // overrides applied on top of the forecast-derived defaults
  GridConfig grid{};
  TrainSettings train{};

  fs::path path(const std::string& name) const { return out_dir / name; }
};

forecast::Optimizer optimizer_from_string(const std::string& s, const std::string& field) {
  if (s == "gd") return forecast::Optimizer::gd;
  if (s == "adam") return forecast::Optimizer::adam;
  throw FieldError(field, "expected gd or adam");
}

void apply_config(RunConfig& rc, const Json& j) {
  ObjectReader r(j, "");
  if (r.has("synthetic")) {
    ObjectReader s(r.at("synthetic"), "synthetic");
    s.count("zones", rc.panel.zones);
    s.count("hours", rc.panel.hours);
    s.number("hot_fraction", rc.panel.hot_fraction);
    s.count("samples_per_cell", rc.telemetry.samples_per_cell);
    s.number("telemetry_noise", rc.telemetry.noise);
    s.finish();
  }
  if (r.has("station")) {
    ObjectReader s(r.at("station"), "station");
    s.number("p_cap_kw", rc.station.p_cap);
    s.finish();
    rc.telemetry.station = rc.station;
  }
  if (r.has("scenario")) {
    rc.scenario = r.at("scenario");
    scenario_from_json(rc.scenario, ScenarioSpec{});  // validate early; horizon is checked later
  }
  if (r.has("grid")) rc.grid = grid_config_from_json(r.at("grid"));
  if (r.has("train")) {
    ObjectReader t(r.at("train"), "train");
    auto& ts = rc.train;
    std::string opt = ts.hyper.optimizer == forecast::Optimizer::adam ? "adam" : "gd";
    t.string("optimizer", opt);
    ts.hyper.optimizer = optimizer_from_string(opt, "train.optimizer");
    t.number("learning_rate", ts.hyper.learning_rate);
    t.count("epochs", ts.hyper.epochs);
    t.count("sample_stride", ts.hyper.sample_stride);
    t.number("clip_norm", ts.hyper.clip_norm);
    t.count("hidden", ts.dims.hidden);
    t.count("head_hidden", ts.dims.head_hidden);
    t.count("lookback", ts.dims.lookback);
    t.number("alpha", ts.loss.alpha);
    t.number("beta_exp", ts.loss.beta_exp);
    t.number("w_slr", ts.loss.w_slr);
    t.number("w_vol", ts.loss.w_vol);
    t.finish();
  }
  r.finish();
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw Error(std::string("missing ") + what + ": " + p.string());
}

void log(const RunConfig& rc, const std::string& msg) {
  if (rc.verbosity >= 0) std::cerr << msg << '\n';
}

void write(const RunConfig& rc, const fs::path& p, const std::string& content) {
  write_file_atomic(p, content);
  log(rc, "wrote " + p.string());
}

// Injector for either arm: A1 needs the LUT and aligner artifacts.
forecast::Injector load_injector(const std::string& mode, const fs::path& lut_path, const fs::path& aligner_path) {
  if (mode == "a0") return forecast::Injector::a0();
  require_file(lut_path, "LUT");
  require_file(aligner_path, "aligner");
  return forecast::Injector::a1(load_lut(lut_path), aligner_from_json(read_json(aligner_path)));
}

ScenarioSpec resolve_scenario(const RunConfig& rc, const std::string& scenario_path, std::size_t horizon) {
  ScenarioSpec sc = default_scenario(horizon);
  if (!rc.scenario.empty()) sc = scenario_from_json(rc.scenario, sc);
  if (!scenario_path.empty()) {
    require_file(scenario_path, "scenario file");
    try {
      sc = scenario_from_json(read_json(scenario_path), sc);
    } catch (const FieldError& e) {
      throw Error(scenario_path + ": " + e.what());
    }
  }
  if (sc.horizon != horizon)
    throw Error("scenario horizon " + std::to_string(sc.horizon) + " h does not match the " + std::to_string(horizon) +
                " h forecast");
  return sc;
}

std::vector<PolicyKind> parse_policies(const std::string& list) {
  std::vector<PolicyKind> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto k = policy_from_string(item);
    if (!k) throw Error("unknown policy '" + item + "' (expected none, price, capboost, hybrid)");
    out.push_back(*k);
  }
  if (out.empty()) throw Error("empty policy list");
  return out;
}

std::string trajectory_csv(const PolicySuite& suite, const PolicyOutcome& o, std::size_t start_hour) {
  csv::Writer w({"step", "hour", "backlog_kwh", "baseline_backlog_kwh", "excess_kwh", "served_kwh", "lost_kwh"});
  const auto& b = o.trajectory.backlog;
  for (std::size_t t = 0; t < b.rows(); ++t) {
    double scen = 0, base = 0, excess = 0, served = 0, lost = 0;
    for (std::size_t z = 0; z < b.cols(); ++z) {
      scen += b(t, z);
      base += suite.baseline.backlog(t, z);
      excess += std::max(0.0, b(t, z) - suite.baseline.backlog(t, z));
      if (t < o.trajectory.horizon()) {
        served += o.trajectory.served(t, z);
        lost += o.trajectory.lost(t, z);
      }
    }
    w.cell(t).cell(start_hour + t).cell(scen).cell(base).cell(excess).cell(served).cell(lost);
    w.end_row();
  }
  return w.str();
}

// ---------------------------------------------------------------------------

void cmd_generate(const RunConfig& rc) {
  const auto telemetry = generate_synthetic_telemetry(rc.telemetry, derive_seed(rc.seed, "telemetry"));
  const auto panel = generate_synthetic_panel(rc.panel, derive_seed(rc.seed, "panel"));
  write(rc, rc.path("telemetry.csv"), telemetry_to_csv(telemetry));
  write(rc, rc.path("panel.csv"), panel_to_csv(panel));
  write(rc, rc.path("zone_meta.csv"), zone_meta_to_csv(panel));
}

void cmd_fit_lut(const RunConfig& rc, const fs::path& telemetry_path, const fs::path& out) {
  require_file(telemetry_path, "telemetry file");
  const auto records = load_telemetry_csv(telemetry_path);
  const auto lut = fit_lut(records, rc.station);
  write_file_atomic(out, lut_to_csv(lut));
  write(rc, lut_sidecar_path(out),
        dump_json(lut_sidecar(lut, {{"source", telemetry_path.filename().string()}, {"p_cap_kw", rc.station.p_cap}})));
  log(rc, "wrote " + out.string());
}

void cmd_inject(const RunConfig& rc, const std::string& mode, const fs::path& panel_path, const fs::path& meta_path,
                const fs::path& lut_path, const fs::path& telemetry_path, const fs::path& out) {
  require_file(panel_path, "panel file");
  require_file(meta_path, "zone metadata file");
  const auto panel = load_panel_csv(panel_path, meta_path).panel.without_injection();
  if (mode == "a0") {
    write(rc, out, panel_to_csv(inject_panel_a0(panel)));
    return;
  }
  require_file(lut_path, "LUT");
  require_file(telemetry_path, "telemetry file");
  const auto lut = load_lut(lut_path);
  const auto split = SplitIndex::chronological(panel.hours());
  const auto aligner = fit_aligner(panel, split.train_end, load_telemetry_csv(telemetry_path), rc.station);
  write(rc, rc.path("aligner.json"), dump_json(aligner_to_json(aligner)));
  write(rc, out, panel_to_csv(inject_panel(panel, lut, aligner)));
}

void cmd_train(const RunConfig& rc, const std::string& mode, const fs::path& panel_path, const fs::path& meta_path,
               const fs::path& out) {
  require_file(panel_path, "injected panel file");
  require_file(meta_path, "zone metadata file");
  const auto panel = load_panel_csv(panel_path, meta_path).panel;
  if (!panel.injected()) throw Error(panel_path.string() + ": panel has no s_mapped/slr columns; run inject first");
  const auto split = SplitIndex::chronological(panel.hours());
  const auto graph = forecast::build_graph(panel.coords());
  auto hyper = rc.train.hyper;
  hyper.seed = derive_seed(rc.seed, "train");
  const auto model = forecast::train(panel, graph, split, rc.train.dims, rc.train.loss, hyper);
  write(rc, out, dump_json(model_to_json(model)));
  write(rc, rc.path("training_log.csv"), forecast::training_log_csv(model.log));

  // Held-out accuracy and the stress response of the trained model.
  const auto inj = load_injector(mode, rc.path("lut.csv"), rc.path("aligner.json"));
  const auto test = forecast::model_forecasts(model, panel, graph, split.valid_end, panel.hours() - split.valid_end);
  Grid2<double> truth_vol(test.horizon(), panel.zones()), truth_slr(test.horizon(), panel.zones());
  for (std::size_t k = 0; k < test.horizon(); ++k)
    for (std::size_t z = 0; z < panel.zones(); ++z) {
      truth_vol(k, z) = panel.demand()(split.valid_end + k, z);
      truth_slr(k, z) = panel.slr()(split.valid_end + k, z);
    }
  auto acc_json = [](const forecast::AccuracyReport& a) {
    return Json{{"rmse", a.rmse},
                {"mae", a.mae},
                {"mape_pct", a.mape ? num(*a.mape) : Json(nullptr)},
                {"mape_skipped", a.mape_skipped},
                {"peak_mape_pct", a.peak_mape ? num(*a.peak_mape) : Json(nullptr)},
                {"n", a.n}};
  };
  const auto stress = forecast::stress_response(
      panel, forecast::model_predictor(model, graph, inj, split.valid_end, panel.hours()));
  Json eval{{"mode", mode},
            {"test_hours", {split.valid_end, panel.hours()}},
            {"volume", acc_json(forecast::eval_accuracy(test.vol, truth_vol))},
            {"slr", acc_json(forecast::eval_accuracy(test.slr, truth_slr))},
            {"stress_response", stress_to_json(stress)}};
  write(rc, rc.path("train_eval.json"), dump_json(eval));
}

void cmd_forecast(const RunConfig& rc, const std::string& mode, const fs::path& panel_path, const fs::path& meta_path,
                  const std::string& model_path, std::size_t start, const fs::path& out) {
  require_file(panel_path, "panel file");
  require_file(meta_path, "zone metadata file");
  const auto loaded = load_panel_csv(panel_path, meta_path).panel;
  const auto inj = load_injector(mode, rc.path("lut.csv"), rc.path("aligner.json"));
  forecast::Forecasts fc;
  if (model_path.empty()) {
    fc = forecast::persistence_forecasts(loaded, inj, start, loaded.hours() - start);
  } else {
    require_file(model_path, "model checkpoint");
    const auto model = model_from_json(read_json(model_path));
    const auto injected = loaded.injected() ? loaded : inj.inject(loaded);
    start = std::max(start, model.params.dims.lookback + 1);
    fc = forecast::model_forecasts(model, injected, forecast::build_graph(loaded.coords()), start, loaded.hours() - start);
  }
  write(rc, out, forecasts_to_csv(fc));
}

void cmd_simulate(const RunConfig& rc, const fs::path& fc_path, const fs::path& meta_path, const std::string& scenario_path,
                  const std::string& policies) {
  require_file(fc_path, "forecast file");
  require_file(meta_path, "zone metadata file");
  const auto fc = load_forecasts_csv(fc_path);
  const auto meta = csv::read(meta_path, kZoneMetaHeader);
  std::vector<double> capacity;
  for (std::size_t i = 0; i < meta.rows.size(); ++i) capacity.push_back(meta.number(i, 1));
  if (capacity.size() != fc.zones()) throw Error("zone metadata and forecasts disagree on the zone count");
  const auto sc = resolve_scenario(rc, scenario_path, fc.horizon());
  const auto suite = run_policy_suite(sc, fc, capacity, parse_policies(policies));
  write(rc, rc.path("suite.json"), dump_json(suite_to_json(suite)));
  for (const auto& o : suite.outcomes)
    write(rc, rc.path(std::string("trajectory_") + to_string(o.kind) + ".csv"), trajectory_csv(suite, o, fc.start_hour));
  if (std::any_of(suite.outcomes.begin(), suite.outcomes.end(), [](const auto& o) { return o.kind == PolicyKind::none; })) {
    const auto g = grid_report(suite, rc.grid, fc.start_hour);
    write(rc, rc.path("grid.json"), dump_json(grid_report_to_json(g)));
    for (const auto& p : g.policies)
      write(rc, rc.path(std::string("load_") + to_string(p.kind) + ".csv"), load_series_csv(p.series));
  }
}

void cmd_sweep(const RunConfig& rc, const fs::path& fc_path, const fs::path& meta_path, const std::string& scenario_path,
               const std::string& policy, std::vector<double> ms, std::vector<double> es) {
  require_file(fc_path, "forecast file");
  require_file(meta_path, "zone metadata file");
  const auto fc = load_forecasts_csv(fc_path);
  const auto meta = csv::read(meta_path, kZoneMetaHeader);
  std::vector<double> capacity;
  for (std::size_t i = 0; i < meta.rows.size(); ++i) capacity.push_back(meta.number(i, 1));
  const auto sc = resolve_scenario(rc, scenario_path, fc.horizon());
  const auto kind = parse_policies(policy).front();
  if (ms.empty()) ms = default_sweep_multipliers();
  if (es.empty()) es = default_sweep_elasticities();
  const auto sw = sweep(sc, fc, capacity, ms, es, kind, rc.jobs);
  const auto fit = fit_boundary(sw);
  for (const auto& w : fit.warnings) log(rc, "warning: " + w);
  write(rc, rc.path("sweep.csv"), sweep_to_csv(sw));
  write(rc, rc.path("sweep.json"), dump_json(sweep_to_json(sw, fit)));
}

// Recompute the grid report from a suite on disk: the suite JSON carries the
// scenario, the trajectories are re-simulated from the forecasts.
void cmd_grid(const RunConfig& rc, const fs::path& fc_path, const fs::path& meta_path, const std::string& mode) {
  require_file(fc_path, "forecast file");
  require_file(meta_path, "zone metadata file");
  require_file(rc.path("suite.json"), "policy suite (run simulate first)");
  const auto fc = load_forecasts_csv(fc_path);
  const auto meta = csv::read(meta_path, kZoneMetaHeader);
  std::vector<double> capacity;
  for (std::size_t i = 0; i < meta.rows.size(); ++i) capacity.push_back(meta.number(i, 1));
  const Json sj = read_json(rc.path("suite.json"));
  const auto sc = scenario_from_json(sj.at("scenario"), default_scenario(fc.horizon()));
  std::vector<PolicyKind> kinds;
  for (auto it = sj.at("policies").begin(); it != sj.at("policies").end(); ++it) kinds.push_back(*policy_from_string(it.key()));
  const auto suite = run_policy_suite(sc, fc, capacity, kinds);
  const auto g = grid_report(suite, rc.grid, fc.start_hour, mode == "capacity_rate" ? EvLoadMode::capacity_rate : EvLoadMode::delivered);
  write(rc, rc.path("grid.json"), dump_json(grid_report_to_json(g)));
  for (const auto& p : g.policies) write(rc, rc.path(std::string("load_") + to_string(p.kind) + ".csv"), load_series_csv(p.series));
}

// One row per policy in the resilience-table layout.
void cmd_report(const RunConfig& rc) {
  require_file(rc.path("suite.json"), "policy suite (run simulate first)");
  const Json suite = read_json(rc.path("suite.json"));
  Json grid;
  if (fs::is_regular_file(rc.path("grid.json"))) grid = read_json(rc.path("grid.json"));
  csv::Writer w({"policy", "delta_auc_kwh_h", "delta_rt_h", "censored", "peak_kwh", "ens_kwh", "delta_h_stress_h",
                 "auc_reduction_pct"});
  Json rows = Json::array();
  for (auto k : kAllPolicies) {
    const std::string name = to_string(k);
    if (!suite.at("policies").contains(name)) continue;
    const auto& p = suite["policies"][name];
    const double dh = grid.is_object() && grid["policies"].contains(name) ? grid["policies"][name]["delta_h_stress"].get<double>() : 0.0;
    w.cell(name).cell(p["delta_auc"].get<double>()).cell(p["delta_rt"].get<double>()).cell(p["censored"].get<bool>() ? 1 : 0);
    w.cell(p["peak"].get<double>()).cell(p["ens"].get<double>()).cell(dh).cell(p["auc_reduction_pct"].get<double>());
    w.end_row();
    rows.push_back({{"policy", name},
                    {"delta_auc", p["delta_auc"]},
                    {"delta_rt", p["delta_rt"]},
                    {"censored", p["censored"]},
                    {"peak", p["peak"]},
                    {"ens", p["ens"]},
                    {"delta_h_stress", dh}});
  }
  write(rc, rc.path("report.csv"), w.str());
  write(rc, rc.path("report.json"), dump_json({{"scenario", suite.at("scenario")}, {"rows", rows}}));
}

void cmd_serve(const RunConfig& rc, const std::string& host, int port, const std::string& ui_dir, const std::string& telemetry,
               const std::string& panel, const std::string& meta) {
  ServiceOptions opts;
  opts.jobs = rc.jobs;
  Service svc(opts);
  httplib::Server http;
  auto route = [&](const httplib::Request& req, httplib::Response& res) {
    const auto r = svc.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  http.Get("/healthz", route);
  http.Get("/api/context", route);
  http.Post("/api/scenario", route);
  http.Post("/api/sweep", route);
  if (!ui_dir.empty() && !http.set_mount_point("/", ui_dir)) throw Error("cannot serve UI directory " + ui_dir);

  // Bind first so /healthz and the 503 path answer while the context loads.
  if (!http.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  std::thread loader([&] {
    Context ctx;
    if (!panel.empty()) {
      require_file(telemetry, "telemetry file");
      require_file(panel, "panel file");
      require_file(meta, "zone metadata file");
      ctx = build_context(rc.seed, load_telemetry_csv(telemetry), load_panel_csv(panel, meta).panel, rc.station);
    } else {
      SyntheticSetup setup;
      setup.telemetry = rc.telemetry;
      setup.panel = rc.panel;
      ctx = build_synthetic_context(rc.seed, setup);
    }
    ctx.grid = rc.grid;
    if (!rc.scenario.empty()) ctx.scenario = scenario_from_json(rc.scenario, ctx.scenario);
    svc.load(std::move(ctx));
    log(rc, "context loaded");
  });
  log(rc, "listening on " + host + ":" + std::to_string(port));
  http.listen_after_bind();
  loader.join();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EV charging resilience pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  RunConfig rc;
  std::string config_path;
  if (const char* env = std::getenv("EVRES_OUT_DIR")) rc.out_dir = env;
  app.add_option("--seed", rc.seed, "Run seed; each stage derives its own sub-seed")->capture_default_str();
  app.add_option("--config", config_path, "JSON config (synthetic, station, scenario, grid, train sections)");
  app.add_option("--jobs", rc.jobs, "Worker threads for sweeps")->capture_default_str();
  app.add_option("--out-dir", rc.out_dir, "Artifact directory (env EVRES_OUT_DIR)")->capture_default_str();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "No progress messages");

  auto* gen = app.add_subcommand("generate", "Synthetic telemetry, zone-hour panel and zone metadata");

  auto* fit = app.add_subcommand("fit-lut", "Fit the monotone deliverability LUT from telemetry");
  std::string telemetry_path, lut_out;
  fit->add_option("--telemetry", telemetry_path, "Telemetry CSV (default <out>/telemetry.csv)");
  fit->add_option("--out", lut_out, "LUT CSV (default <out>/lut.csv)");

  auto* inj = app.add_subcommand("inject", "Label the panel with SLR (a1: aligner + LUT, a0: inverse pressure)");
  std::string mode = "a1", panel_path, meta_path, inj_out, inj_lut;
  inj->add_option("--mode", mode)->check(CLI::IsMember({"a1", "a0"}))->capture_default_str();
  inj->add_option("--panel", panel_path, "Panel CSV (default <out>/panel.csv)");
  inj->add_option("--meta", meta_path, "Zone metadata CSV (default <out>/zone_meta.csv)");
  inj->add_option("--lut", inj_lut, "LUT CSV (default <out>/lut.csv)");
  inj->add_option("--telemetry", telemetry_path, "Telemetry CSV for the source pressure distribution");
  inj->add_option("--out", inj_out, "Injected panel CSV (default <out>/panel_<mode>.csv)");

  auto* tr = app.add_subcommand("train", "Train the graph forecaster on an injected panel");
  std::string train_out;
  tr->add_option("--mode", mode)->check(CLI::IsMember({"a1", "a0"}))->capture_default_str();
  tr->add_option("--panel", panel_path, "Injected panel CSV (default <out>/panel_<mode>.csv)");
  tr->add_option("--meta", meta_path);
  tr->add_option("--epochs", rc.train.hyper.epochs);
  tr->add_option("--out", train_out, "Checkpoint (default <out>/model.json)");

  auto* fcst = app.add_subcommand("forecast", "Forecast volume and SLR over the simulation horizon");
  std::string model_path, fc_out;
  std::size_t fc_start = kDefaultForecastStart;
  fcst->add_option("--mode", mode)->check(CLI::IsMember({"a1", "a0"}))->capture_default_str();
  fcst->add_option("--panel", panel_path, "Panel CSV (default <out>/panel.csv)");
  fcst->add_option("--meta", meta_path);
  fcst->add_option("--model", model_path, "Checkpoint; persistence forecasts when omitted");
  fcst->add_option("--start", fc_start, "First forecast hour")->capture_default_str();
  fcst->add_option("--out", fc_out, "Forecast CSV (default <out>/forecasts.csv)");

  auto* sim = app.add_subcommand("simulate", "Run the policy suite on the forecasts");
  std::string fc_path, scenario_path, policies = "none,price,capboost,hybrid";
  sim->add_option("--forecasts", fc_path);
  sim->add_option("--meta", meta_path);
  sim->add_option("--scenario", scenario_path, "Scenario JSON");
  sim->add_option("--policies", policies)->capture_default_str();

  auto* swp = app.add_subcommand("sweep", "Multiplier x elasticity sweep and boundary fit");
  std::string sweep_policy = "price";
  std::vector<double> ms, es;
  swp->add_option("--forecasts", fc_path);
  swp->add_option("--meta", meta_path);
  swp->add_option("--scenario", scenario_path);
  swp->add_option("--policy", sweep_policy)->capture_default_str();
  swp->add_option("--multipliers", ms)->delimiter(',');
  swp->add_option("--elasticities", es)->delimiter(',');

  auto* grd = app.add_subcommand("grid", "Transformer loading and stress hours for the policy suite");
  std::string ev_mode = "delivered";
  grd->add_option("--forecasts", fc_path);
  grd->add_option("--meta", meta_path);
  grd->add_option("--ev-load", ev_mode)->check(CLI::IsMember({"delivered", "capacity_rate"}))->capture_default_str();

  auto* rep = app.add_subcommand("report", "Merge suite and grid results into one table");

  auto* srv = app.add_subcommand("serve", "HTTP JSON API for the scenario explorer");
  std::string host = "127.0.0.1", ui_dir;
  int port = 8080;
  srv->add_option("--host", host)->capture_default_str();
  srv->add_option("--port", port)->capture_default_str();
  srv->add_option("--ui-dir", ui_dir, "Static UI bundle to mount at /");
  srv->add_option("--telemetry", telemetry_path, "Build the context from files instead of synthetic data");
  srv->add_option("--panel", panel_path);
  srv->add_option("--meta", meta_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    rc.verbosity = quiet ? -1 : 0;
    if (!config_path.empty()) {
      require_file(config_path, "config file");
      try {
        apply_config(rc, read_json(config_path));
      } catch (const FieldError& e) {
        throw Error(config_path + ": " + e.what());
      }
    }
    rc.jobs = std::max<std::size_t>(rc.jobs, 1);
    fs::create_directories(rc.out_dir);
    auto def = [&](const std::string& v, const std::string& name) { return v.empty() ? rc.path(name) : fs::path(v); };
    const std::string injected_name = "panel_" + mode + ".csv";

    if (*gen) cmd_generate(rc);
    if (*fit) cmd_fit_lut(rc, def(telemetry_path, "telemetry.csv"), def(lut_out, "lut.csv"));
    if (*inj)
      cmd_inject(rc, mode, def(panel_path, "panel.csv"), def(meta_path, "zone_meta.csv"), def(inj_lut, "lut.csv"),
                 def(telemetry_path, "telemetry.csv"), def(inj_out, injected_name));
    if (*tr) cmd_train(rc, mode, def(panel_path, injected_name), def(meta_path, "zone_meta.csv"), def(train_out, "model.json"));
    if (*fcst)
      cmd_forecast(rc, mode, def(panel_path, "panel.csv"), def(meta_path, "zone_meta.csv"), model_path, fc_start,
                   def(fc_out, "forecasts.csv"));
    if (*sim) cmd_simulate(rc, def(fc_path, "forecasts.csv"), def(meta_path, "zone_meta.csv"), scenario_path, policies);
    if (*swp) cmd_sweep(rc, def(fc_path, "forecasts.csv"), def(meta_path, "zone_meta.csv"), scenario_path, sweep_policy, ms, es);
    if (*grd) cmd_grid(rc, def(fc_path, "forecasts.csv"), def(meta_path, "zone_meta.csv"), ev_mode);
    if (*rep) cmd_report(rc);
    if (*srv)
      cmd_serve(rc, host, port, ui_dir, def(telemetry_path, "telemetry.csv").string(), panel_path,
                def(meta_path, "zone_meta.csv").string());
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}
