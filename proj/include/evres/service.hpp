#pragma once

#include <evres/pipeline.hpp>
#include <evres/serialize.hpp>

#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace evres {

struct ServiceOptions {
  std::size_t sweep_cell_cap = 64;
  std::size_t max_points = 2000;  // per trajectory series
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
};

struct Response {
  int status = 200;
  std::string body;
};

// Stride sample of [0, n) that always keeps the first and last index and the
// argmax of every series, capped at max_points indices.
inline std::vector<std::size_t> downsample_indices(std::size_t n, const std::vector<const std::vector<double>*>& series,
                                                   std::size_t max_points) {
  std::vector<std::size_t> idx;
  if (n == 0) return idx;
  if (n <= max_points) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  const std::size_t reserved = 2 + series.size();
  if (max_points <= reserved) throw Error("max_points too small for the number of series");
  const std::size_t stride = (n + (max_points - reserved) - 1) / (max_points - reserved);
  std::set<std::size_t> keep{0, n - 1};
  for (std::size_t i = 0; i < n; i += stride) keep.insert(i);
  for (const auto* s : series)
    keep.insert(static_cast<std::size_t>(std::max_element(s->begin(), s->end()) - s->begin()));
  return {keep.begin(), keep.end()};
}

// Version stamp of a context: FNV-1a over the artifacts a response depends on.
inline std::string context_version(const Context& c) {
  const std::string blob = std::to_string(c.seed) + lut_to_csv(c.lut) + forecasts_to_csv(c.forecasts) +
                           zone_meta_to_csv(c.panel) + dump_json(scenario_to_json(c.scenario)) +
                           dump_json(grid_config_to_json(c.grid));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(derive_seed(0, blob)));
  return buf;
}

// JSON API over a read-only context. Transport-agnostic: `handle` maps
// (method, path, body) to a status and a JSON body.
class Service {
public:
  explicit Service(ServiceOptions opts = {}) : opts_(opts) {}

  void load(Context ctx) {
    auto entry = std::make_shared<Loaded>();
    entry->version = context_version(ctx);
    entry->ctx = std::move(ctx);
    std::lock_guard lock(mu_);
    loaded_ = std::move(entry);
  }

  bool loaded() const { return current() != nullptr; }

  Response handle(const std::string& method, const std::string& path, const std::string& body) const {
    try {
      if (path == "/healthz") {
        if (method != "GET") return error(405, "method not allowed");
        return ok({{"status", "ok"}, {"context_loaded", loaded()}});
      }
      const bool known = path == "/api/context" || path == "/api/scenario" || path == "/api/sweep";
      if (!known) return error(404, "no such endpoint: " + path);
      const auto entry = current();
      if (!entry) return error(503, "context not loaded yet");
      if (path == "/api/context") return method == "GET" ? ok(context_json(*entry)) : error(405, "method not allowed");
      if (method != "POST") return error(405, "method not allowed");
      Json req;
      try {
        req = body.empty() ? Json::object() : Json::parse(body);
      } catch (const Json::parse_error&) {
        return error(400, "request body is not valid JSON");
      }
      if (!req.is_object()) return error(400, "request body must be a JSON object");
      if (req.contains("context_version")) {
        if (!req["context_version"].is_string() || req["context_version"].get<std::string>() != entry->version)
          return error(409, "stale context version; reload GET /api/context", "context_version");
        req.erase("context_version");
      }
      return path == "/api/scenario" ? scenario(*entry, req) : sweep_request(*entry, req);
    } catch (const FieldError& e) {
      return error(400, e.what(), e.field());
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

private:
  struct Loaded {
    Context ctx;
    std::string version;
  };

  std::shared_ptr<const Loaded> current() const {
    std::lock_guard lock(mu_);
    return loaded_;
  }

  static Response ok(const Json& j) { return {200, j.dump()}; }

  static Response error(int status, const std::string& msg, const std::string& field = "") {
    Json j{{"error", msg}};
    if (!field.empty()) j["field"] = field;
    return {status, j.dump()};
  }

  Json context_json(const Loaded& e) const {
    const Context& c = e.ctx;
    Json kinds = Json::array();
    for (auto k : kAllPolicies) kinds.push_back(to_string(k));
    return {{"context_version", e.version},
            {"zones", c.panel.zones()},
            {"hours", c.panel.hours()},
            {"split", {{"train_end", c.split.train_end}, {"valid_end", c.split.valid_end}}},
            {"forecast", {{"start_hour", c.forecasts.start_hour}, {"horizon", c.forecasts.horizon()}}},
            {"lut", lut_sidecar(c.lut, {{"seed", c.seed}})},
            {"defaults",
             {{"scenario", scenario_to_json(c.scenario)},
              {"sweep_multipliers", default_sweep_multipliers()},
              {"sweep_elasticities", default_sweep_elasticities()},
              {"policies", kinds},
              {"multiplier_range", {1.0, 2.0}},
              {"sweep_cell_cap", opts_.sweep_cell_cap},
              {"grid", grid_config_to_json(c.grid)}}}};
  }

  Response scenario(const Loaded& e, const Json& req) const {
    const Context& c = e.ctx;
    const ScenarioSpec sc = scenario_from_json(req, c.scenario);
    if (sc.horizon != c.forecasts.horizon())
      throw FieldError("horizon", "must equal the loaded forecast horizon (" + std::to_string(c.forecasts.horizon()) + ")");
    const auto& cap = c.panel.capacity();
    const auto base = simulate(sc.baseline(), c.forecasts, cap);
    const auto risk = forecast::risk_score(c.forecasts.slr, c.forecasts.vol);
    const auto traj = simulate(sc, c.forecasts, cap, risk);
    const auto report = resilience_metrics(traj, base, sc);
    ScenarioSpec none = sc;
    none.policy.kind = PolicyKind::none;
    const auto none_traj = simulate(none, c.forecasts, cap, risk);
    const auto none_report = resilience_metrics(none_traj, base, none);

    const GridConfig grid = calibrate_grid(c.grid, base);
    const auto load = load_series(traj, grid, c.forecasts.start_hour);
    const auto none_load = load_series(none_traj, grid, c.forecasts.start_hour);
    const double h = stress_hours(load.lambda, grid.stress_threshold);
    const double h_none = stress_hours(none_load.lambda, grid.stress_threshold);

    std::vector<double> b_scen(traj.backlog.rows(), 0.0), b_base(b_scen.size(), 0.0), excess(b_scen.size(), 0.0);
    for (std::size_t t = 0; t < b_scen.size(); ++t)
      for (std::size_t z = 0; z < traj.backlog.cols(); ++z) {
        b_scen[t] += traj.backlog(t, z);
        b_base[t] += base.backlog(t, z);
        excess[t] += std::max(0.0, traj.backlog(t, z) - base.backlog(t, z));
      }
    const auto bi = downsample_indices(b_scen.size(), {&b_scen, &b_base, &excess}, opts_.max_points);
    Json traj_j{{"step", Json::array()}, {"backlog_kwh", Json::array()}, {"baseline_backlog_kwh", Json::array()},
                {"excess_kwh", Json::array()}};
    for (auto i : bi) {
      traj_j["step"].push_back(i);
      traj_j["backlog_kwh"].push_back(b_scen[i]);
      traj_j["baseline_backlog_kwh"].push_back(b_base[i]);
      traj_j["excess_kwh"].push_back(excess[i]);
    }
    const auto li = downsample_indices(load.lambda.size(), {&load.p_base, &load.p_ev, &load.p_total, &load.lambda}, opts_.max_points);
    Json load_j{{"hour", Json::array()}, {"p_base_kw", Json::array()}, {"p_ev_kw", Json::array()},
                {"p_total_kw", Json::array()}, {"lambda", Json::array()}};
    for (auto i : li) {
      load_j["hour"].push_back(load.start_hour + i);
      load_j["p_base_kw"].push_back(load.p_base[i]);
      load_j["p_ev_kw"].push_back(load.p_ev[i]);
      load_j["p_total_kw"].push_back(load.p_total[i]);
      load_j["lambda"].push_back(load.lambda[i]);
    }
    Json out;
    out["context_version"] = e.version;
    out["scenario"] = scenario_to_json(sc);
    out["report"] = report_to_json(report);
    out["no_policy_report"] = report_to_json(none_report);
    out["grid"] = {{"h_stress", h},
                   {"h_stress_no_policy", h_none},
                   {"delta_h_stress", h_none - h},
                   {"peak_lambda", *std::max_element(load.lambda.begin(), load.lambda.end())},
                   {"transformer_capacity_kw", grid.transformer_capacity_kw}};
    out["trajectory"] = traj_j;
    out["load_series"] = load_j;
    return ok(out);
  }

  static std::vector<double> number_list(const Json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw FieldError(field, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) throw FieldError(field, "expected a non-empty array of numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  Response sweep_request(const Loaded& e, const Json& req) const {
    const Context& c = e.ctx;
    std::vector<double> ms = default_sweep_multipliers(), es = default_sweep_elasticities();
    PolicyKind kind = PolicyKind::price;
    ScenarioSpec sc = c.scenario;
    for (auto it = req.begin(); it != req.end(); ++it) {
      const std::string& k = it.key();
      if (k == "multipliers") {
        ms = number_list(*it, k);
      } else if (k == "elasticities") {
        es = number_list(*it, k);
      } else if (k == "policy") {
        if (!it->is_string() || !policy_from_string(it->get<std::string>()))
          throw FieldError(k, "expected one of none, price, capboost, hybrid");
        kind = *policy_from_string(it->get<std::string>());
      } else if (k == "scenario") {
        sc = scenario_from_json(*it, c.scenario);
      } else {
        throw FieldError(k, "unknown key");
      }
    }
    for (double m : ms)
      if (!(m >= 1.0)) throw FieldError("multipliers", "every multiplier must be >= 1");
    for (double x : es)
      if (!(x <= 0.0)) throw FieldError("elasticities", "every elasticity must be <= 0");
    if (ms.size() * es.size() > opts_.sweep_cell_cap)
      return error(413, "sweep of " + std::to_string(ms.size() * es.size()) + " cells exceeds the cap of " +
                            std::to_string(opts_.sweep_cell_cap));
    if (sc.horizon != c.forecasts.horizon()) throw FieldError("scenario.horizon", "must equal the loaded forecast horizon");
    const auto sw = sweep(sc, c.forecasts, c.panel.capacity(), ms, es, kind, opts_.jobs);
    Json out = sweep_to_json(sw, fit_boundary(sw));
    out["context_version"] = e.version;
    out["policy"] = to_string(kind);
    return ok(out);
  }

  ServiceOptions opts_;
  mutable std::mutex mu_;
  std::shared_ptr<const Loaded> loaded_;
};

}  // namespace evres
