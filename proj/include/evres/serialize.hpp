#pragma once

#include <evres/common.hpp>
#include <evres/csv.hpp>
#include <evres/deliverability.hpp>
#include <evres/forecast/evaluate.hpp>
#include <evres/forecast/train.hpp>
#include <evres/gridcouple.hpp>
#include <evres/injection.hpp>
#include <evres/resilience.hpp>

#include <json.hpp>

#include <filesystem>
#include <set>
#include <string>

namespace evres {

using Json = nlohmann::json;

// Rejection of one field in a JSON document; `field` is a dotted path.
class FieldError : public Error {
public:
  FieldError(std::string field, const std::string& what) : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline Json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Strict object reader: every key must be consumed, types are checked.

class ObjectReader {
public:
  ObjectReader(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw FieldError(prefix_.empty() ? "$" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number()) throw FieldError(path(key), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw FieldError(path(key), "expected a finite number");
  }

  void count(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (v.is_number_unsigned()) {
      out = v.get<std::size_t>();
      return;
    }
    if (v.is_number_integer() && v.get<long long>() >= 0) {
      out = static_cast<std::size_t>(v.get<long long>());
      return;
    }
    throw FieldError(path(key), "expected a non-negative integer");
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_boolean()) throw FieldError(path(key), "expected true or false");
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_string()) throw FieldError(path(key), "expected a string");
    out = v.get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw FieldError(path(it.key()), "unknown key");
  }

private:
  const Json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Deliverability LUT

inline const std::vector<std::string> kLutHeader = {"t_bin_low_c", "s_bin_low", "eta", "count"};

inline std::string lut_to_csv(const DeliverabilityLut& lut) {
  csv::Writer w(kLutHeader);
  const auto& g = lut.grid();
  for (std::size_t t = 0; t < g.temp_bins(); ++t)
    for (std::size_t k = 0; k < g.pressure_bins(); ++k) {
      w.cell(g.temp_edges()[t]).cell(g.pressure_edges()[k]).cell(lut.eta()(t, k)).cell(lut.count()(t, k));
      w.end_row();
    }
  return w.str();
}

inline Json lut_sidecar(const DeliverabilityLut& lut, const Json& provenance = Json::object()) {
  Json j;
  j["temp_edges_c"] = lut.grid().temp_edges();
  j["pressure_edges"] = lut.grid().pressure_edges();
  j["trusted_support"] = DeliverabilityLut::kTrustedSupport;
  j["records_used"] = lut.records_used;
  j["records_skipped"] = lut.records_skipped;
  j["fill"] = {{"forward_filled", lut.stats.forward_filled},
               {"leading_filled", lut.stats.leading_filled},
               {"rows_from_column_mean", lut.stats.rows_from_column_mean}};
  std::size_t trusted = 0;
  for (std::size_t c : lut.count().raw()) trusted += c >= DeliverabilityLut::kTrustedSupport;
  j["trusted_cells"] = trusted;
  j["provenance"] = provenance;
  return j;
}

inline std::filesystem::path lut_sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

inline void save_lut(const DeliverabilityLut& lut, const std::filesystem::path& csv_path, const Json& provenance = Json::object()) {
  write_file_atomic(csv_path, lut_to_csv(lut));
  write_file_atomic(lut_sidecar_path(csv_path), dump_json(lut_sidecar(lut, provenance)));
}

// The sidecar supplies the bin edges; the CSV must enumerate every cell in
// row-major order and match those edges.
inline DeliverabilityLut load_lut(const std::filesystem::path& csv_path) {
  const Json side = read_json(lut_sidecar_path(csv_path));
  BinGrid grid(side.at("temp_edges_c").get<std::vector<double>>(), side.at("pressure_edges").get<std::vector<double>>());
  const auto table = csv::read(csv_path, kLutHeader);
  const std::size_t R = grid.temp_bins(), C = grid.pressure_bins();
  if (table.rows.size() != R * C)
    throw Error(csv_path.string() + ": expected " + std::to_string(R * C) + " LUT rows, found " + std::to_string(table.rows.size()));
  Grid2<double> eta(R, C);
  Grid2<std::size_t> count(R, C);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::size_t t = i / C, k = i % C;
    if (table.number(i, 0) != grid.temp_edges()[t] || table.number(i, 1) != grid.pressure_edges()[k])
      throw csv::ParseError(table.path, table.line_numbers[i], "", "bin edges do not match the sidecar grid");
    eta(t, k) = table.number(i, 2);
    const long long n = table.integer(i, 3);
    if (n < 0) throw csv::ParseError(table.path, table.line_numbers[i], "count", "negative count");
    count(t, k) = static_cast<std::size_t>(n);
  }
  DeliverabilityLut lut(std::move(grid), std::move(eta), std::move(count));
  lut.records_used = side.value("records_used", std::size_t{0});
  lut.records_skipped = side.value("records_skipped", std::size_t{0});
  if (side.contains("fill")) {
    lut.stats.forward_filled = side["fill"].value("forward_filled", std::size_t{0});
    lut.stats.leading_filled = side["fill"].value("leading_filled", std::size_t{0});
    lut.stats.rows_from_column_mean = side["fill"].value("rows_from_column_mean", std::size_t{0});
  }
  return lut;
}

// ---------------------------------------------------------------------------
// Aligner

inline Json aligner_to_json(const PressureAligner& a) {
  return {{"target_sorted", a.target().sorted_samples()},
          {"source_sorted", a.source().sorted_samples()},
          {"anchor", a.anchor()},
          {"s_max_lut", a.s_max_lut()}};
}

inline PressureAligner aligner_from_json(const Json& j) {
  PressureAligner a(EmpiricalCdf(j.at("target_sorted").get<std::vector<double>>()),
                    EmpiricalCdf(j.at("source_sorted").get<std::vector<double>>()), j.at("s_max_lut").get<double>());
  if (j.contains("anchor") && j["anchor"].get<double>() != a.anchor())
    throw Error("aligner file is inconsistent: stored anchor differs from the recomputed one");
  return a;
}

// ---------------------------------------------------------------------------
// Model checkpoint

inline constexpr const char* kCheckpointFormat = "evres-stgnn-v1";

inline Json model_to_json(const forecast::TrainedModel& m) {
  Json j;
  j["format"] = kCheckpointFormat;
  j["seed"] = m.seed;
  const auto& d = m.params.dims;
  j["dims"] = {{"input", d.input}, {"hidden", d.hidden}, {"head_hidden", d.head_hidden}, {"lookback", d.lookback}};
  j["norm"] = {{"temp_mean", m.stats.temp_mean},
               {"temp_std", m.stats.temp_std},
               {"capacity_mean", m.stats.capacity_mean},
               {"capacity_std", m.stats.capacity_std},
               {"log_volume_scale", m.stats.log_volume_scale}};
  j["loss"] = {{"alpha", m.loss_cfg.alpha}, {"beta_exp", m.loss_cfg.beta_exp}, {"w_slr", m.loss_cfg.w_slr}, {"w_vol", m.loss_cfg.w_vol}};
  Json w = Json::object();
  m.params.visit([&](const std::string& name, const forecast::Mat& mat) {
    std::vector<double> data;
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c) data.push_back(mat(r, c));
    w[name] = {{"rows", mat.rows()}, {"cols", mat.cols()}, {"data", data}};
  });
  j["weights"] = w;
  return j;
}

inline forecast::TrainedModel model_from_json(const Json& j) {
  if (j.value("format", std::string{}) != kCheckpointFormat) throw Error("not a model checkpoint (format tag mismatch)");
  forecast::TrainedModel m;
  m.seed = j.at("seed").get<std::uint64_t>();
  forecast::ModelDims d;
  d.input = j.at("dims").at("input").get<std::size_t>();
  d.hidden = j.at("dims").at("hidden").get<std::size_t>();
  d.head_hidden = j.at("dims").at("head_hidden").get<std::size_t>();
  d.lookback = j.at("dims").at("lookback").get<std::size_t>();
  if (d.input != forecast::kNumFeatures) throw Error("checkpoint input width differs from the feature count");
  const auto& n = j.at("norm");
  m.stats.temp_mean = n.at("temp_mean").get<double>();
  m.stats.temp_std = n.at("temp_std").get<double>();
  m.stats.capacity_mean = n.at("capacity_mean").get<double>();
  m.stats.capacity_std = n.at("capacity_std").get<double>();
  m.stats.log_volume_scale = n.at("log_volume_scale").get<double>();
  const auto& l = j.at("loss");
  m.loss_cfg = {l.at("alpha").get<double>(), l.at("beta_exp").get<double>(), l.at("w_slr").get<double>(), l.at("w_vol").get<double>()};
  m.params = forecast::ModelParams::zeros(d);
  m.params.visit([&](const std::string& name, forecast::Mat& mat) {
    if (!j.at("weights").contains(name)) throw Error("checkpoint lacks weight array " + name);
    const auto& w = j["weights"][name];
    const auto data = w.at("data").get<std::vector<double>>();
    if (w.at("rows").get<Eigen::Index>() != mat.rows() || w.at("cols").get<Eigen::Index>() != mat.cols() ||
        data.size() != static_cast<std::size_t>(mat.size()))
      throw Error("checkpoint weight " + name + " has the wrong shape");
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = data[i++];
  });
  if (!m.params.all_finite()) throw Error("checkpoint contains non-finite weights");
  return m;
}

// ---------------------------------------------------------------------------
// Forecasts

inline const std::vector<std::string> kForecastHeader = {"step", "hour", "zone_index", "vol_hat_kwh", "slr_hat"};

inline std::string forecasts_to_csv(const forecast::Forecasts& f) {
  csv::Writer w(kForecastHeader);
  for (std::size_t k = 0; k < f.horizon(); ++k)
    for (std::size_t z = 0; z < f.zones(); ++z) {
      w.cell(k).cell(f.start_hour + k).cell(z).cell(f.vol(k, z)).cell(f.slr(k, z));
      w.end_row();
    }
  return w.str();
}

inline forecast::Forecasts load_forecasts_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path, kForecastHeader);
  if (table.rows.empty()) throw Error(path.string() + ": no forecast rows");
  std::size_t H = 0, Z = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.integer(i, 0) < 0 || table.integer(i, 2) < 0)
      throw csv::ParseError(table.path, table.line_numbers[i], "", "negative index");
    H = std::max(H, static_cast<std::size_t>(table.integer(i, 0)) + 1);
    Z = std::max(Z, static_cast<std::size_t>(table.integer(i, 2)) + 1);
  }
  if (table.rows.size() != H * Z) throw Error(path.string() + ": forecast grid is incomplete");
  forecast::Forecasts f;
  f.start_hour = static_cast<std::size_t>(table.integer(0, 1) - table.integer(0, 0));
  f.vol = Grid2<double>(H, Z);
  f.slr = Grid2<double>(H, Z);
  Grid2<char> seen(H, Z, 0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto k = static_cast<std::size_t>(table.integer(i, 0));
    const auto z = static_cast<std::size_t>(table.integer(i, 2));
    if (seen(k, z)) throw csv::ParseError(table.path, table.line_numbers[i], "", "duplicate (step, zone)");
    if (static_cast<std::size_t>(table.integer(i, 1)) != f.start_hour + k)
      throw csv::ParseError(table.path, table.line_numbers[i], "hour", "hour does not follow from step");
    seen(k, z) = 1;
    f.vol(k, z) = table.number(i, 3);
    f.slr(k, z) = table.number(i, 4);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Scenario and grid configuration

inline Json policy_to_json(const PolicySpec& p) {
  return {{"kind", to_string(p.kind)},           {"delta_p", p.delta_p}, {"elasticity", p.elasticity},
          {"boost_frac", p.boost_frac},          {"top_k", p.top_k},     {"price_always_on", p.price_always_on}};
}

inline Json scenario_to_json(const ScenarioSpec& s) {
  return {{"multiplier", s.multiplier},
          {"shock_start", s.shock_start},
          {"shock_end", s.shock_end},
          {"horizon", s.horizon},
          {"policy", policy_to_json(s.policy)},
          {"balk_threshold", s.balk_threshold},
          {"balk_rate", s.balk_rate},
          {"recovery_theta_frac", s.recovery_theta_frac},
          {"recovery_hold", s.recovery_hold},
          {"balk_before_policy", s.balk_before_policy}};
}

inline PolicySpec policy_from_json(const Json& j, PolicySpec p = {}, const std::string& prefix = "policy") {
  ObjectReader r(j, prefix);
  std::string kind = to_string(p.kind);
  r.string("kind", kind);
  const auto k = policy_from_string(kind);
  if (!k) throw FieldError(r.path("kind"), "expected one of none, price, capboost, hybrid");
  p.kind = *k;
  r.number("delta_p", p.delta_p);
  r.number("elasticity", p.elasticity);
  r.number("boost_frac", p.boost_frac);
  r.count("top_k", p.top_k);
  r.boolean("price_always_on", p.price_always_on);
  r.finish();
  if (!(p.elasticity <= 0.0)) throw FieldError(r.path("elasticity"), "must be <= 0");
  if (!(p.boost_frac >= 0.0)) throw FieldError(r.path("boost_frac"), "must be >= 0");
  return p;
}

// Keys absent from the document keep the values of `base`; unknown keys and
// ill-typed values are rejected with the offending field named.
inline ScenarioSpec scenario_from_json(const Json& j, ScenarioSpec s = {}) {
  ObjectReader r(j, "");
  r.number("multiplier", s.multiplier);
  r.count("shock_start", s.shock_start);
  r.count("shock_end", s.shock_end);
  r.count("horizon", s.horizon);
  if (r.has("policy")) s.policy = policy_from_json(r.at("policy"), s.policy);
  r.number("balk_threshold", s.balk_threshold);
  r.number("balk_rate", s.balk_rate);
  r.number("recovery_theta_frac", s.recovery_theta_frac);
  r.count("recovery_hold", s.recovery_hold);
  r.boolean("balk_before_policy", s.balk_before_policy);
  r.finish();
  if (!(s.multiplier >= 1.0)) throw FieldError("multiplier", "must be >= 1");
  if (!(s.shock_start < s.shock_end)) throw FieldError("shock_end", "must exceed shock_start");
  if (!(s.shock_end <= s.horizon)) throw FieldError("shock_end", "must not exceed horizon");
  if (!(s.balk_rate >= 0.0 && s.balk_rate < 1.0)) throw FieldError("balk_rate", "must lie in [0,1)");
  if (!(s.balk_threshold >= 0.0)) throw FieldError("balk_threshold", "must be >= 0");
  if (!(s.recovery_theta_frac >= 0.0)) throw FieldError("recovery_theta_frac", "must be >= 0");
  return s;
}

inline Json grid_config_to_json(const GridConfig& g) {
  return {{"transformer_capacity_kw", g.transformer_capacity_kw},
          {"stress_threshold", g.stress_threshold},
          {"calibration_peak_lambda", g.calibration_peak_lambda},
          {"floor_kw", g.floor_kw},
          {"morning_amp_kw", g.morning_amp_kw},
          {"evening_amp_kw", g.evening_amp_kw},
          {"morning_peak_h", g.morning_peak_h},
          {"evening_peak_h", g.evening_peak_h},
          {"width_h", g.width_h},
          {"floor_rel", g.floor_rel},
          {"morning_rel", g.morning_rel},
          {"evening_rel", g.evening_rel}};
}

inline GridConfig grid_config_from_json(const Json& j, GridConfig g = {}) {
  ObjectReader r(j, "grid");
  r.number("transformer_capacity_kw", g.transformer_capacity_kw);
  r.number("stress_threshold", g.stress_threshold);
  r.number("calibration_peak_lambda", g.calibration_peak_lambda);
  r.number("floor_kw", g.floor_kw);
  r.number("morning_amp_kw", g.morning_amp_kw);
  r.number("evening_amp_kw", g.evening_amp_kw);
  r.number("morning_peak_h", g.morning_peak_h);
  r.number("evening_peak_h", g.evening_peak_h);
  r.number("width_h", g.width_h);
  r.number("floor_rel", g.floor_rel);
  r.number("morning_rel", g.morning_rel);
  r.number("evening_rel", g.evening_rel);
  r.finish();
  if (!(g.stress_threshold > 0.0 && g.stress_threshold < 1.0)) throw FieldError("grid.stress_threshold", "must lie in (0,1)");
  if (!(g.width_h > 0.0)) throw FieldError("grid.width_h", "must be positive");
  return g;
}

// ---------------------------------------------------------------------------
// Reports

// Non-finite values (an undefined Spearman, say) serialise as null.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json report_to_json(const ResilienceReport& r) {
  return {{"delta_auc", r.delta_auc}, {"delta_rt", r.delta_rt}, {"censored", r.censored}, {"peak", r.peak},
          {"ens", r.ens},             {"ens_baseline", r.ens_baseline}, {"theta", r.theta}};
}

inline Json suite_to_json(const PolicySuite& suite) {
  Json j;
  j["scenario"] = scenario_to_json(suite.base_scenario);
  Json pol = Json::object();
  for (const auto& o : suite.outcomes) {
    Json e = report_to_json(o.report);
    e["auc_reduction_pct"] = o.auc_reduction_pct;
    pol[to_string(o.kind)] = e;
  }
  j["policies"] = pol;
  return j;
}

inline Json grid_report_to_json(const GridReport& g) {
  Json j;
  j["config"] = grid_config_to_json(g.config);
  Json pol = Json::object();
  for (const auto& p : g.policies)
    pol[to_string(p.kind)] = {{"h_stress", p.h_stress}, {"delta_h_stress", p.delta_h_stress}, {"peak_lambda", p.peak_lambda}};
  j["policies"] = pol;
  return j;
}

inline const std::vector<std::string> kSweepHeader = {"m", "epsilon", "policy", "delta_auc", "delta_rt", "censored", "peak", "ens"};

inline std::string sweep_to_csv(const SweepResult& sw) {
  csv::Writer w(kSweepHeader);
  for (const auto& c : sw.cells) {
    w.cell(c.multiplier).cell(c.elasticity).cell(to_string(c.kind)).cell(c.report.delta_auc).cell(c.report.delta_rt);
    w.cell(c.report.censored ? 1 : 0).cell(c.report.peak).cell(c.report.ens);
    w.end_row();
  }
  return w.str();
}

inline Json boundary_to_json(const BoundaryFit& b) {
  Json cols = Json::array();
  for (const auto& c : b.columns) cols.push_back({{"elasticity", c.elasticity}, {"m_crit", c.m_crit ? Json(*c.m_crit) : Json(nullptr)}});
  Json j;
  j["columns"] = cols;
  j["line"] = b.line ? Json{{"a", b.line->intercept}, {"b", b.line->slope}} : Json(nullptr);
  j["degenerate"] = b.degenerate;
  j["warnings"] = b.warnings;
  return j;
}

inline Json sweep_to_json(const SweepResult& sw, const BoundaryFit& b) {
  Json cells = Json::array();
  for (const auto& c : sw.cells) {
    Json e = report_to_json(c.report);
    e["m"] = c.multiplier;
    e["epsilon"] = c.elasticity;
    e["policy"] = to_string(c.kind);
    cells.push_back(e);
  }
  return {{"multipliers", sw.multipliers}, {"elasticities", sw.elasticities}, {"cells", cells}, {"boundary", boundary_to_json(b)}};
}

inline Json stress_to_json(const forecast::StressResponse& s) {
  return {{"multipliers", s.multipliers},
          {"mean_slr", s.mean_slr},
          {"spearman_rho", num(s.spearman_rho)},
          {"monotone", s.monotone},
          {"tail_amplification_pct", s.tail_amplification ? num(*s.tail_amplification) : Json(nullptr)},
          {"pct_zones_worse", s.pct_zones_worse}};
}

}  // namespace evres
