// Acceptance run: one PASS/FAIL line per headline property of the pipeline.
// Exit status is non-zero when any line fails.

#include <evres/pipeline.hpp>
#include <evres/serialize.hpp>

#include "oracles.hpp"
#include "support.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace evres;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const Context& default_context() {
  static const Context ctx = build_synthetic_context(42);
  return ctx;
}

Outcome lut_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthTelemetrySpec spec;
  const auto lut = fit_lut(generate_synthetic_telemetry(spec, 11), spec.station);
  SynthTelemetrySpec exact = spec;
  exact.noise = 0.0;
  const auto lut0 = fit_lut(generate_synthetic_telemetry(exact, 12), exact.station);
  const double secs = seconds_since(t0);
  bool rows_ok = true;
  double worst = 0.0, worst0 = 0.0;
  std::size_t trusted = 0;
  for (std::size_t t = 0; t < lut.grid().temp_bins(); ++t)
    for (std::size_t k = 0; k < lut.grid().pressure_bins(); ++k) {
      if (k > 0 && (lut.eta()(t, k) > lut.eta()(t, k - 1) || lut0.eta()(t, k) > lut0.eta()(t, k - 1))) rows_ok = false;
      const double T = lut.grid().temp_center(t), s = lut.grid().pressure_center(k);
      if (lut.trusted(t, k)) {
        ++trusted;
        worst = std::max(worst, std::abs(lut.eta()(t, k) - spec.law(T, s)));
      }
      worst0 = std::max(worst0, std::abs(lut_query(lut0, T, s) - exact.law(T, s)));
    }
  return {rows_ok && trusted == 210 && worst <= 0.05 && worst0 <= 1e-9 && secs < 5.0,
          "trusted " + std::to_string(trusted) + "/210, max err " + fmt(worst) + ", noiseless " + fmt(worst0) + ", " +
              fmt(secs) + " s"};
}

Outcome cummin_oracle() {
  Rng rng(21);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.index(30);
    RawSurface raw(BinGrid({0.0, 1.0}, [&] {
      std::vector<double> e(n + 1);
      for (std::size_t k = 0; k <= n; ++k) e[k] = 0.1 * static_cast<double>(k);
      return e;
    }()));
    std::vector<double> row(n);
    for (std::size_t k = 0; k < n; ++k) {
      row[k] = rng.uniform(0, 1);
      raw.sum(0, k) = row[k];
      raw.count(0, k) = 1;
    }
    raw.records_used = n;
    const auto lut = monotone_envelope(raw);
    const auto expect = oracle::prefix_min(row);
    for (std::size_t k = 0; k < n; ++k) mismatches += lut.eta()(0, k) != expect[k];
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatching cells over 1000 rows"};
}

std::vector<double> random_pressures(Rng& rng, std::size_t n, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(0.0, hi);
  return v;
}

Outcome anchor_exactness() {
  Rng rng(31);
  double worst = 0.0;
  std::size_t order_violations = 0;
  std::optional<PressureAligner> last;
  for (int i = 0; i < 100; ++i) {
    PressureAligner a(fit_ecdf(random_pressures(rng, 100 + rng.index(900), rng.uniform(1.05, 2.0))),
                      fit_ecdf(random_pressures(rng, 100 + rng.index(900), rng.uniform(1.0, 3.0))));
    worst = std::max(worst, std::abs(anchored_map(a, 1.0) - 1.0));
    last.emplace(std::move(a));
  }
  for (int i = 0; i < 10000; ++i) {
    double x = rng.uniform(0, 2.5), y = rng.uniform(0, 2.5);
    if (x > y) std::swap(x, y);
    order_violations += anchored_map(*last, x) > anchored_map(*last, y);
  }
  return {worst <= 1e-9 && order_violations == 0,
          "max |map(1)-1| " + fmt(worst) + ", rank violations " + std::to_string(order_violations) + "/10000"};
}

Outcome injection_stress() {
  const auto& ctx = default_context();
  const auto a1 = forecast::stress_response(ctx.panel, forecast::injection_predictor(ctx.injector()));
  const auto a0 = forecast::stress_response(ctx.panel, forecast::injection_predictor(forecast::Injector::a0()));
  double divergence = 0.0;
  std::string a0s;
  for (std::size_t i = 0; i < a0.mean_slr.size(); ++i) {
    divergence = std::max(divergence, std::abs(a1.mean_slr[i] - a0.mean_slr[i]));
    a0s += (i ? "/" : "") + fmt(a0.mean_slr[i]);
  }
  const bool tail = a1.tail_amplification && *a1.tail_amplification > 0.0;
  return {a1.spearman_rho == 1.0 && tail,
          "rho " + fmt(a1.spearman_rho) + ", tail " + (a1.tail_amplification ? fmt(*a1.tail_amplification) : "n/a") +
              "%; A0 mean SLR " + a0s + " (rho " + fmt(a0.spearman_rho) + "), max |A1-A0| " + fmt(divergence)};
}

Outcome trained_model_stress() {
  const auto& ctx = default_context();
  const auto t0 = std::chrono::steady_clock::now();
  const auto graph = forecast::build_graph(ctx.injected.coords());
  forecast::TrainHyper hyper;
  hyper.seed = derive_seed(ctx.seed, "train");
  const auto model = forecast::train(ctx.injected, graph, ctx.split, forecast::ModelDims{}, forecast::TailLossConfig{}, hyper);
  const auto r = forecast::stress_response(
      ctx.injected, forecast::model_predictor(model, graph, ctx.injector(), ctx.split.valid_end, ctx.injected.hours()));
  const double secs = seconds_since(t0);
  return {std::isfinite(r.spearman_rho) && r.spearman_rho >= 0.6 && secs < 600.0,
          "Z=" + std::to_string(ctx.injected.zones()) + ", " + std::to_string(hyper.epochs) + " epochs, rho " +
              fmt(r.spearman_rho) + ", final valid SLR RMSE " + fmt(model.log.back().valid_slr_rmse) + ", " + fmt(secs) + " s"};
}

Outcome gradient_check() {
  const auto f = oracle::tiny_model_fixture();
  const auto g = oracle::gradient_check(f.params, f.samples, f.graph, f.cfg);
  return {g.failures == 0 && g.checked > 0,
          std::to_string(g.checked) + " entries, worst rel err " + fmt(g.worst_rel) + ", failures " + std::to_string(g.failures)};
}

Outcome tail_weight_claim() {
  const double w = forecast::tail_weight(3.0, forecast::TailLossConfig{});
  return {w == 19.0, "w(3) = " + fmt(w)};
}

Outcome backlog_conservation() {
  Rng rng(41);
  std::size_t bad_steps = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t Z = 1 + rng.index(6), H = 10 + rng.index(60);
    std::vector<std::vector<double>> vol(H, std::vector<double>(Z)), slr(H, std::vector<double>(Z));
    for (auto& r : vol)
      for (auto& v : r) v = rng.uniform(0, 200);
    for (auto& r : slr)
      for (auto& v : r) v = rng.uniform(0, 1);
    std::vector<double> cap(Z);
    for (auto& c : cap) c = rng.uniform(20, 250);
    ScenarioSpec sc;
    sc.horizon = H;
    sc.shock_start = rng.index(H / 2);
    sc.shock_end = H / 2 + 1 + rng.index(H / 2 - 1);
    sc.multiplier = rng.uniform(1.0, 2.5);
    sc.policy.kind = static_cast<PolicyKind>(rng.index(4));
    sc.policy.elasticity = -rng.uniform(0, 1);
    sc.policy.boost_frac = rng.uniform(0, 0.6);
    sc.policy.top_k = rng.index(Z + 1);
    sc.balk_threshold = rng.uniform(0, 300);
    sc.balk_before_policy = rng.index(2) == 1;
    const auto c = oracle::check_conservation(simulate(sc, testing::make_forecasts(vol, slr), cap));
    bad_steps += !(c.step_exact && c.nonnegative);
    worst = std::max(worst, c.worst_final_error);
  }
  return {bad_steps == 0 && worst <= 1e-9,
          "scenarios with a step violation " + std::to_string(bad_steps) + "/1000, worst final error " + fmt(worst)};
}

BacklogTrajectory single_zone_path(const std::vector<double>& b) {
  BacklogTrajectory tr;
  tr.backlog = Grid2<double>(b.size(), 1);
  for (std::size_t t = 0; t < b.size(); ++t) tr.backlog(t, 0) = b[t];
  tr.arrivals = tr.arrivals_effective = tr.service = tr.served = tr.lost = Grid2<double>(b.size() - 1, 1, 0.0);
  return tr;
}

Outcome hand_fixture() {
  ScenarioSpec sc;
  sc.horizon = 7;
  sc.shock_start = 0;
  sc.shock_end = 2;
  sc.recovery_hold = 2;
  const auto r = resilience_metrics(single_zone_path({0, 10, 5, 0, 0, 0, 0, 0}),
                                    single_zone_path(std::vector<double>(8, 0.0)), sc);
  return {r.delta_auc == 15.0 && r.peak == 10.0 && r.delta_rt == 1.0 && !r.censored,
          "dAUC " + fmt(r.delta_auc) + ", peak " + fmt(r.peak) + ", dRT " + fmt(r.delta_rt)};
}

Outcome suite_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = build_synthetic_context(42);
  const auto suite = run_policy_suite(ctx.scenario, ctx.forecasts, ctx.panel.capacity());
  const double secs = seconds_since(t0);
  auto auc = [&](PolicyKind k) { return suite.get(k).report.delta_auc; };
  auto red = [&](PolicyKind k) { return suite.get(k).auc_reduction_pct; };
  const bool order = auc(PolicyKind::hybrid) < auc(PolicyKind::capboost) && auc(PolicyKind::capboost) < auc(PolicyKind::price) &&
                     auc(PolicyKind::price) < auc(PolicyKind::none);
  const bool hybrid_best = red(PolicyKind::hybrid) >= red(PolicyKind::price) && red(PolicyKind::hybrid) >= red(PolicyKind::capboost);
  const bool window = ctx.scenario.multiplier == 1.5 && ctx.scenario.shock_end - ctx.scenario.shock_start == 48;
  return {order && hybrid_best && window && secs < 60.0,
          "dAUC none " + fmt(auc(PolicyKind::none)) + " > price " + fmt(auc(PolicyKind::price)) + " > capboost " +
              fmt(auc(PolicyKind::capboost)) + " > hybrid " + fmt(auc(PolicyKind::hybrid)) + "; hybrid reduction " +
              fmt(red(PolicyKind::hybrid)) + "%, " + fmt(secs) + " s"};
}

Outcome grid_sign() {
  const auto& ctx = default_context();
  const auto suite = run_policy_suite(ctx.scenario, ctx.forecasts, ctx.panel.capacity());
  const auto g = grid_report(suite, ctx.grid, ctx.forecasts.start_hour);
  const double p = g.get(PolicyKind::price).delta_h_stress, c = g.get(PolicyKind::capboost).delta_h_stress;
  return {p >= c, "dH price " + fmt(p) + " h, capboost " + fmt(c) + " h, hybrid " + fmt(g.get(PolicyKind::hybrid).delta_h_stress) + " h"};
}

Outcome stress_hours_oracle() {
  Rng rng(51);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> l(1 + rng.index(200));
    for (auto& v : l) v = rng.index(5) == 0 ? 0.8 : rng.uniform(0.0, 1.4);
    mismatches += stress_hours(l, 0.8) != oracle::count_above(l, 0.8);
  }
  const double fixture = stress_hours({0.7, 0.85, 0.9, 0.75}, 0.8);
  return {mismatches == 0 && fixture == 2.0, "mismatches " + std::to_string(mismatches) + "/1000, fixture " + fmt(fixture) + " h"};
}

Outcome boundary_identity() {
  SweepResult sw;
  sw.elasticities = {-0.1, -0.2, -0.3, -0.4, -0.5};
  for (double e : sw.elasticities) sw.multipliers.push_back(1.7 - e);
  sw.multipliers.push_back(3.0);
  for (std::size_t i = 0; i < sw.multipliers.size(); ++i)
    for (std::size_t j = 0; j < sw.elasticities.size(); ++j) {
      SweepCell c;
      c.multiplier = sw.multipliers[i];
      c.elasticity = sw.elasticities[j];
      c.report.censored = i > j;
      sw.cells.push_back(c);
    }
  const auto exact = fit_boundary(sw);
  const bool line_ok = exact.line && std::abs(exact.line->intercept - 1.7) <= 1e-9 && std::abs(exact.line->slope + 1.0) <= 1e-9;

  const auto& ctx = default_context();
  const auto syn = fit_boundary(sweep(ctx.scenario, ctx.forecasts, ctx.panel.capacity(), default_sweep_multipliers(),
                                     default_sweep_elasticities(), PolicyKind::price, 4));
  bool staircase = true;
  double prev = -1.0;
  std::string steps;
  for (const auto& c : syn.columns) {
    steps += (steps.empty() ? "" : " ") + (c.m_crit ? fmt(*c.m_crit) : std::string("-"));
    if (!c.m_crit) continue;
    staircase &= *c.m_crit >= prev;
    prev = *c.m_crit;
  }
  return {line_ok && staircase,
          "recovered (" + (exact.line ? fmt(exact.line->intercept) + ", " + fmt(exact.line->slope) : std::string("none")) +
              "); synthetic m_crit by epsilon " + steps};
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string(EVRES_CLI_PATH) + " -q --out-dir '" + dir.string() + "' " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> cli_pipeline(const testing::TempDir& dir, std::size_t jobs, std::string& failed) {
  const auto cfg = dir.write("config.json", R"({"synthetic": {"zones": 8}, "train": {"epochs": 3, "sample_stride": 4}})");
  const std::string common = "--seed 7 --config '" + cfg.string() + "' --jobs " + std::to_string(jobs) + " ";
  const std::vector<std::string> steps = {
      "generate", "fit-lut", "inject --mode a0", "inject --mode a1", "train --mode a1",
      "forecast --mode a1 --model '" + (dir / "model.json").string() + "' --out '" + (dir / "forecasts_model.csv").string() + "'",
      "forecast --mode a1", "simulate", "sweep", "grid", "report"};
  for (const auto& s : steps)
    if (run_cli(dir.path(), common + s) != 0) failed += (failed.empty() ? "" : ", ") + s;
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir.path()))
    if (e.is_regular_file()) files[e.path().filename().string()] = read_file(e.path());
  return files;
}

Outcome cli_determinism() {
  testing::TempDir a("accept_a"), b("accept_b");
  std::string failed;
  const auto fa = cli_pipeline(a, 1, failed);
  const auto fb = cli_pipeline(b, 4, failed);
  std::size_t differ = 0;
  std::string names;
  for (const auto& [name, content] : fa)
    if (!fb.count(name) || fb.at(name) != content) {
      ++differ;
      names += " " + name;
    }
  const bool ok = failed.empty() && differ == 0 && fa.size() == fb.size() && fa.size() >= 20;
  return {ok, std::to_string(fa.size()) + " artifacts compared, " + std::to_string(differ) + " differ" + names +
                  (failed.empty() ? "" : "; failed commands: " + failed)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"lut-monotone-recovery", lut_recovery},
      {"cummin-oracle", cummin_oracle},
      {"anchor-exactness", anchor_exactness},
      {"injection-stress-monotonicity", injection_stress},
      {"trained-model-stress-consistency", trained_model_stress},
      {"gradient-check", gradient_check},
      {"tail-weight-19x", tail_weight_claim},
      {"backlog-conservation", backlog_conservation},
      {"hand-fixture-metrics", hand_fixture},
      {"policy-suite-ordering", suite_ordering},
      {"grid-sign-structure", grid_sign},
      {"stress-hours-oracle", stress_hours_oracle},
      {"boundary-fit-identity", boundary_identity},
      {"cli-determinism", cli_determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
