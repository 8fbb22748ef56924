#include <evres/gridcouple.hpp>
#include <evres/pipeline.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace evres;

namespace {

BacklogTrajectory served_path(const std::vector<std::vector<double>>& served, double service = 100.0) {
  BacklogTrajectory tr;
  const std::size_t H = served.size(), Z = served.front().size();
  tr.backlog = Grid2<double>(H + 1, Z, 0.0);
  tr.arrivals = tr.arrivals_effective = tr.lost = Grid2<double>(H, Z, 0.0);
  tr.service = Grid2<double>(H, Z, service);
  tr.served = Grid2<double>(H, Z);
  for (std::size_t t = 0; t < H; ++t)
    for (std::size_t z = 0; z < Z; ++z) tr.served(t, z) = served[t][z];
  return tr;
}

GridConfig fixed_grid(double c_tr, double floor_kw) {
  GridConfig g;
  g.transformer_capacity_kw = c_tr;
  g.floor_kw = floor_kw;
  return g;
}

}  // namespace

TEST(BaseProfile, MorningPeakClosedForm) {
  GridConfig g;
  g.morning_amp_kw = 1.0;
  g.evening_amp_kw = 1.0;
  const double tail = std::exp(-0.5 * 10.5 * 10.5 / (2.5 * 2.5));
  EXPECT_NEAR(base_profile(9, g), 1.0 + tail, 1e-15);
  EXPECT_NEAR(base_profile_at(19.5, g), 1.0 + tail, 1e-15);
}

TEST(BaseProfile, FlatAndPeriodic) {
  GridConfig g;
  g.floor_kw = 42.0;
  for (std::size_t t = 0; t < 48; ++t) EXPECT_EQ(base_profile(t, g), 42.0);
  g.morning_amp_kw = 10;
  g.evening_amp_kw = 20;
  for (std::size_t t = 0; t < 48; ++t) EXPECT_EQ(base_profile(t, g), base_profile(t + 24, g));
  // Periodic wrap: 23:00 sees the morning bump from 9:00 the next day, not 14 h back.
  GridConfig m;
  m.morning_amp_kw = 1.0;
  m.morning_peak_h = 1.0;
  EXPECT_NEAR(base_profile(23, m), std::exp(-0.5 * 4.0 / 6.25), 1e-15);
}

TEST(EvLoad, Modes) {
  EXPECT_EQ(ev_load(served_path({{0, 0}, {0, 0}})), (std::vector<double>{0, 0}));
  EXPECT_EQ(ev_load(served_path({{50}})), (std::vector<double>{50}));
  const auto tr = served_path({{10, 20}, {90, 0}}, 100.0);
  const auto d = ev_load(tr, EvLoadMode::delivered), c = ev_load(tr, EvLoadMode::capacity_rate);
  for (std::size_t t = 0; t < d.size(); ++t) EXPECT_LE(d[t], c[t]);
  EXPECT_EQ(c[0], 200.0);
}

TEST(StressHours, Fixture) {
  EXPECT_EQ(stress_hours({0.7, 0.85, 0.9, 0.75}, 0.8), 2.0);
  EXPECT_EQ(stress_hours({0.1, 0.2}, 0.8), 0.0);
  EXPECT_EQ(stress_hours({0.8}, 0.8), 0.0);
  EXPECT_THROW(stress_hours({}, 0.8), Error);
}

TEST(StressHours, MatchesCountOracle) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> l(1 + rng.index(100));
    for (auto& v : l) v = rng.index(4) == 0 ? 0.8 : rng.uniform(0, 1.5);
    EXPECT_EQ(stress_hours(l, 0.8), oracle::count_above(l, 0.8));
  }
}

TEST(LoadSeries, LambdaIsTotalOverCapacity) {
  const auto tr = served_path({{10, 20}, {30, 5}, {0, 0}});
  const auto g = fixed_grid(250.0, 12.5);
  const auto s = load_series(tr, g, 24);
  double served = 0;
  for (double v : tr.served.raw()) served += v;
  double ev = 0;
  for (std::size_t t = 0; t < s.p_ev.size(); ++t) {
    EXPECT_EQ(s.p_total[t], s.p_base[t] + s.p_ev[t]);
    EXPECT_EQ(s.lambda[t], s.p_total[t] / 250.0);
    ev += s.p_ev[t];
  }
  EXPECT_EQ(ev, served);
  EXPECT_EQ(s.start_hour, 24u);
}

TEST(LoadSeries, LargerTransformerNeverAddsStress) {
  Rng rng(3);
  std::vector<std::vector<double>> served(100, std::vector<double>(3));
  for (auto& r : served)
    for (auto& v : r) v = rng.uniform(0, 100);
  const auto tr = served_path(served);
  double prev = 1e9;
  for (double c : {150.0, 200.0, 250.0, 300.0, 400.0}) {
    const auto s = load_series(tr, fixed_grid(c, 20.0), 0);
    const double h = stress_hours(s.lambda, 0.8);
    EXPECT_LE(h, prev);
    prev = h;
  }
}

TEST(Calibration, BaseProfilePeaksAtTarget) {
  const auto tr = served_path({{10, 20}, {30, 5}, {0, 0}});
  const auto g = calibrate_grid(GridConfig{}, tr);
  const double mean = (30.0 + 35.0 + 0.0) / 3.0;
  EXPECT_NEAR(g.floor_kw, 2.0 * mean, 1e-12);
  double peak = 0;
  for (int i = 0; i < 24 * 600; ++i) peak = std::max(peak, base_profile_at(i / 600.0, g));
  EXPECT_NEAR(peak / g.transformer_capacity_kw, 0.7, 1e-6);
}

TEST(Calibration, ExplicitCapacityKept) {
  auto g = fixed_grid(500.0, 10.0);
  EXPECT_EQ(calibrate_grid(g, served_path({{1}})).transformer_capacity_kw, 500.0);
  EXPECT_THROW(calibrate_grid(GridConfig{}, served_path({{0}})), Error);
}

TEST(GridReport, SignConvention) {
  PolicySuite suite;
  suite.baseline = served_path({{10}, {10}, {10}, {10}});
  PolicyOutcome none, price;
  none.kind = PolicyKind::none;
  none.trajectory = served_path({{90}, {90}, {90}, {10}});
  price.kind = PolicyKind::price;
  price.trajectory = served_path({{90}, {10}, {10}, {10}});
  suite.outcomes = {none, price};
  const auto rep = grid_report(suite, fixed_grid(100.0, 1.0), 0);
  EXPECT_EQ(rep.get(PolicyKind::none).h_stress, 3.0);
  EXPECT_EQ(rep.get(PolicyKind::none).delta_h_stress, 0.0);
  EXPECT_EQ(rep.get(PolicyKind::price).h_stress, 1.0);
  EXPECT_EQ(rep.get(PolicyKind::price).delta_h_stress, 2.0);
}

TEST(GridReport, NeedsNoPolicyReference) {
  PolicySuite suite;
  suite.baseline = served_path({{10}});
  PolicyOutcome o;
  o.kind = PolicyKind::price;
  o.trajectory = served_path({{10}});
  suite.outcomes = {o};
  EXPECT_THROW(grid_report(suite, fixed_grid(100, 1), 0), Error);
}

TEST(GridReport, PriceSmoothsCapboostConcentrates) {
  const auto ctx = build_synthetic_context(42);
  const auto suite = run_policy_suite(ctx.scenario, ctx.forecasts, ctx.panel.capacity());
  const auto rep = grid_report(suite, ctx.grid, ctx.forecasts.start_hour);
  EXPECT_GE(rep.get(PolicyKind::price).delta_h_stress, rep.get(PolicyKind::capboost).delta_h_stress);
  EXPECT_EQ(rep.get(PolicyKind::none).delta_h_stress, 0.0);
  // The base profile alone never crosses the threshold.
  for (double l : rep.get(PolicyKind::none).series.p_base) EXPECT_LT(l / rep.config.transformer_capacity_kw, 0.8);
}

TEST(LoadSeries, CsvLayout) {
  const auto s = load_series(served_path({{50}}), fixed_grid(100, 0.5), 3);
  EXPECT_EQ(load_series_csv(s), "hour,p_base_kw,p_ev_kw,p_total_kw,lambda\n3,0.5,50,50.5,0.505\n");
}
