#include <evres/forecast/evaluate.hpp>
#include <evres/injection.hpp>
#include <evres/synthetic.hpp>

#include "support.hpp"

#include <gtest/gtest.h>

using namespace evres;

namespace {

// Independent ECDF: sort, find bracketing order statistics, interpolate ranks.
double ecdf_oracle(std::vector<double> xs, double x) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (x < xs[0]) return 0.0;
  if (x >= xs[n - 1]) return 1.0;
  std::size_t k = 0;
  while (k + 1 < n && xs[k + 1] <= x) ++k;
  return (static_cast<double>(k) + (x - xs[k]) / (xs[k + 1] - xs[k])) / static_cast<double>(n - 1);
}

std::vector<double> random_samples(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.uniform() * rng.uniform(0.5, 1.5);
  return v;
}

DeliverabilityLut constant_lut(double eta) {
  const BinGrid g;
  return DeliverabilityLut(g, Grid2<double>(g.temp_bins(), g.pressure_bins(), eta), Grid2<std::size_t>(g.temp_bins(), g.pressure_bins(), 30));
}

}  // namespace

TEST(Ecdf, Examples) {
  const auto F = fit_ecdf({1, 2, 3});
  EXPECT_DOUBLE_EQ(F(2), 0.5);
  EXPECT_DOUBLE_EQ(F(0.5), 0.0);
  EXPECT_DOUBLE_EQ(F(3), 1.0);
  EXPECT_DOUBLE_EQ(F(10), 1.0);
  EXPECT_DOUBLE_EQ(F(1.5), 0.25);
}

TEST(Ecdf, MatchesSortInterpolateOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto xs = random_samples(rng, 2 + rng.index(50), 2.0);
    const auto F = fit_ecdf(xs);
    for (int i = 0; i < 50; ++i) {
      const double x = rng.uniform(-0.1, 3.1);
      EXPECT_NEAR(F(x), ecdf_oracle(xs, x), 1e-12);
    }
  }
}

TEST(Ecdf, RejectsBadSamples) {
  EXPECT_THROW(fit_ecdf({}), Error);
  EXPECT_THROW(fit_ecdf({1, -1}), Error);
}

TEST(InverseCdf, Boundaries) {
  const auto F = fit_ecdf({3, 1, 2});
  EXPECT_DOUBLE_EQ(inverse_cdf(F, 0), 1.0);
  EXPECT_DOUBLE_EQ(inverse_cdf(F, 1), 3.0);
  EXPECT_DOUBLE_EQ(inverse_cdf(F, 0.5), 2.0);
  EXPECT_THROW(inverse_cdf(F, 1.5), Error);
}

TEST(InverseCdf, RoundTripInteriorPoints) {
  Rng rng(5);
  auto xs = random_samples(rng, 200, 3.0);
  const auto F = fit_ecdf(xs);
  const auto& s = F.sorted_samples();
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(s.front(), s.back());
    EXPECT_NEAR(inverse_cdf(F, F(x)), x, 1e-9);
  }
}

TEST(Aligner, CapacityBoundaryMapsToItself) {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const PressureAligner a(fit_ecdf(random_samples(rng, 300, 1.2)), fit_ecdf(random_samples(rng, 500, 3.0)));
    EXPECT_NEAR(anchored_map(a, 1.0), 1.0, 1e-9);
  }
}

TEST(Aligner, ZeroToZero) {
  const PressureAligner a(fit_ecdf({0, 0.5, 1.0, 1.5}), fit_ecdf({0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(anchored_map(a, 0.0), 0.0);
}

TEST(Aligner, IdenticalDistributionsIsIdentity) {
  const std::vector<double> xs = {0.0, 0.3, 0.7, 1.0, 1.4, 2.0};
  const PressureAligner a(fit_ecdf(xs), fit_ecdf(xs));
  EXPECT_DOUBLE_EQ(a.anchor(), 1.0);
  for (double x : {0.0, 0.2, 0.5, 1.0, 1.7, 2.0}) EXPECT_NEAR(anchored_map(a, x), x, 1e-12);
}

TEST(Aligner, DegenerateAnchorRejected) {
  EXPECT_THROW(PressureAligner(fit_ecdf({0.5, 2.0}), fit_ecdf({0.0, 0.0, 0.0})), Error);
}

TEST(Aligner, ClampsToLutRange) {
  const PressureAligner a(fit_ecdf({0.0, 1.0, 1.1}), fit_ecdf({0.0, 1.0, 9.0}));
  EXPECT_DOUBLE_EQ(anchored_map(a, 5.0), PressureAligner::kDefaultClamp);
}

TEST(Aligner, PreservesRankOrder) {
  Rng rng(13);
  const PressureAligner a(fit_ecdf(random_samples(rng, 400, 1.1)), fit_ecdf(random_samples(rng, 400, 3.0)));
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(0, 1.5), y = rng.uniform(0, 1.5);
    if (x <= y) {
      EXPECT_LE(a(x), a(y));
    } else {
      EXPECT_GE(a(x), a(y));
    }
  }
}

TEST(Inject, TinyPressureHasNoLoss) {
  SynthTelemetrySpec spec;
  spec.noise = 0.0;
  const auto tel = generate_synthetic_telemetry(spec, 1);
  const auto lut = fit_lut(tel, spec.station);
  const auto panel = evres::testing::small_panel(10, 2, {1, 50, 60, 70, 80, 90, 40, 30, 20, 10});
  const auto aligner = fit_aligner(panel, 7, tel, spec.station);
  const auto inj = inject_panel(panel, lut, aligner);
  EXPECT_DOUBLE_EQ(inj.slr()(0, 0), 0.0);
}

TEST(Inject, ConstantLutGivesComplement) {
  const auto panel = evres::testing::small_panel(6, 2, {10, 20, 30, 40, 50, 60});
  const PressureAligner a(fit_ecdf({0.1, 0.5, 1.0}), fit_ecdf({0.2, 1.0, 2.0}));
  const auto inj = inject_panel(panel, constant_lut(0.8), a);
  for (double v : inj.slr().raw()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Inject, MatchesInversePressureOracle) {
  SynthTelemetrySpec tspec;
  tspec.law = DeliverabilityLaw::inverse_pressure();
  tspec.noise = 0.0;
  const auto tel = generate_synthetic_telemetry(tspec, 2);
  const auto lut = fit_lut(tel, tspec.station);
  SynthPanelSpec pspec;
  pspec.hours = 200;
  const auto panel = generate_synthetic_panel(pspec, 3);
  const auto aligner = fit_aligner(panel, 140, tel, tspec.station);
  const auto inj = inject_panel(panel, lut, aligner);
  // The LUT holds the law at bin centres, so the oracle evaluates the law there.
  for (std::size_t t = 0; t < panel.hours(); ++t)
    for (std::size_t z = 0; z < panel.zones(); ++z) {
      const double sm = inj.s_mapped()(t, z);
      const double centre = lut.grid().pressure_center(lut.grid().pressure_bin(sm));
      EXPECT_NEAR(inj.slr()(t, z), 1.0 - std::min(1.0, 1.0 / centre), 1e-12);
    }
}

TEST(BaselineA0, Examples) {
  EXPECT_DOUBLE_EQ(baseline_a0(2.0), 0.5);
  EXPECT_DOUBLE_EQ(baseline_a0(0.5), 0.0);
  EXPECT_DOUBLE_EQ(baseline_a0(0.0), 0.0);
  EXPECT_DOUBLE_EQ(baseline_a0(1.0), 0.0);
  EXPECT_THROW(baseline_a0(-0.1), Error);
}

TEST(BaselineA0, PanelUsesRawPressure) {
  const auto panel = evres::testing::small_panel(2, 1, {200, 50});
  const auto inj = inject_panel_a0(panel);
  EXPECT_DOUBLE_EQ(inj.slr()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(inj.slr()(1, 0), 0.0);
  EXPECT_EQ(inj.s_mapped(), panel.s_raw());
}

TEST(StressMonotonicity, InjectionLayerIsRankPerfect) {
  SynthTelemetrySpec tspec;
  const auto tel = generate_synthetic_telemetry(tspec, 4);
  const auto lut = fit_lut(tel, tspec.station);
  SynthPanelSpec pspec;
  pspec.hours = 240;
  const auto panel = generate_synthetic_panel(pspec, 5);
  const auto inj = forecast::Injector::a1(lut, fit_aligner(panel, 168, tel, tspec.station));
  const auto r = forecast::stress_response(panel, forecast::injection_predictor(inj));
  EXPECT_DOUBLE_EQ(r.spearman_rho, 1.0);
  EXPECT_TRUE(r.monotone);
  ASSERT_TRUE(r.tail_amplification.has_value());
  EXPECT_GT(*r.tail_amplification, 0.0);
}
