#pragma once

#include <evres/deliverability.hpp>
#include <evres/forecast/evaluate.hpp>
#include <evres/gridcouple.hpp>
#include <evres/injection.hpp>
#include <evres/panel.hpp>
#include <evres/resilience.hpp>
#include <evres/synthetic.hpp>

#include <cstdint>
#include <vector>

namespace evres {

// Everything the downstream stages need, built once and then read-only.
struct Context {
  std::uint64_t seed = 0;
  StationConfig station;
  std::vector<TelemetryRecord> telemetry;
  DeliverabilityLut lut{BinGrid{}, Grid2<double>(7, 30, 1.0), Grid2<std::size_t>(7, 30, 0)};
  ZoneHourPanel panel;     // un-injected
  SplitIndex split;
  std::optional<PressureAligner> aligner;
  ZoneHourPanel injected;  // A1 labels
  forecast::Forecasts forecasts;
  ScenarioSpec scenario;   // defaults with the horizon fitted to the forecasts
  GridConfig grid;

  forecast::Injector injector() const { return forecast::Injector::a1(lut, *aligner); }
};

// Forecast start: one day of history for the persistence rule.
inline constexpr std::size_t kDefaultForecastStart = 24;

struct SyntheticSetup {
  SynthTelemetrySpec telemetry{};
  SynthPanelSpec panel{};
  std::size_t forecast_start = kDefaultForecastStart;
};

// Downstream defaults for a panel of the given length: the horizon is however
// much forecast the panel supports, the shock window keeps its default place.
inline ScenarioSpec default_scenario(std::size_t horizon) {
  ScenarioSpec sc;
  sc.horizon = horizon;
  if (sc.shock_end > horizon) throw Error("panel too short for the default shock window");
  return sc;
}

inline Context build_context(std::uint64_t seed, std::vector<TelemetryRecord> telemetry, ZoneHourPanel panel,
                             const StationConfig& station = {}, std::size_t forecast_start = kDefaultForecastStart) {
  Context c;
  c.seed = seed;
  c.station = station;
  c.telemetry = std::move(telemetry);
  c.lut = fit_lut(c.telemetry, station);
  c.panel = panel.without_injection();
  c.split = SplitIndex::chronological(c.panel.hours());
  c.aligner = fit_aligner(c.panel, c.split.train_end, c.telemetry, station);
  c.injected = inject_panel(c.panel, c.lut, *c.aligner);
  if (forecast_start >= c.panel.hours()) throw Error("forecast start beyond the panel");
  c.forecasts = forecast::persistence_forecasts(c.panel, c.injector(), forecast_start, c.panel.hours() - forecast_start);
  c.scenario = default_scenario(c.forecasts.horizon());
  return c;
}

inline Context build_synthetic_context(std::uint64_t seed, const SyntheticSetup& setup = {}) {
  auto telemetry = generate_synthetic_telemetry(setup.telemetry, derive_seed(seed, "telemetry"));
  auto panel = generate_synthetic_panel(setup.panel, derive_seed(seed, "panel"));
  return build_context(seed, std::move(telemetry), std::move(panel), setup.telemetry.station, setup.forecast_start);
}

}  // namespace evres
