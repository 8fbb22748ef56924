#pragma once

#include <evres/common.hpp>
#include <evres/deliverability.hpp>
#include <evres/panel.hpp>

#include <functional>
#include <string>
#include <vector>

namespace evres {

// Ground-truth deliverability law eta*(T, s) used to drive synthetic telemetry.
struct DeliverabilityLaw {
  std::string name;
  std::function<double(double temp_c, double s)> eval;

  double operator()(double temp_c, double s) const { return eval(temp_c, s); }

  static DeliverabilityLaw constant(double eta) {
    return {"constant", [eta](double, double) { return eta; }};
  }

  static DeliverabilityLaw inverse_pressure() {
    return {"inverse_pressure", [](double, double s) { return s <= 1.0 ? 1.0 : 1.0 / s; }};
  }

  // One knot list per temperature bin of `grid`; linear between knots, flat
  // outside them. Knots must be sorted by pressure.
  struct Knot {
    double s;
    double eta;
  };

  static DeliverabilityLaw piecewise(BinGrid grid, std::vector<std::vector<Knot>> rows) {
    if (rows.size() != grid.temp_bins()) throw Error("piecewise law needs one knot row per temperature bin");
    for (const auto& r : rows) {
      if (r.empty()) throw Error("piecewise law row has no knots");
      for (std::size_t i = 1; i < r.size(); ++i)
        if (!(r[i].s > r[i - 1].s)) throw Error("piecewise law knots must be strictly increasing in s");
    }
    return {"piecewise", [grid = std::move(grid), rows = std::move(rows)](double temp_c, double s) {
              const auto& r = rows[grid.temp_bin(temp_c)];
              if (s <= r.front().s) return r.front().eta;
              if (s >= r.back().s) return r.back().eta;
              for (std::size_t i = 1; i < r.size(); ++i)
                if (s <= r[i].s) {
                  const double f = (s - r[i - 1].s) / (r[i].s - r[i - 1].s);
                  return r[i - 1].eta + f * (r[i].eta - r[i - 1].eta);
                }
              return r.back().eta;
            }};
  }

  // Thermal derating at the cold and hot ends; full delivery below a knee,
  // degrading through the capacity boundary and into overload.
  static DeliverabilityLaw standard(const BinGrid& grid = {}) {
    struct Row {
      double knee, at_one, at_three;
    };
    const std::vector<Row> table = {
        {0.30, 0.74, 0.28}, {0.35, 0.79, 0.31}, {0.40, 0.84, 0.34}, {0.45, 0.87, 0.36},
        {0.45, 0.87, 0.36}, {0.40, 0.84, 0.34}, {0.35, 0.80, 0.32},
    };
    if (grid.temp_bins() != table.size()) throw Error("standard law is defined on the 7-bin temperature grid");
    std::vector<std::vector<Knot>> rows;
    for (const auto& r : table) rows.push_back({{0.0, 1.0}, {r.knee, 1.0}, {1.0, r.at_one}, {3.0, r.at_three}});
    auto law = piecewise(grid, std::move(rows));
    law.name = "standard";
    return law;
  }
};

// Rejects laws that leave [0,1] or increase with pressure at any temperature.
inline void validate_law(const DeliverabilityLaw& law, const BinGrid& grid) {
  std::vector<double> temps;
  for (std::size_t i = 0; i < grid.temp_bins(); ++i) {
    temps.push_back(grid.temp_edges()[i]);
    temps.push_back(grid.temp_center(i));
  }
  const double s_hi = grid.pressure_edges().back();
  for (double temp : temps) {
    double prev = 2.0;
    for (int i = 0; i <= 2000; ++i) {
      const double s = s_hi * i / 2000.0;
      const double v = law(temp, s);
      if (!(v >= 0.0 && v <= 1.0))
        throw Error("ground-truth law outside [0,1] at T=" + format_double(temp) + ", s=" + format_double(s));
      if (v > prev + 1e-12)
        throw Error("ground-truth law is not monotone non-increasing in s at T=" + format_double(temp) +
                    ", s=" + format_double(s));
      prev = v;
    }
  }
}

struct SamplePoint {
  double temp_c;
  double s;
};

struct SynthTelemetrySpec {
  DeliverabilityLaw law = DeliverabilityLaw::standard();
  BinGrid grid{};
  StationConfig station{};
  std::size_t samples_per_cell = 30;
  double noise = 0.02;  // multiplicative uniform in [1-noise, 1+noise]
  std::size_t stations = 4;
  std::int64_t start_minute = 0;
  // When non-empty, sample only these points instead of every bin center.
  std::vector<SamplePoint> points;
};

inline std::vector<TelemetryRecord> generate_synthetic_telemetry(const SynthTelemetrySpec& spec, std::uint64_t seed) {
  spec.station.validate();
  validate_law(spec.law, spec.grid);
  if (spec.noise < 0.0 || spec.noise >= 1.0) throw Error("telemetry noise must lie in [0,1)");
  std::vector<SamplePoint> points = spec.points;
  if (points.empty())
    for (std::size_t t = 0; t < spec.grid.temp_bins(); ++t)
      for (std::size_t k = 0; k < spec.grid.pressure_bins(); ++k)
        points.push_back({spec.grid.temp_center(t), spec.grid.pressure_center(k)});

  Rng rng(seed);
  std::vector<TelemetryRecord> out;
  out.reserve(points.size() * spec.samples_per_cell);
  std::int64_t minute = spec.start_minute;
  const std::size_t nstations = std::max<std::size_t>(spec.stations, 1);
  for (const auto& pt : points) {
    const double eta = spec.law(pt.temp_c, pt.s);
    const double p_req = pt.s * spec.station.p_cap;
    for (std::size_t i = 0; i < spec.samples_per_cell; ++i) {
      const double u = spec.noise > 0.0 ? rng.uniform(1.0 - spec.noise, 1.0 + spec.noise) : 1.0;
      TelemetryRecord r;
      r.timestamp = minute++;
      r.station_id = "ST" + std::to_string(out.size() % nstations + 1);
      r.temp_c = pt.temp_c;
      r.p_req = p_req;
      r.p_real = std::clamp(eta * u, 0.0, 1.0) * p_req;
      r.p_set = std::min(p_req, eta * (1.0 + spec.noise) * p_req);
      r.p_set = std::max(r.p_set, r.p_real);
      out.push_back(std::move(r));
    }
  }
  return out;
}

// Desk-scale stand-in for a city panel: double-peak diurnal demand, a subset of
// persistently busy zones, and a slow temperature drift.
struct SynthPanelSpec {
  std::size_t zones = 20;
  std::size_t hours = 816;  // 34 days: one day of history plus a 792 h horizon
  double area_km = 16.0;
  double capacity_min = 150.0;
  double capacity_max = 450.0;
  double util_min = 0.45;
  double util_max = 0.70;
  double hot_fraction = 0.15;
  double hot_util_min = 0.94;
  double hot_util_max = 0.96;
  double hot_trough = 0.85;
  double trough = 0.35;
  double morning_peak_h = 8.5;
  double evening_peak_h = 18.5;
  double peak_width_h = 2.5;
  double morning_weight = 0.8;
  double evening_weight = 1.0;
  double weekend_factor = 0.9;
  double noise = 0.05;
  double temp_mean = 16.0;
  double temp_daily_amp = 5.0;
  double temp_trend_per_day = -0.3;
  double temp_zone_spread = 2.0;
  double temp_noise = 0.5;
  double max_pressure = 0.97;
};

inline double periodic_bump(double hour, double center, double width) {
  double d = std::fmod(std::abs(hour - center), 24.0);
  d = std::min(d, 24.0 - d);
  return std::exp(-0.5 * d * d / (width * width));
}

inline double diurnal_shape(double hour, double trough, const SynthPanelSpec& spec) {
  const double bumps = spec.morning_weight * periodic_bump(hour, spec.morning_peak_h, spec.peak_width_h) +
                       spec.evening_weight * periodic_bump(hour, spec.evening_peak_h, spec.peak_width_h);
  return trough + (1.0 - trough) * std::min(1.0, bumps);
}

inline ZoneHourPanel generate_synthetic_panel(const SynthPanelSpec& spec, std::uint64_t seed) {
  if (spec.zones == 0 || spec.hours == 0) throw Error("synthetic panel needs Z > 0 and T > 0");
  if (!(spec.capacity_min > 0.0) || spec.capacity_max < spec.capacity_min) throw Error("invalid capacity range");
  if (!(spec.max_pressure > 0.0)) throw Error("max_pressure must be positive");
  Rng rng(seed);
  const std::size_t Z = spec.zones;
  const std::size_t T = spec.hours;
  const auto hot = static_cast<std::size_t>(std::round(spec.hot_fraction * static_cast<double>(Z)));

  std::vector<double> capacity(Z), util(Z), trough(Z), temp_offset(Z);
  std::vector<ZoneCoord> coords(Z);
  for (std::size_t z = 0; z < Z; ++z) {
    coords[z] = {rng.uniform(0.0, spec.area_km), rng.uniform(0.0, spec.area_km)};
    capacity[z] = rng.uniform(spec.capacity_min, spec.capacity_max);
    // Busy zones are spread through the index range rather than clustered at the front.
    const bool is_hot = hot > 0 && (z * hot) / Z != ((z + 1) * hot) / Z;
    util[z] = is_hot ? rng.uniform(spec.hot_util_min, spec.hot_util_max) : rng.uniform(spec.util_min, spec.util_max);
    trough[z] = is_hot ? spec.hot_trough : spec.trough;
    temp_offset[z] = rng.uniform(-spec.temp_zone_spread, spec.temp_zone_spread);
  }

  Grid2<double> demand(T, Z), temp(T, Z);
  for (std::size_t t = 0; t < T; ++t) {
    const double hour = static_cast<double>(t % 24);
    const double day = static_cast<double>(t / 24);
    const bool weekend = (t / 24) % 7 >= 5;
    const double temp_base = spec.temp_mean + spec.temp_trend_per_day * day +
                             spec.temp_daily_amp * std::sin(2.0 * M_PI * (hour - 9.0) / 24.0);
    for (std::size_t z = 0; z < Z; ++z) {
      const double shape = diurnal_shape(hour, trough[z], spec) * (weekend ? spec.weekend_factor : 1.0);
      const double u = spec.noise > 0.0 ? 1.0 + spec.noise * (2.0 * rng.uniform() - 1.0) : 1.0;
      demand(t, z) = std::min(capacity[z] * spec.max_pressure, capacity[z] * util[z] * shape * u);
      const double tn = spec.temp_noise > 0.0 ? spec.temp_noise * rng.normal() : 0.0;
      temp(t, z) = temp_base + temp_offset[z] + tn;
    }
  }
  return ZoneHourPanel(std::move(demand), std::move(temp), std::move(capacity), std::move(coords));
}

}  // namespace evres
