#pragma once

#include <evres/common.hpp>
#include <evres/csv.hpp>
#include <evres/resilience.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace evres {

// Feeder model behind one representative transformer. Active power only.
struct GridConfig {
  double transformer_capacity_kw = 0.0;  // <= 0: calibrate from the base profile
  double stress_threshold = 0.8;
  double calibration_peak_lambda = 0.7;

  double floor_kw = 0.0;
  double morning_amp_kw = 0.0;
  double evening_amp_kw = 0.0;
  double morning_peak_h = 9.0;
  double evening_peak_h = 19.5;
  double width_h = 2.5;

  // Base-profile scale relative to the mean no-shock EV load, used when the
  // absolute amplitudes above are all zero.
  double floor_rel = 2.0;
  double morning_rel = 1.0;
  double evening_rel = 1.4;

  void validate() const {
    if (!(transformer_capacity_kw > 0.0)) throw Error("transformer capacity must be positive");
    if (!(stress_threshold > 0.0 && stress_threshold < 1.0)) throw Error("stress threshold must lie in (0,1)");
  }
};

// Floor plus two periodic Gaussian bumps; `hour` is a (fractional) hour of day.
inline double base_profile_at(double hour, const GridConfig& cfg) {
  auto bump = [&](double center) {
    double d = std::fmod(std::abs(hour - center), 24.0);
    d = std::min(d, 24.0 - d);
    return std::exp(-0.5 * d * d / (cfg.width_h * cfg.width_h));
  };
  return cfg.floor_kw + cfg.morning_amp_kw * bump(cfg.morning_peak_h) + cfg.evening_amp_kw * bump(cfg.evening_peak_h);
}

inline double base_profile(std::size_t hour_index, const GridConfig& cfg) {
  return base_profile_at(static_cast<double>(hour_index % 24), cfg);
}

enum class EvLoadMode { delivered, capacity_rate };

// kWh per hour summed over zones equals average kW at one-hour steps.
inline std::vector<double> ev_load(const BacklogTrajectory& tr, EvLoadMode mode = EvLoadMode::delivered) {
  const auto& src = mode == EvLoadMode::delivered ? tr.served : tr.service;
  std::vector<double> p(src.rows(), 0.0);
  for (std::size_t t = 0; t < src.rows(); ++t)
    for (std::size_t z = 0; z < src.cols(); ++z) p[t] += src(t, z);
  return p;
}

// Strict exceedance count times the one-hour step.
inline double stress_hours(const std::vector<double>& lambda, double threshold) {
  if (lambda.empty()) throw Error("stress_hours of an empty series");
  double h = 0.0;
  for (double l : lambda)
    if (l > threshold) h += ZoneHourPanel::kDeltaT;
  return h;
}

struct LoadSeries {
  std::size_t start_hour = 0;
  std::vector<double> p_base;
  std::vector<double> p_ev;
  std::vector<double> p_total;
  std::vector<double> lambda;
};

inline LoadSeries load_series(const BacklogTrajectory& tr, const GridConfig& cfg, std::size_t start_hour,
                              EvLoadMode mode = EvLoadMode::delivered) {
  cfg.validate();
  LoadSeries s;
  s.start_hour = start_hour;
  s.p_ev = ev_load(tr, mode);
  for (std::size_t t = 0; t < s.p_ev.size(); ++t) {
    s.p_base.push_back(base_profile(start_hour + t, cfg));
    s.p_total.push_back(s.p_base.back() + s.p_ev[t]);
    s.lambda.push_back(s.p_total.back() / cfg.transformer_capacity_kw);
  }
  return s;
}

// Fills base-profile amplitudes (when unset) from the mean delivered EV load
// of the reference run, then sizes the transformer so the base profile alone
// peaks at the calibration loading.
inline GridConfig calibrate_grid(GridConfig cfg, const BacklogTrajectory& reference) {
  if (cfg.floor_kw == 0.0 && cfg.morning_amp_kw == 0.0 && cfg.evening_amp_kw == 0.0) {
    const auto p = ev_load(reference, EvLoadMode::delivered);
    const double mean = p.empty() ? 0.0 : std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
    cfg.floor_kw = cfg.floor_rel * mean;
    cfg.morning_amp_kw = cfg.morning_rel * mean;
    cfg.evening_amp_kw = cfg.evening_rel * mean;
  }
  if (!(cfg.transformer_capacity_kw > 0.0)) {
    // Minute resolution: the evening peak sits between whole hours.
    double peak = 0.0;
    for (int i = 0; i < 24 * 60; ++i) peak = std::max(peak, base_profile_at(i / 60.0, cfg));
    if (!(peak > 0.0)) throw Error("cannot calibrate transformer capacity from a zero base profile");
    cfg.transformer_capacity_kw = peak / cfg.calibration_peak_lambda;
  }
  cfg.validate();
  return cfg;
}

struct GridPolicyResult {
  PolicyKind kind = PolicyKind::none;
  double h_stress = 0.0;
  double delta_h_stress = 0.0;  // positive = fewer stress hours than no-policy
  double peak_lambda = 0.0;
  LoadSeries series;
};

struct GridReport {
  GridConfig config;
  std::vector<GridPolicyResult> policies;

  const GridPolicyResult& get(PolicyKind k) const {
    for (const auto& p : policies)
      if (p.kind == k) return p;
    throw Error(std::string("policy not in grid report: ") + to_string(k));
  }
};

inline GridReport grid_report(const PolicySuite& suite, const GridConfig& cfg, std::size_t start_hour,
                              EvLoadMode mode = EvLoadMode::delivered) {
  GridReport rep;
  rep.config = calibrate_grid(cfg, suite.baseline);
  for (const auto& o : suite.outcomes) {
    GridPolicyResult r;
    r.kind = o.kind;
    r.series = load_series(o.trajectory, rep.config, start_hour, mode);
    r.h_stress = stress_hours(r.series.lambda, rep.config.stress_threshold);
    r.peak_lambda = *std::max_element(r.series.lambda.begin(), r.series.lambda.end());
    rep.policies.push_back(std::move(r));
  }
  double none_h = 0.0;
  bool have_none = false;
  for (const auto& r : rep.policies)
    if (r.kind == PolicyKind::none) none_h = r.h_stress, have_none = true;
  if (!have_none) throw Error("grid report needs the no-policy scenario as reference");
  for (auto& r : rep.policies) r.delta_h_stress = none_h - r.h_stress;
  return rep;
}

inline std::string load_series_csv(const LoadSeries& s) {
  csv::Writer w({"hour", "p_base_kw", "p_ev_kw", "p_total_kw", "lambda"});
  for (std::size_t t = 0; t < s.p_ev.size(); ++t) {
    w.cell(s.start_hour + t).cell(s.p_base[t]).cell(s.p_ev[t]).cell(s.p_total[t]).cell(s.lambda[t]);
    w.end_row();
  }
  return w.str();
}

}  // namespace evres
