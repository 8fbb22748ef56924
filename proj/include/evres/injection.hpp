#pragma once

#include <evres/common.hpp>
#include <evres/deliverability.hpp>
#include <evres/panel.hpp>

#include <vector>

namespace evres {

// Empirical CDF with linear interpolation between order statistics: the i-th
// order statistic (0-based) sits at rank i / (n - 1). Below the support F = 0,
// above it F = 1.
class EmpiricalCdf {
public:
  EmpiricalCdf() = default;

  explicit EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw Error("empirical CDF needs at least one sample");
    for (double v : sorted_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error("empirical CDF samples must be finite and non-negative");
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted_samples() const { return sorted_; }

  double operator()(double x) const {
    const std::size_t n = sorted_.size();
    if (x < sorted_.front()) return 0.0;
    if (n == 1 || x >= sorted_.back()) return 1.0;
    // Last order statistic <= x; it is never the final one here.
    const auto k = static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin()) - 1;
    const double lo = sorted_[k];
    const double hi = sorted_[k + 1];
    const double frac = hi > lo ? (x - lo) / (hi - lo) : 0.0;
    return (static_cast<double>(k) + frac) / static_cast<double>(n - 1);
  }

  double inverse(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile level must lie in [0,1]");
    const std::size_t n = sorted_.size();
    if (n == 1) return sorted_.front();
    const double pos = q * static_cast<double>(n - 1);
    const auto i = std::min(static_cast<std::size_t>(std::floor(pos)), n - 2);
    const double frac = pos - static_cast<double>(i);
    return sorted_[i] + frac * (sorted_[i + 1] - sorted_[i]);
  }

private:
  std::vector<double> sorted_;
};

inline EmpiricalCdf fit_ecdf(std::vector<double> samples) { return EmpiricalCdf(std::move(samples)); }

inline double inverse_cdf(const EmpiricalCdf& cdf, double q) { return cdf.inverse(q); }

// Anchored quantile map from the city-panel pressure domain into the telemetry
// pressure domain, rescaled so that s_raw = 1 lands on 1.
class PressureAligner {
public:
  static constexpr double kDefaultClamp = 3.0;

  PressureAligner(EmpiricalCdf target, EmpiricalCdf source, double s_max_lut = kDefaultClamp)
      : target_(std::move(target)), source_(std::move(source)), s_max_lut_(s_max_lut) {
    anchor_ = source_.inverse(target_(1.0));
    if (!(anchor_ > 0.0)) throw Error("degenerate aligner: anchor F_source^-1(F_target(1)) is zero");
    if (!(s_max_lut_ > 0.0)) throw Error("aligner clamp bound must be positive");
  }

  const EmpiricalCdf& target() const { return target_; }
  const EmpiricalCdf& source() const { return source_; }
  double anchor() const { return anchor_; }
  double s_max_lut() const { return s_max_lut_; }

  double quantile_map(double s_raw) const { return source_.inverse(target_(s_raw)); }

  double operator()(double s_raw) const {
    if (!(s_raw >= 0.0)) throw Error("s_raw must be non-negative");
    return std::clamp(quantile_map(s_raw) / anchor_, 0.0, s_max_lut_);
  }

private:
  EmpiricalCdf target_;
  EmpiricalCdf source_;
  double anchor_ = 1.0;
  double s_max_lut_ = kDefaultClamp;
};

inline double anchored_map(const PressureAligner& aligner, double s_raw) { return aligner(s_raw); }

// Telemetry-side pressures for the source CDF. Zero-request records carry no
// pressure information about contention and are kept (s = 0 is a valid state).
inline std::vector<double> telemetry_pressures(const std::vector<TelemetryRecord>& records, const StationConfig& cfg) {
  std::vector<double> s;
  s.reserve(records.size());
  for (const auto& r : records) s.push_back(compute_pressure(r.p_req, cfg.p_cap));
  return s;
}

// Target CDF samples: s_raw over the training hours [0, train_end).
inline std::vector<double> training_pressures(const ZoneHourPanel& panel, std::size_t train_end) {
  if (train_end == 0 || train_end > panel.hours()) throw Error("training window out of range");
  std::vector<double> s;
  s.reserve(train_end * panel.zones());
  for (std::size_t t = 0; t < train_end; ++t)
    for (std::size_t z = 0; z < panel.zones(); ++z) s.push_back(panel.s_raw()(t, z));
  return s;
}

inline PressureAligner fit_aligner(const ZoneHourPanel& panel, std::size_t train_end, const std::vector<TelemetryRecord>& telemetry,
                                   const StationConfig& cfg) {
  return PressureAligner(fit_ecdf(training_pressures(panel, train_end)), fit_ecdf(telemetry_pressures(telemetry, cfg)));
}

inline double injected_slr(const DeliverabilityLut& lut, const PressureAligner& aligner, double temp_c, double s_raw) {
  return 1.0 - lut_query(lut, temp_c, aligner(s_raw));
}

// A1: anchored quantile map then LUT lookup for every zone-hour.
inline ZoneHourPanel inject_panel(const ZoneHourPanel& panel, const DeliverabilityLut& lut, const PressureAligner& aligner) {
  Grid2<double> s_mapped(panel.hours(), panel.zones()), slr(panel.hours(), panel.zones());
  for (std::size_t t = 0; t < panel.hours(); ++t)
    for (std::size_t z = 0; z < panel.zones(); ++z) {
      const double sm = aligner(panel.s_raw()(t, z));
      s_mapped(t, z) = sm;
      slr(t, z) = 1.0 - lut_query(lut, panel.temp_c()(t, z), sm);
    }
  return panel.with_injection(std::move(s_mapped), std::move(slr));
}

// A0 ablation rule: eta = min(1, 1/s_raw), with eta = 1 at zero pressure.
inline double baseline_a0(double s_raw) {
  if (!(s_raw >= 0.0)) throw Error("s_raw must be non-negative");
  if (s_raw <= 1.0) return 0.0;
  return 1.0 - 1.0 / s_raw;
}

// A0 panel: no alignment, so s_mapped carries s_raw unchanged.
inline ZoneHourPanel inject_panel_a0(const ZoneHourPanel& panel) {
  Grid2<double> s_mapped = panel.s_raw();
  Grid2<double> slr(panel.hours(), panel.zones());
  for (std::size_t i = 0; i < slr.raw().size(); ++i) slr.raw()[i] = baseline_a0(s_mapped.raw()[i]);
  return panel.with_injection(std::move(s_mapped), std::move(slr));
}

}  // namespace evres
