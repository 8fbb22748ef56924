#pragma once

#include <evres/panel.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace evres::forecast {

inline constexpr std::size_t kNumFeatures = 8;
inline constexpr std::size_t kDefaultLookback = 24;

// Feature column order within a window slice.
enum Feature : Eigen::Index { kLogVolume = 0, kTemp, kPressure, kCapacity, kHourSin, kHourCos, kDaySin, kDayCos };

// Training-split statistics for standardised inputs.
struct NormStats {
  double temp_mean = 0.0;
  double temp_std = 1.0;
  double capacity_mean = 0.0;
  double capacity_std = 1.0;
  double log_volume_scale = 1.0;  // divides log1p(V); no centring, so V = 0 stays 0

  static NormStats fit(const ZoneHourPanel& panel, std::size_t train_end) {
    if (train_end == 0 || train_end > panel.hours()) throw Error("training window out of range");
    NormStats s;
    double sum = 0.0, sq = 0.0;
    const double n = static_cast<double>(train_end * panel.zones());
    for (std::size_t t = 0; t < train_end; ++t)
      for (std::size_t z = 0; z < panel.zones(); ++z) sum += panel.temp_c()(t, z);
    s.temp_mean = sum / n;
    for (std::size_t t = 0; t < train_end; ++t)
      for (std::size_t z = 0; z < panel.zones(); ++z) sq += std::pow(panel.temp_c()(t, z) - s.temp_mean, 2);
    s.temp_std = std::sqrt(sq / n);
    if (!(s.temp_std > 0.0)) s.temp_std = 1.0;

    const auto& cap = panel.capacity();
    const double nz = static_cast<double>(cap.size());
    s.capacity_mean = std::accumulate(cap.begin(), cap.end(), 0.0) / nz;
    double csq = 0.0;
    for (double c : cap) csq += (c - s.capacity_mean) * (c - s.capacity_mean);
    s.capacity_std = std::sqrt(csq / nz);
    if (!(s.capacity_std > 0.0)) s.capacity_std = 1.0;

    double lv = 0.0;
    for (std::size_t t = 0; t < train_end; ++t)
      for (std::size_t z = 0; z < panel.zones(); ++z) lv += std::log1p(panel.demand()(t, z));
    s.log_volume_scale = lv / n > 0.0 ? lv / n : 1.0;
    return s;
  }
};

struct CyclicEncoding {
  double h_sin, h_cos, d_sin, d_cos;
};

// Hour-of-day and day-of-week phases from the absolute hour index.
inline CyclicEncoding cyclic_encoding(std::size_t hour_index) {
  const double h = static_cast<double>(hour_index % 24);
  const double d = static_cast<double>((hour_index / 24) % 7);
  return {std::sin(2.0 * M_PI * h / 24.0), std::cos(2.0 * M_PI * h / 24.0), std::sin(2.0 * M_PI * d / 7.0),
          std::cos(2.0 * M_PI * d / 7.0)};
}

// Lookback window ending at hour t (inclusive): slices[tau] is Z x 8 for hour t - L + 1 + tau.
struct FeatureWindow {
  std::size_t end_hour = 0;
  std::vector<Eigen::MatrixXd> slices;

  std::size_t lookback() const { return slices.size(); }
};

inline FeatureWindow featurize(const ZoneHourPanel& panel, std::size_t t, const NormStats& stats,
                               std::size_t lookback = kDefaultLookback) {
  if (t < lookback) throw Error("featurize: hour " + std::to_string(t) + " is inside the lookback of " + std::to_string(lookback));
  if (t >= panel.hours()) throw Error("featurize: hour beyond panel");
  const auto& s_mapped = panel.s_mapped();
  const auto Z = static_cast<Eigen::Index>(panel.zones());
  FeatureWindow w;
  w.end_hour = t;
  w.slices.reserve(lookback);
  for (std::size_t tau = 0; tau < lookback; ++tau) {
    const std::size_t hour = t + 1 + tau - lookback;
    const auto cyc = cyclic_encoding(hour);
    Eigen::MatrixXd x(Z, static_cast<Eigen::Index>(kNumFeatures));
    for (Eigen::Index z = 0; z < Z; ++z) {
      const auto zi = static_cast<std::size_t>(z);
      x(z, kLogVolume) = std::log1p(panel.demand()(hour, zi)) / stats.log_volume_scale;
      x(z, kTemp) = (panel.temp_c()(hour, zi) - stats.temp_mean) / stats.temp_std;
      x(z, kPressure) = s_mapped(hour, zi);
      x(z, kCapacity) = (panel.capacity()[zi] - stats.capacity_mean) / stats.capacity_std;
      x(z, kHourSin) = cyc.h_sin;
      x(z, kHourCos) = cyc.h_cos;
      x(z, kDaySin) = cyc.d_sin;
      x(z, kDayCos) = cyc.d_cos;
    }
    w.slices.push_back(std::move(x));
  }
  return w;
}

struct TailLossConfig {
  double alpha = 2.0;
  double beta_exp = 2.0;
  double w_slr = 1.0;
  double w_vol = 1.0;

  void validate() const {
    if (!(alpha >= 0.0)) throw Error("tail alpha must be non-negative");
    if (!(beta_exp > 0.0)) throw Error("tail exponent must be positive");
  }
};

inline double tail_weight(double s_mapped, const TailLossConfig& cfg = {}) {
  return 1.0 + cfg.alpha * std::pow(s_mapped, cfg.beta_exp);
}

}  // namespace evres::forecast
