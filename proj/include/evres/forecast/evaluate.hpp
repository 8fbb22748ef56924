#pragma once

#include <evres/common.hpp>
#include <evres/deliverability.hpp>
#include <evres/forecast/train.hpp>
#include <evres/injection.hpp>
#include <evres/panel.hpp>

#include <functional>
#include <optional>
#include <vector>

namespace evres::forecast {

// SLR labelling for either ablation arm: A1 maps pressure through the aligner
// and LUT, A0 applies the inverse-pressure rule to raw pressure.
class Injector {
public:
  static Injector a1(DeliverabilityLut lut, PressureAligner aligner) {
    Injector i;
    i.lut_ = std::move(lut);
    i.aligner_ = std::move(aligner);
    return i;
  }
  static Injector a0() { return Injector{}; }

  bool physics() const { return lut_.has_value(); }

  double slr(double temp_c, double s_raw) const {
    if (!lut_) return baseline_a0(s_raw);
    return 1.0 - lut_query(*lut_, temp_c, (*aligner_)(s_raw));
  }

  ZoneHourPanel inject(const ZoneHourPanel& panel) const {
    return lut_ ? inject_panel(panel, *lut_, *aligner_) : inject_panel_a0(panel);
  }

private:
  std::optional<DeliverabilityLut> lut_;
  std::optional<PressureAligner> aligner_;
};

// Forecast series over a simulation horizon, indexed [step][zone]; step k
// forecasts panel hour start_hour + k.
struct Forecasts {
  std::size_t start_hour = 0;
  Grid2<double> vol;  // kWh
  Grid2<double> slr;

  std::size_t horizon() const { return vol.rows(); }
  std::size_t zones() const { return vol.cols(); }
};

struct PersistencePoint {
  std::vector<double> vol;
  std::vector<double> slr;
};

// Same hour yesterday (previous hour inside the first day); SLR recomputed from
// the forecast pressure with the frozen injector.
inline PersistencePoint persistence_baseline(const ZoneHourPanel& panel, const Injector& inj, std::size_t t) {
  if (t < 1 || t >= panel.hours()) throw Error("persistence forecast needs 1 <= t < T (insufficient history)");
  const std::size_t src = t >= 24 ? t - 24 : t - 1;
  PersistencePoint out;
  for (std::size_t z = 0; z < panel.zones(); ++z) {
    const double v = panel.demand()(src, z);
    out.vol.push_back(v);
    out.slr.push_back(inj.slr(panel.temp_c()(t, z), v / (panel.capacity()[z] * ZoneHourPanel::kDeltaT)));
  }
  return out;
}

inline Forecasts persistence_forecasts(const ZoneHourPanel& panel, const Injector& inj, std::size_t start_hour,
                                       std::size_t horizon) {
  if (start_hour + horizon > panel.hours()) throw Error("forecast horizon extends beyond the panel");
  Forecasts f;
  f.start_hour = start_hour;
  f.vol = Grid2<double>(horizon, panel.zones());
  f.slr = Grid2<double>(horizon, panel.zones());
  for (std::size_t k = 0; k < horizon; ++k) {
    const auto pt = persistence_baseline(panel, inj, start_hour + k);
    for (std::size_t z = 0; z < panel.zones(); ++z) {
      f.vol(k, z) = pt.vol[z];
      f.slr(k, z) = pt.slr[z];
    }
  }
  return f;
}

// One-step-ahead model forecasts for hours [start_hour, start_hour + horizon).
inline Forecasts model_forecasts(const TrainedModel& model, const ZoneHourPanel& injected, const ZoneGraph& g,
                                 std::size_t start_hour, std::size_t horizon) {
  const std::size_t L = model.params.dims.lookback;
  if (start_hour < L + 1) throw Error("model forecasts need start_hour > lookback");
  const auto samples = make_samples(injected, model.stats, model.loss_cfg, L, start_hour, start_hour + horizon);
  if (samples.size() != horizon) throw Error("forecast horizon extends beyond the panel");
  const auto pred = predict(model.params, samples, g);
  Forecasts f;
  f.start_hour = start_hour;
  f.vol = Grid2<double>(horizon, injected.zones());
  f.slr = Grid2<double>(horizon, injected.zones());
  for (std::size_t k = 0; k < horizon; ++k)
    for (std::size_t z = 0; z < injected.zones(); ++z) {
      const auto r = static_cast<Eigen::Index>(k);
      const auto c = static_cast<Eigen::Index>(z);
      f.vol(k, z) = std::max(0.0, std::expm1(pred.log_vol(r, c)));
      f.slr(k, z) = pred.slr(r, c);
    }
  return f;
}

// 0.6 * SLR_p95 + 0.4 * lost_p95 / median(lost_p95), p95 across time per zone.
// When every zone's lost_p95 is zero the ratio term is dropped.
inline std::vector<double> risk_score(const Grid2<double>& slr_hat, const Grid2<double>& vol_hat) {
  if (slr_hat.rows() != vol_hat.rows() || slr_hat.cols() != vol_hat.cols()) throw Error("risk_score shape mismatch");
  if (slr_hat.rows() == 0) throw Error("risk_score needs a non-empty horizon");
  const std::size_t T = slr_hat.rows(), Z = slr_hat.cols();
  std::vector<double> slr_p95(Z), lost_p95(Z);
  for (std::size_t z = 0; z < Z; ++z) {
    std::vector<double> s(T), l(T);
    for (std::size_t t = 0; t < T; ++t) {
      s[t] = slr_hat(t, z);
      l[t] = vol_hat(t, z) * slr_hat(t, z);
    }
    slr_p95[z] = quantile(std::move(s), 0.95);
    lost_p95[z] = quantile(std::move(l), 0.95);
  }
  const double med = median(lost_p95);
  std::vector<double> score(Z);
  for (std::size_t z = 0; z < Z; ++z) score[z] = 0.6 * slr_p95[z] + (med > 0.0 ? 0.4 * lost_p95[z] / med : 0.0);
  return score;
}

struct AccuracyReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> mape;       // percent, over non-zero truth
  std::size_t mape_skipped = 0;
  std::optional<double> peak_mape;  // percent, truth above the per-zone 75th percentile
  std::size_t n = 0;
};

// pred/truth indexed [t][z].
inline AccuracyReport eval_accuracy(const Grid2<double>& pred, const Grid2<double>& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw Error("accuracy shape mismatch");
  if (truth.raw().empty()) throw Error("accuracy on empty series");
  AccuracyReport r;
  r.n = truth.raw().size();
  double sq = 0.0, ab = 0.0, ape = 0.0, peak = 0.0;
  std::size_t n_ape = 0, n_peak = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double e = pred.raw()[i] - truth.raw()[i];
    sq += e * e;
    ab += std::abs(e);
    if (truth.raw()[i] != 0.0) {
      ape += std::abs(e / truth.raw()[i]);
      ++n_ape;
    } else {
      ++r.mape_skipped;
    }
  }
  for (std::size_t z = 0; z < truth.cols(); ++z) {
    std::vector<double> col(truth.rows());
    for (std::size_t t = 0; t < truth.rows(); ++t) col[t] = truth(t, z);
    const double p75 = quantile(col, 0.75);
    for (std::size_t t = 0; t < truth.rows(); ++t)
      if (truth(t, z) > p75 && truth(t, z) != 0.0) {
        peak += std::abs((pred(t, z) - truth(t, z)) / truth(t, z));
        ++n_peak;
      }
  }
  r.rmse = std::sqrt(sq / static_cast<double>(r.n));
  r.mae = ab / static_cast<double>(r.n);
  if (n_ape) r.mape = 100.0 * ape / static_cast<double>(n_ape);
  if (n_peak) r.peak_mape = 100.0 * peak / static_cast<double>(n_peak);
  return r;
}

// Ranks starting at 1; ties receive the average of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// NaN when either side has no rank variance.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error("spearman needs two equal-length series of length >= 2");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

struct StressResponse {
  std::vector<double> multipliers;
  std::vector<double> mean_slr;
  double spearman_rho = 0.0;
  bool monotone = false;                     // strictly increasing
  std::optional<double> tail_amplification;  // percent, last vs first multiplier
  double pct_zones_worse = 0.0;              // percent
};

// Predictor: stressed (un-injected) panel -> per-zone SLR predictions [eval step][zone].
using SlrPredictor = std::function<Grid2<double>(const ZoneHourPanel&)>;

inline StressResponse summarize_stress(std::vector<double> multipliers, const std::vector<Grid2<double>>& preds) {
  if (multipliers.size() < 2) throw Error("stress response needs at least two multipliers");
  StressResponse r;
  r.multipliers = std::move(multipliers);
  std::vector<std::vector<double>> zone_means;
  for (const auto& p : preds) {
    if (p.raw().empty()) throw Error("stress predictor returned no predictions");
    r.mean_slr.push_back(std::accumulate(p.raw().begin(), p.raw().end(), 0.0) / static_cast<double>(p.raw().size()));
    std::vector<double> zm(p.cols(), 0.0);
    for (std::size_t t = 0; t < p.rows(); ++t)
      for (std::size_t z = 0; z < p.cols(); ++z) zm[z] += p(t, z) / static_cast<double>(p.rows());
    zone_means.push_back(std::move(zm));
  }
  r.spearman_rho = spearman(r.multipliers, r.mean_slr);
  r.monotone = true;
  for (std::size_t i = 1; i < r.mean_slr.size(); ++i) r.monotone = r.monotone && r.mean_slr[i] > r.mean_slr[i - 1];
  if (r.mean_slr.front() > 0.0) r.tail_amplification = 100.0 * (r.mean_slr.back() / r.mean_slr.front() - 1.0);
  std::size_t worse = 0;
  for (std::size_t z = 0; z < zone_means.front().size(); ++z) worse += zone_means.back()[z] > zone_means.front()[z];
  r.pct_zones_worse = 100.0 * static_cast<double>(worse) / static_cast<double>(zone_means.front().size());
  return r;
}

inline StressResponse stress_response(const ZoneHourPanel& panel, const SlrPredictor& predictor,
                                      std::vector<double> multipliers = {1.0, 1.2, 1.5, 2.0}) {
  if (multipliers.size() < 2) throw Error("stress response needs at least two multipliers");
  std::vector<Grid2<double>> preds;
  const auto base = panel.without_injection();
  for (double m : multipliers) preds.push_back(predictor(base.with_demand_scaled(m)));
  return summarize_stress(std::move(multipliers), preds);
}

// The injection layer as a predictor: SLR labels of the whole stressed panel.
inline SlrPredictor injection_predictor(const Injector& inj) {
  return [inj](const ZoneHourPanel& stressed) { return inj.inject(stressed).slr(); };
}

// A trained model as a predictor: stressed demand is re-injected and
// re-featurised end to end; predictions cover targets in [begin, end).
inline SlrPredictor model_predictor(const TrainedModel& model, const ZoneGraph& g, const Injector& inj, std::size_t begin,
                                    std::size_t end) {
  return [&model, &g, inj, begin, end](const ZoneHourPanel& stressed) {
    const auto injected = inj.inject(stressed);
    const auto samples = make_samples(injected, model.stats, model.loss_cfg, model.params.dims.lookback, begin, end);
    const auto pred = predict(model.params, samples, g);
    Grid2<double> out(static_cast<std::size_t>(pred.slr.rows()), static_cast<std::size_t>(pred.slr.cols()));
    for (Eigen::Index i = 0; i < pred.slr.rows(); ++i)
      for (Eigen::Index z = 0; z < pred.slr.cols(); ++z)
        out(static_cast<std::size_t>(i), static_cast<std::size_t>(z)) = pred.slr(i, z);
    return out;
  };
}

}  // namespace evres::forecast
