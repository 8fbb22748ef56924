#pragma once

#include <evres/forecast/model.hpp>
#include <evres/panel.hpp>

#include <sstream>
#include <vector>

namespace evres::forecast {

enum class Optimizer { gd, adam };

struct TrainHyper {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 0.01;
  std::size_t epochs = 150;
  std::size_t sample_stride = 1;  // use every k-th training hour
  double clip_norm = 5.0;         // global gradient-norm clip; 0 disables
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_slr_rmse = 0.0;
  double valid_vol_mae = 0.0;  // kWh
};

struct TrainedModel {
  ModelParams params;
  NormStats stats;
  TailLossConfig loss_cfg;
  std::uint64_t seed = 0;
  std::vector<EpochLog> log;
};

// Samples whose target hour t + 1 lies in [target_begin, target_end).
inline std::vector<Sample> make_samples(const ZoneHourPanel& panel, const NormStats& stats, const TailLossConfig& cfg,
                                        std::size_t lookback, std::size_t target_begin, std::size_t target_end,
                                        std::size_t stride = 1) {
  std::vector<Sample> out;
  const std::size_t first_t = std::max(lookback, target_begin == 0 ? 0 : target_begin - 1);
  const auto Z = static_cast<Eigen::Index>(panel.zones());
  stride = std::max<std::size_t>(stride, 1);
  for (std::size_t t = first_t; t + 1 < target_end && t + 1 < panel.hours(); t += stride) {
    Sample s;
    s.window = featurize(panel, t, stats, lookback);
    s.slr_target.resize(Z);
    s.log_vol_target.resize(Z);
    s.weight.resize(Z);
    for (Eigen::Index z = 0; z < Z; ++z) {
      const auto zi = static_cast<std::size_t>(z);
      s.slr_target(z) = panel.slr()(t + 1, zi);
      s.log_vol_target(z) = std::log1p(panel.demand()(t + 1, zi));
      s.weight(z) = tail_weight(panel.s_mapped()(t + 1, zi), cfg);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<const Sample*> pointers(const std::vector<Sample>& samples) {
  std::vector<const Sample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

inline double grad_norm(const ModelParams& g) {
  double sq = 0.0;
  g.visit([&](const std::string&, const Mat& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

inline void gd_update(ModelParams& p, const ModelParams& g, double step) {
  std::vector<const Mat*> gs;
  g.visit([&](const std::string&, const Mat& m) { gs.push_back(&m); });
  std::size_t i = 0;
  p.visit([&](const std::string&, Mat& m) { m -= step * *gs[i++]; });
}

// Bias-corrected first/second moment update, elementwise per parameter.
struct AdamState {
  ModelParams m, v;
  std::size_t t = 0;

  explicit AdamState(const ModelDims& d) : m(ModelParams::zeros(d)), v(ModelParams::zeros(d)) {}

  void update(ModelParams& p, const ModelParams& g, double lr, const TrainHyper& h) {
    ++t;
    const double c1 = 1.0 - std::pow(h.adam_beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(h.adam_beta2, static_cast<double>(t));
    std::vector<const Mat*> gs;
    std::vector<Mat*> ms, vs;
    g.visit([&](const std::string&, const Mat& x) { gs.push_back(&x); });
    m.visit([&](const std::string&, Mat& x) { ms.push_back(&x); });
    v.visit([&](const std::string&, Mat& x) { vs.push_back(&x); });
    std::size_t i = 0;
    p.visit([&](const std::string&, Mat& x) {
      Mat& mi = *ms[i];
      Mat& vi = *vs[i];
      const Mat& gi = *gs[i];
      mi = h.adam_beta1 * mi + (1.0 - h.adam_beta1) * gi;
      vi = h.adam_beta2 * vi + (1.0 - h.adam_beta2) * gi.cwiseProduct(gi);
      x.array() -= lr * (mi.array() / c1) / ((vi.array() / c2).sqrt() + h.adam_eps);
      ++i;
    });
  }
};

// Output biases start at the training-target means so early epochs spend their
// gradient on structure rather than on the offset.
inline void init_output_biases(ModelParams& p, const std::vector<Sample>& train) {
  double slr = 0.0, vol = 0.0, n = 0.0;
  for (const auto& s : train) {
    slr += s.slr_target.sum();
    vol += s.log_vol_target.sum();
    n += static_cast<double>(s.slr_target.size());
  }
  if (n == 0.0) return;
  const double m = std::clamp(slr / n, 1e-4, 1.0 - 1e-4);
  p.slr_b2(0, 0) = std::log(m / (1.0 - m));
  p.vol_b2(0, 0) = vol / n;
}

struct Predictions {
  std::vector<std::size_t> target_hours;
  Eigen::MatrixXd slr;      // samples x Z
  Eigen::MatrixXd log_vol;  // samples x Z
};

inline Predictions predict(const ModelParams& p, const std::vector<Sample>& samples, const ZoneGraph& g) {
  Predictions out;
  const auto Z = static_cast<Eigen::Index>(g.zones());
  out.slr.resize(static_cast<Eigen::Index>(samples.size()), Z);
  out.log_vol.resize(static_cast<Eigen::Index>(samples.size()), Z);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = forward(p, samples[i].window, g);
    out.slr.row(static_cast<Eigen::Index>(i)) = c.slr_hat.col(0).transpose();
    out.log_vol.row(static_cast<Eigen::Index>(i)) = c.log_vol_hat.col(0).transpose();
    out.target_hours.push_back(samples[i].window.end_hour + 1);
  }
  return out;
}

inline EpochLog evaluate_split(const ModelParams& p, const std::vector<Sample>& samples, const ZoneGraph& g,
                               const TailLossConfig& cfg) {
  EpochLog e;
  if (samples.empty()) return e;
  e.valid_loss = loss_and_grad(p, pointers(samples), g, cfg, nullptr).total;
  const auto pred = predict(p, samples, g);
  double sq = 0.0, abs_err = 0.0, n = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (Eigen::Index z = 0; z < pred.slr.cols(); ++z) {
      const auto r = static_cast<Eigen::Index>(i);
      sq += std::pow(pred.slr(r, z) - samples[i].slr_target(z), 2);
      abs_err += std::abs(std::expm1(pred.log_vol(r, z)) - std::expm1(samples[i].log_vol_target(z)));
      n += 1.0;
    }
  e.valid_slr_rmse = std::sqrt(sq / n);
  e.valid_vol_mae = abs_err / n;
  return e;
}

// Full-batch gradient descent on the tail-weighted loss over the training split.
inline TrainedModel train(const ZoneHourPanel& panel, const ZoneGraph& graph, const SplitIndex& split, const ModelDims& dims,
                          const TailLossConfig& cfg, const TrainHyper& hyper) {
  split.validate(panel.hours());
  cfg.validate();
  if (graph.zones() != panel.zones()) throw Error("graph and panel zone counts differ");
  TrainedModel m;
  m.stats = NormStats::fit(panel, split.train_end);
  m.loss_cfg = cfg;
  m.seed = hyper.seed;
  const auto train_set = make_samples(panel, m.stats, cfg, dims.lookback, 0, split.train_end, hyper.sample_stride);
  const auto valid_set = make_samples(panel, m.stats, cfg, dims.lookback, split.train_end, split.valid_end);
  if (train_set.empty()) throw Error("no training samples: training split shorter than the lookback");
  m.params = ModelParams::glorot(dims, hyper.seed);
  init_output_biases(m.params, train_set);
  const auto batch = pointers(train_set);
  AdamState adam(dims);

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    ModelParams grad = ModelParams::zeros(dims);
    const auto lv = loss_and_grad(m.params, batch, graph, cfg, &grad);
    if (!std::isfinite(lv.total) || !grad.all_finite())
      throw Error("training diverged at epoch " + std::to_string(epoch));
    if (hyper.clip_norm > 0.0) {
      const double norm = grad_norm(grad);
      if (norm > hyper.clip_norm) grad.visit([&](const std::string&, Mat& x) { x *= hyper.clip_norm / norm; });
    }
    if (hyper.optimizer == Optimizer::adam)
      adam.update(m.params, grad, hyper.learning_rate, hyper);
    else
      gd_update(m.params, grad, hyper.learning_rate);
    EpochLog e = evaluate_split(m.params, valid_set, graph, cfg);
    e.epoch = epoch;
    e.train_loss = lv.total;
    m.log.push_back(e);
  }
  return m;
}

inline std::string training_log_csv(const std::vector<EpochLog>& log) {
  csv::Writer w({"epoch", "train_loss", "valid_loss", "valid_slr_rmse", "valid_vol_mae"});
  for (const auto& e : log) {
    w.cell(e.epoch).cell(e.train_loss).cell(e.valid_loss).cell(e.valid_slr_rmse).cell(e.valid_vol_mae);
    w.end_row();
  }
  return w.str();
}

}  // namespace evres::forecast
