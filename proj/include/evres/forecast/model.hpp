#pragma once

#include <evres/common.hpp>
#include <evres/forecast/features.hpp>
#include <evres/forecast/graph.hpp>

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace evres::forecast {

using Mat = Eigen::MatrixXd;

struct ModelDims {
  std::size_t input = kNumFeatures;
  std::size_t hidden = 16;
  std::size_t head_hidden = 16;
  std::size_t lookback = kDefaultLookback;

  bool operator==(const ModelDims&) const = default;
};

// Two graph convolutions per time step, a GRU over the lookback per zone, and
// two feed-forward heads (SLR through a logistic, log-volume linear).
struct ModelParams {
  ModelDims dims;

  Mat gcn0, gcn1;              // input->hidden, hidden->hidden
  Mat wz, wr, wn;              // GRU input weights
  Mat uz, ur, un;              // GRU recurrent weights
  Mat bz, br, bn;              // GRU biases (1 x H)
  Mat slr_w1, slr_b1, slr_w2, slr_b2;
  Mat vol_w1, vol_b1, vol_w2, vol_b2;

  template <typename Self, typename F>
  static void visit_impl(Self& self, F&& f) {
    f("gcn0", self.gcn0);
    f("gcn1", self.gcn1);
    f("gru_wz", self.wz);
    f("gru_wr", self.wr);
    f("gru_wn", self.wn);
    f("gru_uz", self.uz);
    f("gru_ur", self.ur);
    f("gru_un", self.un);
    f("gru_bz", self.bz);
    f("gru_br", self.br);
    f("gru_bn", self.bn);
    f("slr_w1", self.slr_w1);
    f("slr_b1", self.slr_b1);
    f("slr_w2", self.slr_w2);
    f("slr_b2", self.slr_b2);
    f("vol_w1", self.vol_w1);
    f("vol_b1", self.vol_b1);
    f("vol_w2", self.vol_w2);
    f("vol_b2", self.vol_b2);
  }

  template <typename F>
  void visit(F&& f) { visit_impl(*this, std::forward<F>(f)); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, std::forward<F>(f)); }

  static ModelParams zeros(const ModelDims& d) {
    const auto F = static_cast<Eigen::Index>(d.input);
    const auto H = static_cast<Eigen::Index>(d.hidden);
    const auto K = static_cast<Eigen::Index>(d.head_hidden);
    ModelParams p;
    p.dims = d;
    p.gcn0 = Mat::Zero(F, H);
    p.gcn1 = Mat::Zero(H, H);
    for (Mat* m : {&p.wz, &p.wr, &p.wn, &p.uz, &p.ur, &p.un}) *m = Mat::Zero(H, H);
    for (Mat* m : {&p.bz, &p.br, &p.bn}) *m = Mat::Zero(1, H);
    for (Mat* m : {&p.slr_w1, &p.vol_w1}) *m = Mat::Zero(H, K);
    for (Mat* m : {&p.slr_b1, &p.vol_b1}) *m = Mat::Zero(1, K);
    for (Mat* m : {&p.slr_w2, &p.vol_w2}) *m = Mat::Zero(K, 1);
    for (Mat* m : {&p.slr_b2, &p.vol_b2}) *m = Mat::Zero(1, 1);
    return p;
  }

  // Glorot-uniform weights, zero biases.
  static ModelParams glorot(const ModelDims& d, std::uint64_t seed) {
    ModelParams p = zeros(d);
    Rng rng(seed);
    p.visit([&](const std::string& name, Mat& m) {
      if (name.find("_b") != std::string::npos) return;
      const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
    });
    return p;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Mat& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  bool operator==(const ModelParams& o) const {
    if (!(dims == o.dims)) return false;
    std::vector<const Mat*> a, b;
    visit([&](const std::string&, const Mat& m) { a.push_back(&m); });
    o.visit([&](const std::string&, const Mat& m) { b.push_back(&m); });
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols() || *a[i] != *b[i]) return false;
    return true;
  }
};

inline Mat sigmoid(const Mat& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}
inline Mat relu(const Mat& x) { return x.cwiseMax(0.0); }
inline Mat relu_mask(const Mat& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

struct StepCache {
  Mat ax, p1, g1, ag1, p2, g2;        // graph convolutions
  Mat h_prev, zg, rg, rh, ng, h;      // GRU
};

struct ForwardCache {
  std::vector<StepCache> steps;
  Mat slr_q, slr_g, slr_out;
  Mat vol_q, vol_g;
  Mat slr_hat;  // Z x 1, in [0,1]
  Mat log_vol_hat;  // Z x 1
};

inline void require_finite(const Mat& m, const char* layer) {
  if (!m.allFinite()) throw Error(std::string("non-finite activation in layer ") + layer);
}

inline ForwardCache forward(const ModelParams& p, const FeatureWindow& w, const ZoneGraph& g) {
  if (w.lookback() == 0) throw Error("empty feature window");
  const auto Z = g.norm_adjacency.rows();
  const auto H = static_cast<Eigen::Index>(p.dims.hidden);
  ForwardCache c;
  c.steps.resize(w.lookback());
  Mat h = Mat::Zero(Z, H);
  for (std::size_t tau = 0; tau < w.lookback(); ++tau) {
    const Mat& x = w.slices[tau];
    if (x.rows() != Z || x.cols() != static_cast<Eigen::Index>(p.dims.input)) throw Error("feature window shape mismatch");
    StepCache& s = c.steps[tau];
    s.ax = g.norm_adjacency * x;
    s.p1 = s.ax * p.gcn0;
    s.g1 = relu(s.p1);
    require_finite(s.g1, "gcn0");
    s.ag1 = g.norm_adjacency * s.g1;
    s.p2 = s.ag1 * p.gcn1;
    s.g2 = relu(s.p2);
    require_finite(s.g2, "gcn1");

    s.h_prev = h;
    s.zg = sigmoid((s.g2 * p.wz + h * p.uz).rowwise() + p.bz.row(0));
    s.rg = sigmoid((s.g2 * p.wr + h * p.ur).rowwise() + p.br.row(0));
    s.rh = s.rg.cwiseProduct(h);
    s.ng = ((s.g2 * p.wn + s.rh * p.un).rowwise() + p.bn.row(0)).array().tanh().matrix();
    s.h = (Mat::Ones(Z, H) - s.zg).cwiseProduct(h) + s.zg.cwiseProduct(s.ng);
    require_finite(s.h, "gru");
    h = s.h;
  }
  c.slr_q = (h * p.slr_w1).rowwise() + p.slr_b1.row(0);
  c.slr_g = relu(c.slr_q);
  c.slr_out = (c.slr_g * p.slr_w2).rowwise() + p.slr_b2.row(0);
  c.slr_hat = sigmoid(c.slr_out);
  require_finite(c.slr_hat, "head_slr");
  c.vol_q = (h * p.vol_w1).rowwise() + p.vol_b1.row(0);
  c.vol_g = relu(c.vol_q);
  c.log_vol_hat = (c.vol_g * p.vol_w2).rowwise() + p.vol_b2.row(0);
  require_finite(c.log_vol_hat, "head_vol");
  return c;
}

// Accumulates parameter gradients into `grad` given dL/d(slr_hat) and dL/d(log_vol_hat).
inline void backward(const ModelParams& p, const FeatureWindow& w, const ZoneGraph& g, const ForwardCache& c,
                     const Mat& d_slr, const Mat& d_vol, ModelParams& grad) {
  const Mat& A = g.norm_adjacency;  // symmetric
  const Mat& h_last = c.steps.back().h;

  const Mat d_slr_out = d_slr.cwiseProduct(c.slr_hat.cwiseProduct(Mat::Ones(c.slr_hat.rows(), 1) - c.slr_hat));
  grad.slr_w2 += c.slr_g.transpose() * d_slr_out;
  grad.slr_b2 += d_slr_out.colwise().sum();
  const Mat d_slr_q = (d_slr_out * p.slr_w2.transpose()).cwiseProduct(relu_mask(c.slr_q));
  grad.slr_w1 += h_last.transpose() * d_slr_q;
  grad.slr_b1 += d_slr_q.colwise().sum();
  Mat dh = d_slr_q * p.slr_w1.transpose();

  grad.vol_w2 += c.vol_g.transpose() * d_vol;
  grad.vol_b2 += d_vol.colwise().sum();
  const Mat d_vol_q = (d_vol * p.vol_w2.transpose()).cwiseProduct(relu_mask(c.vol_q));
  grad.vol_w1 += h_last.transpose() * d_vol_q;
  grad.vol_b1 += d_vol_q.colwise().sum();
  dh += d_vol_q * p.vol_w1.transpose();

  for (std::size_t k = c.steps.size(); k-- > 0;) {
    const StepCache& s = c.steps[k];
    const Mat ones = Mat::Ones(s.h.rows(), s.h.cols());
    const Mat dz = dh.cwiseProduct(s.ng - s.h_prev);
    const Mat dn = dh.cwiseProduct(s.zg);
    Mat dh_prev = dh.cwiseProduct(ones - s.zg);

    const Mat da_n = dn.cwiseProduct(ones - s.ng.cwiseProduct(s.ng));
    grad.wn += s.g2.transpose() * da_n;
    grad.un += s.rh.transpose() * da_n;
    grad.bn += da_n.colwise().sum();
    Mat dg2 = da_n * p.wn.transpose();
    const Mat d_rh = da_n * p.un.transpose();
    dh_prev += d_rh.cwiseProduct(s.rg);

    const Mat da_r = d_rh.cwiseProduct(s.h_prev).cwiseProduct(s.rg.cwiseProduct(ones - s.rg));
    grad.wr += s.g2.transpose() * da_r;
    grad.ur += s.h_prev.transpose() * da_r;
    grad.br += da_r.colwise().sum();
    dg2 += da_r * p.wr.transpose();
    dh_prev += da_r * p.ur.transpose();

    const Mat da_z = dz.cwiseProduct(s.zg.cwiseProduct(ones - s.zg));
    grad.wz += s.g2.transpose() * da_z;
    grad.uz += s.h_prev.transpose() * da_z;
    grad.bz += da_z.colwise().sum();
    dg2 += da_z * p.wz.transpose();
    dh_prev += da_z * p.uz.transpose();

    const Mat dp2 = dg2.cwiseProduct(relu_mask(s.p2));
    grad.gcn1 += s.ag1.transpose() * dp2;
    const Mat dg1 = A.transpose() * (dp2 * p.gcn1.transpose());
    const Mat dp1 = dg1.cwiseProduct(relu_mask(s.p1));
    grad.gcn0 += s.ax.transpose() * dp1;

    dh = dh_prev;
  }
  (void)w;
}

// One supervised example: a window and its next-hour targets.
struct Sample {
  FeatureWindow window;
  Eigen::VectorXd slr_target;
  Eigen::VectorXd log_vol_target;
  Eigen::VectorXd weight;  // tail weights from next-hour s_mapped
};

struct LossValue {
  double total = 0.0;
  double slr_term = 0.0;
  double vol_term = 0.0;
};

// Tail-weighted two-head MSE over a batch; weights are averaged over every
// (sample, zone) pair. Gradients are accumulated into `grad` when non-null.
inline LossValue loss_and_grad(const ModelParams& p, const std::vector<const Sample*>& batch, const ZoneGraph& g,
                               const TailLossConfig& cfg, ModelParams* grad) {
  LossValue out;
  if (batch.empty()) return out;
  const double n = static_cast<double>(batch.size() * g.zones());
  for (const Sample* s : batch) {
    const auto c = forward(p, s->window, g);
    const Eigen::VectorXd e_slr = c.slr_hat.col(0) - s->slr_target;
    const Eigen::VectorXd e_vol = c.log_vol_hat.col(0) - s->log_vol_target;
    out.slr_term += s->weight.dot(e_slr.cwiseProduct(e_slr)) / n;
    out.vol_term += s->weight.dot(e_vol.cwiseProduct(e_vol)) / n;
    if (grad) {
      const Mat d_slr = (cfg.w_slr * 2.0 / n) * s->weight.cwiseProduct(e_slr);
      const Mat d_vol = (cfg.w_vol * 2.0 / n) * s->weight.cwiseProduct(e_vol);
      backward(p, s->window, g, c, d_slr, d_vol, *grad);
    }
  }
  out.total = cfg.w_slr * out.slr_term + cfg.w_vol * out.vol_term;
  return out;
}

// Scalar-loop reference for the combined loss on precomputed predictions.
inline double loss(const Eigen::MatrixXd& slr_pred, const Eigen::MatrixXd& slr_true, const Eigen::MatrixXd& vol_pred,
                   const Eigen::MatrixXd& vol_true, const Eigen::MatrixXd& weights, const TailLossConfig& cfg) {
  const double n = static_cast<double>(slr_pred.size());
  if (n == 0) return 0.0;
  const double slr = (weights.array() * (slr_pred - slr_true).array().square()).sum() / n;
  const double vol = (weights.array() * (vol_pred - vol_true).array().square()).sum() / n;
  return cfg.w_slr * slr + cfg.w_vol * vol;
}

}  // namespace evres::forecast
