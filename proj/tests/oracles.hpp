#pragma once

// Scalar-loop reference implementations shared by the unit tests and the
// acceptance runner. None of these call into the code under test beyond
// reading its data structures.

#include <evres/forecast/model.hpp>
#include <evres/forecast/train.hpp>
#include <evres/resilience.hpp>
#include <evres/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace evres::oracle {

using Vec = std::vector<double>;
using Mtx = std::vector<Vec>;

inline Vec prefix_min(const Vec& v) {
  Vec out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    double m = v[k];
    for (std::size_t j = 0; j <= k; ++j) m = std::min(m, v[j]);
    out[k] = m;
  }
  return out;
}

inline double count_above(const Vec& lambda, double threshold) {
  double n = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i)
    if (lambda[i] > threshold) n += 1;
  return n;
}

inline Mtx to_rows(const Eigen::MatrixXd& m) {
  Mtx out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

inline Mtx matmul(const Mtx& a, const Mtx& b) {
  Mtx c(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ForwardOut {
  Vec slr;
  Vec log_vol;
};

// Step-by-step forward pass: per hour two graph convolutions with ReLU, then a
// GRU update per zone and hidden unit; heads read the last hidden state.
inline ForwardOut forward(const forecast::ModelParams& p, const forecast::FeatureWindow& w, const Eigen::MatrixXd& norm_adj) {
  const Mtx A = to_rows(norm_adj);
  const std::size_t Z = A.size(), H = p.dims.hidden, K = p.dims.head_hidden;
  const Mtx W0 = to_rows(p.gcn0), W1 = to_rows(p.gcn1);
  Mtx h(Z, Vec(H, 0.0));
  for (const auto& x : w.slices) {
    Mtx g1 = matmul(matmul(A, to_rows(x)), W0);
    for (auto& r : g1)
      for (auto& v : r) v = std::max(0.0, v);
    Mtx g2 = matmul(matmul(A, g1), W1);
    for (auto& r : g2)
      for (auto& v : r) v = std::max(0.0, v);
    Mtx next(Z, Vec(H));
    for (std::size_t z = 0; z < Z; ++z) {
      Vec zg(H), rg(H);
      for (std::size_t j = 0; j < H; ++j) {
        double az = p.bz(0, j), ar = p.br(0, j);
        for (std::size_t i = 0; i < H; ++i) {
          az += g2[z][i] * p.wz(i, j) + h[z][i] * p.uz(i, j);
          ar += g2[z][i] * p.wr(i, j) + h[z][i] * p.ur(i, j);
        }
        zg[j] = sig(az);
        rg[j] = sig(ar);
      }
      for (std::size_t j = 0; j < H; ++j) {
        double an = p.bn(0, j);
        for (std::size_t i = 0; i < H; ++i) an += g2[z][i] * p.wn(i, j) + rg[i] * h[z][i] * p.un(i, j);
        next[z][j] = (1.0 - zg[j]) * h[z][j] + zg[j] * std::tanh(an);
      }
    }
    h = next;
  }
  ForwardOut out;
  for (std::size_t z = 0; z < Z; ++z) {
    double s = p.slr_b2(0, 0), v = p.vol_b2(0, 0);
    for (std::size_t k = 0; k < K; ++k) {
      double qs = p.slr_b1(0, k), qv = p.vol_b1(0, k);
      for (std::size_t j = 0; j < H; ++j) {
        qs += h[z][j] * p.slr_w1(j, k);
        qv += h[z][j] * p.vol_w1(j, k);
      }
      s += std::max(0.0, qs) * p.slr_w2(k, 0);
      v += std::max(0.0, qv) * p.vol_w2(k, 0);
    }
    out.slr.push_back(sig(s));
    out.log_vol.push_back(v);
  }
  return out;
}

struct GradCheck {
  double worst_rel = 0.0;
  std::size_t checked = 0;
  std::size_t failures = 0;
};

// Central differences on every parameter. Relative error uses
// max(|analytic|, |numeric|, floor) in the denominator so that exact zeros do
// not blow up.
inline GradCheck gradient_check(forecast::ModelParams p, const std::vector<forecast::Sample>& samples,
                                const forecast::ZoneGraph& g, const forecast::TailLossConfig& cfg, double step = 1e-5,
                                double tol = 1e-4, double floor = 1e-8) {
  const auto batch = forecast::pointers(samples);
  auto grad = forecast::ModelParams::zeros(p.dims);
  forecast::loss_and_grad(p, batch, g, cfg, &grad);
  std::vector<const forecast::Mat*> gs;
  grad.visit([&](const std::string&, const forecast::Mat& m) { gs.push_back(&m); });
  GradCheck out;
  std::size_t i = 0;
  p.visit([&](const std::string&, forecast::Mat& m) {
    const forecast::Mat& gm = *gs[i++];
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double orig = m.data()[k];
      m.data()[k] = orig + step;
      const double lp = forecast::loss_and_grad(p, batch, g, cfg, nullptr).total;
      m.data()[k] = orig - step;
      const double lm = forecast::loss_and_grad(p, batch, g, cfg, nullptr).total;
      m.data()[k] = orig;
      const double fd = (lp - lm) / (2.0 * step);
      const double an = gm.data()[k];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor});
      out.worst_rel = std::max(out.worst_rel, rel);
      out.failures += rel > tol;
      ++out.checked;
    }
  });
  return out;
}

// Tiny model fixture: Z = 2, H = 2, lookback 3, perturbed Glorot weights.
struct TinyModelFixture {
  forecast::ModelParams params;
  std::vector<forecast::Sample> samples;
  forecast::ZoneGraph graph;
  forecast::TailLossConfig cfg;
};

inline TinyModelFixture tiny_model_fixture(std::uint64_t seed = 3) {
  SynthPanelSpec ps;
  ps.zones = 2;
  ps.hours = 60;
  ps.area_km = 4;
  const auto panel = generate_synthetic_panel(ps, seed);
  // Labels from the inverse-pressure rule with demand doubled so some targets are non-zero.
  const auto inj = inject_panel_a0(panel.with_demand_scaled(2.0));
  TinyModelFixture f;
  f.graph = forecast::build_graph(panel.coords());
  forecast::ModelDims d;
  d.hidden = 2;
  d.head_hidden = 2;
  d.lookback = 3;
  const auto st = forecast::NormStats::fit(inj, 40);
  f.samples = forecast::make_samples(inj, st, f.cfg, 3, 0, 10);
  f.params = forecast::ModelParams::glorot(d, seed + 2);
  Rng r(seed + 6);
  f.params.visit([&](const std::string&, forecast::Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.3 * r.normal();
  });
  return f;
}

// Backlog recursion checked step by step on the simulator's own flows.
struct ConservationCheck {
  bool step_exact = true;
  bool nonnegative = true;
  double worst_final_error = 0.0;
};

inline ConservationCheck check_conservation(const BacklogTrajectory& tr) {
  ConservationCheck c;
  for (std::size_t z = 0; z < tr.zones(); ++z) {
    double sum_a = 0.0, sum_s = 0.0;
    for (std::size_t t = 0; t < tr.horizon(); ++t) {
      const double b0 = tr.backlog(t, z), b1 = tr.backlog(t + 1, z);
      const double a = tr.arrivals_effective(t, z), s = tr.served(t, z);
      // Evaluated as (B + A') - served, the same association the recursion uses.
      if (!(b1 == b0 + a - s)) c.step_exact = false;
      if (b1 < 0 || s < 0 || tr.lost(t, z) < 0) c.nonnegative = false;
      sum_a += a;
      sum_s += s;
    }
    c.worst_final_error = std::max(c.worst_final_error, std::abs(tr.backlog(tr.horizon(), z) - (sum_a - sum_s)));
  }
  return c;
}

}  // namespace evres::oracle
