#pragma once

#include <evres/common.hpp>
#include <evres/forecast/evaluate.hpp>

#include <array>
#include <atomic>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace evres {

enum class PolicyKind { none, price, capboost, hybrid };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::none: return "none";
    case PolicyKind::price: return "price";
    case PolicyKind::capboost: return "capboost";
    case PolicyKind::hybrid: return "hybrid";
  }
  return "none";
}

inline std::optional<PolicyKind> policy_from_string(const std::string& s) {
  for (auto k : {PolicyKind::none, PolicyKind::price, PolicyKind::capboost, PolicyKind::hybrid})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline constexpr std::array<PolicyKind, 4> kAllPolicies = {PolicyKind::none, PolicyKind::price, PolicyKind::capboost,
                                                            PolicyKind::hybrid};

struct PolicySpec {
  PolicyKind kind = PolicyKind::none;
  double delta_p = 0.5;
  double elasticity = -0.2;
  double boost_frac = 0.3;
  std::size_t top_k = 30;
  bool price_always_on = false;  // default: price only inside the shock window

  bool uses_price() const { return kind == PolicyKind::price || kind == PolicyKind::hybrid; }
  bool uses_capboost() const { return kind == PolicyKind::capboost || kind == PolicyKind::hybrid; }

  void validate() const {
    if (!(elasticity <= 0.0)) throw Error("elasticity must be <= 0");
    if (!(boost_frac >= 0.0)) throw Error("boost_frac must be >= 0");
  }
};

struct ScenarioSpec {
  static constexpr std::size_t kDefaultHorizon = 792;
  static constexpr std::size_t kDefaultShockStart = 72;
  static constexpr std::size_t kDefaultShockLength = 48;

  double multiplier = 1.5;
  std::size_t shock_start = kDefaultShockStart;
  std::size_t shock_end = kDefaultShockStart + kDefaultShockLength;
  std::size_t horizon = kDefaultHorizon;
  PolicySpec policy{};
  double balk_threshold = 200.0;  // kWh
  double balk_rate = 0.05;
  double recovery_theta_frac = 0.01;
  std::size_t recovery_hold = 24;
  bool balk_before_policy = false;

  bool in_shock(std::size_t t) const { return t >= shock_start && t < shock_end; }

  void validate() const {
    if (!(multiplier >= 1.0)) throw Error("multiplier must be >= 1");
    if (!(shock_start < shock_end && shock_end <= horizon)) throw Error("shock window must satisfy start < end <= horizon");
    if (!(balk_rate >= 0.0 && balk_rate < 1.0)) throw Error("balk_rate must lie in [0,1)");
    if (!(balk_threshold >= 0.0)) throw Error("balk_threshold must be >= 0");
    if (!(recovery_theta_frac >= 0.0)) throw Error("recovery_theta_frac must be >= 0");
    policy.validate();
  }

  // No shock and no policy on the same window and behaviour constants.
  ScenarioSpec baseline() const {
    ScenarioSpec b = *this;
    b.multiplier = 1.0;
    b.policy = PolicySpec{};
    return b;
  }
};

// ---------------------------------------------------------------------------
// Policy levers

inline double apply_price(double arrivals, const PolicySpec& spec, bool in_shock) {
  if (!spec.uses_price() || !(in_shock || spec.price_always_on)) return arrivals;
  return std::max(0.0, arrivals * (1.0 + spec.elasticity * spec.delta_p));
}

// Unconditional form of the price rule, A * (1 + eps * dp) floored at zero.
inline double price_response(double arrivals, double elasticity, double delta_p) {
  return std::max(0.0, arrivals * (1.0 + elasticity * delta_p));
}

// Top-k zones by risk (ties to the lower zone index) get capacity * (1 + boost).
inline std::vector<double> apply_capboost(const std::vector<double>& capacity, const std::vector<double>& risk,
                                          const PolicySpec& spec) {
  if (risk.size() != capacity.size()) throw Error("risk scores must cover every zone");
  std::vector<std::size_t> order(capacity.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return risk[a] > risk[b]; });
  std::vector<double> out = capacity;
  const std::size_t k = std::min(spec.top_k, capacity.size());
  for (std::size_t i = 0; i < k; ++i) out[order[i]] *= 1.0 + spec.boost_frac;
  return out;
}

// ---------------------------------------------------------------------------
// Backlog dynamics

struct SimState {
  std::size_t t = 0;
  std::vector<double> backlog;  // kWh
};

struct StepFlows {
  std::vector<double> arrivals;            // after stress multiplier
  std::vector<double> arrivals_effective;  // after price shaping and balking
  std::vector<double> service;             // deliverable kWh this hour
  std::vector<double> served;
  std::vector<double> lost;
};

// One hour: stress, price shaping, balking, service, flows, backlog update.
inline StepFlows step(SimState& state, const std::vector<double>& vol_hat, const std::vector<double>& slr_hat,
                      const std::vector<double>& capacity, const ScenarioSpec& sc) {
  const std::size_t Z = state.backlog.size();
  if (vol_hat.size() != Z || slr_hat.size() != Z || capacity.size() != Z) throw Error("step: zone count mismatch");
  const bool shock = sc.in_shock(state.t);
  const double m = shock ? sc.multiplier : 1.0;
  StepFlows f;
  f.arrivals.resize(Z);
  f.arrivals_effective.resize(Z);
  f.service.resize(Z);
  f.served.resize(Z);
  f.lost.resize(Z);
  for (std::size_t z = 0; z < Z; ++z) {
    const double v = vol_hat[z], slr = slr_hat[z], cap = capacity[z], b = state.backlog[z];
    if (!std::isfinite(v) || !std::isfinite(slr) || !std::isfinite(cap) || v < 0.0 || cap < 0.0 || slr < 0.0 || slr > 1.0)
      throw Error("step: non-finite or out-of-range input at zone " + std::to_string(z));
    const double a = v * m;
    const bool balk = b > sc.balk_threshold;
    double a_eff;
    if (sc.balk_before_policy) {
      a_eff = apply_price(balk ? a * (1.0 - sc.balk_rate) : a, sc.policy, shock);
    } else {
      a_eff = apply_price(a, sc.policy, shock);
      if (balk) a_eff *= 1.0 - sc.balk_rate;
    }
    const double s = cap * (1.0 - slr);
    f.arrivals[z] = a;
    f.arrivals_effective[z] = a_eff;
    f.service[z] = s;
    f.served[z] = std::min(s, b + a_eff);
    f.lost[z] = std::max(0.0, a_eff - s);
    state.backlog[z] = std::max(0.0, b + a_eff - s);
  }
  ++state.t;
  return f;
}

struct BacklogTrajectory {
  Grid2<double> backlog;  // (horizon + 1) x Z; row 0 is the initial state
  Grid2<double> arrivals;
  Grid2<double> arrivals_effective;
  Grid2<double> service;
  Grid2<double> served;
  Grid2<double> lost;

  std::size_t horizon() const { return served.rows(); }
  std::size_t zones() const { return served.cols(); }
};


inline BacklogTrajectory simulate(const ScenarioSpec& sc, const forecast::Forecasts& fc, const std::vector<double>& capacity,
                                  const std::vector<double>& risk = {}) {
  sc.validate();
  if (fc.horizon() != sc.horizon)
    throw Error("horizon mismatch: scenario " + std::to_string(sc.horizon) + " h, forecasts " + std::to_string(fc.horizon()) + " h");
  const std::size_t Z = fc.zones();
  if (capacity.size() != Z) throw Error("capacity must cover every zone");
  std::vector<double> boosted = capacity;
  if (sc.policy.uses_capboost())
    boosted = apply_capboost(capacity, risk.empty() ? forecast::risk_score(fc.slr, fc.vol) : risk, sc.policy);

  BacklogTrajectory tr;
  const std::size_t H = sc.horizon;
  tr.backlog = Grid2<double>(H + 1, Z, 0.0);
  tr.arrivals = tr.arrivals_effective = tr.service = tr.served = tr.lost = Grid2<double>(H, Z, 0.0);
  SimState state{0, std::vector<double>(Z, 0.0)};
  std::vector<double> v(Z), s(Z);
  for (std::size_t t = 0; t < H; ++t) {
    for (std::size_t z = 0; z < Z; ++z) {
      v[z] = fc.vol(t, z);
      s[z] = fc.slr(t, z);
    }
    // Boosted capacity persists from shock start to the end of the horizon.
    const auto& cap = sc.policy.uses_capboost() && t >= sc.shock_start ? boosted : capacity;
    const auto f = step(state, v, s, cap, sc);
    for (std::size_t z = 0; z < Z; ++z) {
      tr.arrivals(t, z) = f.arrivals[z];
      tr.arrivals_effective(t, z) = f.arrivals_effective[z];
      tr.service(t, z) = f.service[z];
      tr.served(t, z) = f.served[z];
      tr.lost(t, z) = f.lost[z];
      tr.backlog(t + 1, z) = state.backlog[z];
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Metrics

struct ResilienceReport {
  double delta_auc = 0.0;  // kWh h
  double delta_rt = 0.0;   // hours after shock end
  bool censored = false;
  double peak = 0.0;  // kWh
  double ens = 0.0;   // kWh
  double ens_baseline = 0.0;
  double theta = 0.0;
};

// Excess backlog over the baseline; recovery is scanned on the zone-summed
// series, with the hold window truncated at the end of the horizon.
inline ResilienceReport resilience_metrics(const BacklogTrajectory& scen, const BacklogTrajectory& base, const ScenarioSpec& sc) {
  if (scen.backlog.rows() != base.backlog.rows() || scen.backlog.cols() != base.backlog.cols())
    throw Error("scenario and baseline trajectories differ in shape");
  const std::size_t rows = scen.backlog.rows();
  const std::size_t Z = scen.backlog.cols();
  const std::size_t horizon = rows - 1;
  ResilienceReport r;
  std::vector<double> agg(rows, 0.0);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t z = 0; z < Z; ++z) {
      const double d = std::max(0.0, scen.backlog(t, z) - base.backlog(t, z));
      r.delta_auc += d * ZoneHourPanel::kDeltaT;
      r.peak = std::max(r.peak, d);
      agg[t] += d;
    }
  for (double v : scen.lost.raw()) r.ens += v;
  for (double v : base.lost.raw()) r.ens_baseline += v;

  const double max_agg = *std::max_element(agg.begin(), agg.end());
  r.theta = sc.recovery_theta_frac * max_agg;
  if (max_agg == 0.0) return r;
  const std::size_t t_end = std::min(sc.shock_end, horizon);
  for (std::size_t t = t_end + 1; t <= horizon; ++t) {
    const std::size_t last = std::min(t + sc.recovery_hold, horizon);
    bool held = true;
    for (std::size_t tau = t; tau <= last && held; ++tau) held = agg[tau] <= r.theta;
    if (held) {
      r.delta_rt = static_cast<double>(t - t_end);
      return r;
    }
  }
  r.delta_rt = static_cast<double>(horizon - t_end);
  r.censored = true;
  return r;
}

// ---------------------------------------------------------------------------
// Policy suite

struct PolicyOutcome {
  PolicyKind kind = PolicyKind::none;
  ScenarioSpec scenario;
  BacklogTrajectory trajectory;
  ResilienceReport report;
  double auc_reduction_pct = 0.0;  // vs the no-policy scenario
};

struct PolicySuite {
  ScenarioSpec base_scenario;
  BacklogTrajectory baseline;
  std::vector<PolicyOutcome> outcomes;  // none, price, capboost, hybrid

  const PolicyOutcome& get(PolicyKind k) const {
    for (const auto& o : outcomes)
      if (o.kind == k) return o;
    throw Error(std::string("policy not in suite: ") + to_string(k));
  }
};

inline PolicySuite run_policy_suite(const ScenarioSpec& scenario, const forecast::Forecasts& fc,
                                    const std::vector<double>& capacity,
                                    const std::vector<PolicyKind>& kinds = {kAllPolicies.begin(), kAllPolicies.end()}) {
  PolicySuite suite;
  suite.base_scenario = scenario;
  suite.baseline = simulate(scenario.baseline(), fc, capacity);
  const auto risk = forecast::risk_score(fc.slr, fc.vol);
  for (auto k : kinds) {
    PolicyOutcome o;
    o.kind = k;
    o.scenario = scenario;
    o.scenario.policy.kind = k;
    o.trajectory = simulate(o.scenario, fc, capacity, risk);
    o.report = resilience_metrics(o.trajectory, suite.baseline, o.scenario);
    suite.outcomes.push_back(std::move(o));
  }
  double none_auc = 0.0;
  for (const auto& o : suite.outcomes)
    if (o.kind == PolicyKind::none) none_auc = o.report.delta_auc;
  for (auto& o : suite.outcomes)
    o.auc_reduction_pct = none_auc > 0.0 ? 100.0 * (none_auc - o.report.delta_auc) / none_auc : 0.0;
  return suite;
}

// ---------------------------------------------------------------------------
// Sweeps and the recoverability boundary

struct SweepCell {
  double multiplier = 0.0;
  double elasticity = 0.0;
  PolicyKind kind = PolicyKind::price;
  ResilienceReport report;
};

struct SweepResult {
  std::vector<double> multipliers;
  std::vector<double> elasticities;
  std::vector<SweepCell> cells;  // multiplier-major
};

inline const std::vector<double>& default_sweep_multipliers() {
  static const std::vector<double> m = {1.2, 1.5, 1.8, 2.0};
  return m;
}
inline const std::vector<double>& default_sweep_elasticities() {
  static const std::vector<double> e = {-0.1, -0.2, -0.3, -0.4, -0.5};
  return e;
}

// Cells are independent; `jobs` workers pull cell indices and write results by
// index, so output order does not depend on scheduling.
inline SweepResult sweep(const ScenarioSpec& scenario, const forecast::Forecasts& fc, const std::vector<double>& capacity,
                         const std::vector<double>& multipliers, const std::vector<double>& elasticities, PolicyKind kind,
                         std::size_t jobs = 1) {
  SweepResult res;
  res.multipliers = multipliers;
  res.elasticities = elasticities;
  res.cells.resize(multipliers.size() * elasticities.size());
  const auto base = simulate(scenario.baseline(), fc, capacity);
  const auto risk = forecast::risk_score(fc.slr, fc.vol);
  auto run = [&](std::size_t i) {
    SweepCell& c = res.cells[i];
    c.multiplier = multipliers[i / elasticities.size()];
    c.elasticity = elasticities[i % elasticities.size()];
    c.kind = kind;
    ScenarioSpec sc = scenario;
    sc.multiplier = c.multiplier;
    sc.policy.kind = kind;
    sc.policy.elasticity = c.elasticity;
    c.report = resilience_metrics(simulate(sc, fc, capacity, risk), base, sc);
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(res.cells.size(), 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < res.cells.size(); ++i) run(i);
    return res;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < res.cells.size();) run(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return res;
}

struct BoundaryColumn {
  double elasticity = 0.0;
  std::optional<double> m_crit;  // nullopt: no recoverable cell in this column
};

struct LineFit {
  double intercept = 0.0;  // a
  double slope = 0.0;      // b
};

struct BoundaryFit {
  std::vector<BoundaryColumn> columns;
  std::optional<LineFit> line;  // m_crit(eps) ~ a + b * eps
  std::vector<std::string> warnings;
  bool degenerate = false;
};

inline LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error("line fit needs distinct x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

// Per elasticity column, m_crit is the largest tested multiplier whose recovery
// is not censored.
inline BoundaryFit fit_boundary(const SweepResult& sw) {
  BoundaryFit fit;
  std::size_t blocked = 0;
  for (const auto& c : sw.cells) blocked += c.report.censored;
  for (double eps : sw.elasticities) {
    BoundaryColumn col{eps, std::nullopt};
    for (const auto& c : sw.cells)
      if (c.elasticity == eps && !c.report.censored) col.m_crit = std::max(col.m_crit.value_or(c.multiplier), c.multiplier);
    if (!col.m_crit) fit.warnings.push_back("elasticity " + format_double(eps) + ": no recoverable cell, column excluded");
    fit.columns.push_back(col);
  }
  if (!sw.cells.empty() && (blocked == 0 || blocked == sw.cells.size())) {
    fit.degenerate = true;
    fit.warnings.push_back(blocked == 0 ? "every cell recoverable: boundary lies above the tested range"
                                        : "every cell blocked: boundary lies below the tested range");
    return fit;
  }
  std::vector<double> x, y;
  for (const auto& c : fit.columns)
    if (c.m_crit) {
      x.push_back(c.elasticity);
      y.push_back(*c.m_crit);
    }
  if (x.size() < 2) {
    fit.warnings.push_back("fewer than two elasticity columns with a boundary: line fit refused");
    return fit;
  }
  fit.line = least_squares_line(x, y);
  return fit;
}

}  // namespace evres
