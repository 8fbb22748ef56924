#pragma once

#include <evres/common.hpp>
#include <evres/panel.hpp>

#include <optional>
#include <vector>

namespace evres {

// Temperature x pressure binning. Bins are left-closed right-open, the final
// bin is closed, and out-of-range values clip to the boundary bins.
class BinGrid {
public:
  BinGrid() : BinGrid(default_temp_edges(), default_pressure_edges()) {}

  BinGrid(std::vector<double> temp_edges, std::vector<double> pressure_edges)
      : temp_edges_(std::move(temp_edges)), pressure_edges_(std::move(pressure_edges)) {
    check_edges(temp_edges_, "temperature");
    check_edges(pressure_edges_, "pressure");
  }

  static std::vector<double> default_temp_edges() { return {0, 5, 10, 15, 20, 25, 30, 35}; }

  static std::vector<double> default_pressure_edges() {
    std::vector<double> e(31);
    for (int k = 0; k <= 30; ++k) e[static_cast<std::size_t>(k)] = k / 10.0;
    return e;
  }

  std::size_t temp_bins() const { return temp_edges_.size() - 1; }
  std::size_t pressure_bins() const { return pressure_edges_.size() - 1; }
  const std::vector<double>& temp_edges() const { return temp_edges_; }
  const std::vector<double>& pressure_edges() const { return pressure_edges_; }

  std::size_t temp_bin(double temp_c) const { return locate(temp_edges_, temp_c); }
  std::size_t pressure_bin(double s) const { return locate(pressure_edges_, s); }

  double temp_center(std::size_t i) const { return 0.5 * (temp_edges_[i] + temp_edges_[i + 1]); }
  double pressure_center(std::size_t k) const { return 0.5 * (pressure_edges_[k] + pressure_edges_[k + 1]); }

  bool operator==(const BinGrid&) const = default;

private:
  static void check_edges(const std::vector<double>& e, const char* what) {
    if (e.size() < 2) throw Error(std::string(what) + " grid needs at least two edges");
    for (std::size_t i = 1; i < e.size(); ++i)
      if (!(e[i] > e[i - 1])) throw Error(std::string(what) + " edges must be strictly increasing");
  }

  static std::size_t locate(const std::vector<double>& e, double x) {
    if (!(x >= e.front())) return 0;  // also catches NaN
    if (x >= e.back()) return e.size() - 2;
    auto it = std::upper_bound(e.begin(), e.end(), x);
    return static_cast<std::size_t>(it - e.begin()) - 1;
  }

  std::vector<double> temp_edges_;
  std::vector<double> pressure_edges_;
};

struct BinIndex {
  std::size_t t_bin = 0;
  std::size_t s_bin = 0;
  bool operator==(const BinIndex&) const = default;
};

inline BinIndex bin_observation(double temp_c, double s, const BinGrid& grid) {
  return {grid.temp_bin(temp_c), grid.pressure_bin(s)};
}

inline double compute_pressure(double p_req, double p_cap) {
  if (!(p_cap > 0.0)) throw Error("p_cap must be positive");
  if (!(p_req >= 0.0)) throw Error("p_req must be non-negative");
  return p_req / p_cap;
}

enum class EtaKind { setpoint, realized };

// Served fraction, or nullopt when the request is zero (ratio undefined).
inline std::optional<double> compute_eta(double p_num, double p_req) {
  if (!(p_req > 0.0)) return std::nullopt;
  return std::clamp(p_num / p_req, 0.0, 1.0);
}

struct RawSurface {
  BinGrid grid;
  Grid2<double> sum;
  Grid2<std::size_t> count;
  std::size_t records_used = 0;
  std::size_t records_skipped = 0;

  explicit RawSurface(BinGrid g = {})
      : grid(std::move(g)), sum(grid.temp_bins(), grid.pressure_bins(), 0.0), count(grid.temp_bins(), grid.pressure_bins(), 0) {}

  std::optional<double> eta_mean(std::size_t t, std::size_t k) const {
    if (count(t, k) == 0) return std::nullopt;
    return sum(t, k) / static_cast<double>(count(t, k));
  }

  void add(double temp_c, double s, double eta) {
    const auto b = bin_observation(temp_c, s, grid);
    sum(b.t_bin, b.s_bin) += eta;
    count(b.t_bin, b.s_bin) += 1;
    ++records_used;
  }

  // Order-independent merge of per-cell (sum, count) partials.
  void merge(const RawSurface& other) {
    if (!(other.grid == grid)) throw Error("cannot merge surfaces on different grids");
    for (std::size_t i = 0; i < sum.raw().size(); ++i) {
      sum.raw()[i] += other.sum.raw()[i];
      count.raw()[i] += other.count.raw()[i];
    }
    records_used += other.records_used;
    records_skipped += other.records_skipped;
  }
};

struct SurfaceOptions {
  EtaKind kind = EtaKind::realized;
};

inline RawSurface estimate_raw_surface(const std::vector<TelemetryRecord>& records, const StationConfig& cfg,
                                       const BinGrid& grid = {}, const SurfaceOptions& opts = {}) {
  cfg.validate();
  if (records.empty()) throw Error("no telemetry records");
  RawSurface raw(grid);
  for (const auto& r : records) {
    const double num = opts.kind == EtaKind::realized ? r.p_real : r.p_set;
    const auto eta = compute_eta(num, r.p_req);
    if (!eta) {
      ++raw.records_skipped;
      continue;
    }
    raw.add(r.temp_c, compute_pressure(r.p_req, cfg.p_cap), *eta);
  }
  if (raw.records_used == 0) throw Error("all telemetry records skipped (zero requested power)");
  return raw;
}

struct EnvelopeStats {
  std::size_t forward_filled = 0;
  std::size_t leading_filled = 0;
  std::size_t rows_from_column_mean = 0;
};

class DeliverabilityLut {
public:
  static constexpr std::size_t kTrustedSupport = 30;

  DeliverabilityLut(BinGrid grid, Grid2<double> eta, Grid2<std::size_t> count)
      : grid_(std::move(grid)), eta_(std::move(eta)), count_(std::move(count)) {
    if (eta_.rows() != grid_.temp_bins() || eta_.cols() != grid_.pressure_bins() || count_.rows() != eta_.rows() ||
        count_.cols() != eta_.cols())
      throw Error("LUT shape does not match its bin grid");
    for (std::size_t t = 0; t < eta_.rows(); ++t)
      for (std::size_t k = 0; k < eta_.cols(); ++k) {
        const double v = eta_(t, k);
        if (!(v >= 0.0 && v <= 1.0)) throw Error("LUT value outside [0,1]");
        if (k > 0 && v > eta_(t, k - 1)) throw Error("LUT row is not non-increasing in pressure");
      }
  }

  const BinGrid& grid() const { return grid_; }
  const Grid2<double>& eta() const { return eta_; }
  const Grid2<std::size_t>& count() const { return count_; }

  bool trusted(std::size_t t, std::size_t k) const { return count_(t, k) >= kTrustedSupport; }

  EnvelopeStats stats;
  std::size_t records_used = 0;
  std::size_t records_skipped = 0;

private:
  BinGrid grid_;
  Grid2<double> eta_;
  Grid2<std::size_t> count_;
};

// Running minimum along a row; the envelope kernel.
inline void cummin_inplace(std::vector<double>& row) {
  for (std::size_t k = 1; k < row.size(); ++k) row[k] = std::min(row[k], row[k - 1]);
}

// Fill empty cells, then take the running minimum along pressure in every
// temperature row. Empties take the previous populated value in the row;
// leading empties take the first populated value; rows with no data take the
// column mean over populated rows.
inline DeliverabilityLut monotone_envelope(const RawSurface& raw) {
  const std::size_t rows = raw.grid.temp_bins();
  const std::size_t cols = raw.grid.pressure_bins();
  Grid2<double> filled(rows, cols, 0.0);
  std::vector<bool> row_has_data(rows, false);
  EnvelopeStats stats;

  for (std::size_t t = 0; t < rows; ++t) {
    std::optional<double> first;
    for (std::size_t k = 0; k < cols && !first; ++k) first = raw.eta_mean(t, k);
    if (!first) continue;
    row_has_data[t] = true;
    double prev = *first;
    bool seen = false;
    for (std::size_t k = 0; k < cols; ++k) {
      if (auto m = raw.eta_mean(t, k)) {
        prev = *m;
        seen = true;
      } else if (seen) {
        ++stats.forward_filled;
      } else {
        ++stats.leading_filled;
      }
      filled(t, k) = prev;
    }
  }

  const auto populated = static_cast<std::size_t>(std::count(row_has_data.begin(), row_has_data.end(), true));
  if (populated == 0) throw Error("deliverability surface is entirely empty");
  for (std::size_t t = 0; t < rows; ++t) {
    if (row_has_data[t]) continue;
    ++stats.rows_from_column_mean;
    for (std::size_t k = 0; k < cols; ++k) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r)
        if (row_has_data[r]) acc += filled(r, k);
      filled(t, k) = acc / static_cast<double>(populated);
    }
  }

  Grid2<double> eta(rows, cols);
  for (std::size_t t = 0; t < rows; ++t) {
    std::vector<double> row(cols);
    for (std::size_t k = 0; k < cols; ++k) row[k] = filled(t, k);
    cummin_inplace(row);
    for (std::size_t k = 0; k < cols; ++k) eta(t, k) = row[k];
  }
  DeliverabilityLut lut(raw.grid, std::move(eta), raw.count);
  lut.stats = stats;
  lut.records_used = raw.records_used;
  lut.records_skipped = raw.records_skipped;
  return lut;
}

inline DeliverabilityLut fit_lut(const std::vector<TelemetryRecord>& records, const StationConfig& cfg,
                                 const BinGrid& grid = {}, const SurfaceOptions& opts = {}) {
  return monotone_envelope(estimate_raw_surface(records, cfg, grid, opts));
}

inline double lut_query(const DeliverabilityLut& lut, double temp_c, double s) {
  const auto b = bin_observation(temp_c, s, lut.grid());
  return lut.eta()(b.t_bin, b.s_bin);
}

// Rebuild a RawSurface view of a LUT (every cell populated) so the envelope can
// be re-applied; used to check idempotence.
inline RawSurface as_raw_surface(const DeliverabilityLut& lut) {
  RawSurface raw(lut.grid());
  for (std::size_t t = 0; t < lut.eta().rows(); ++t)
    for (std::size_t k = 0; k < lut.eta().cols(); ++k) {
      raw.sum(t, k) = lut.eta()(t, k);
      raw.count(t, k) = 1;
    }
  raw.records_used = lut.eta().raw().size();
  return raw;
}

}  // namespace evres
