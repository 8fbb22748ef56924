#pragma once

#include <evres/common.hpp>
#include <evres/csv.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evres {

// One minute of charging-point telemetry.
struct TelemetryRecord {
  std::int64_t timestamp = 0;  // minutes since epoch
  std::string station_id;
  double p_req = 0.0;   // kW
  double p_set = 0.0;   // kW
  double p_real = 0.0;  // kW
  double temp_c = 0.0;
};

struct StationConfig {
  static constexpr double kPerPlugKw = 86.25;
  static constexpr double kStationKw = 172.5;

  double p_cap = kPerPlugKw;

  void validate() const {
    if (!(p_cap > 0.0)) throw Error("station p_cap must be positive");
  }
};

struct ZoneCoord {
  double x_km = 0.0;
  double y_km = 0.0;
};

struct SplitIndex {
  std::size_t train_end = 0;
  std::size_t valid_end = 0;

  static SplitIndex chronological(std::size_t hours, double train_frac = 0.70, double valid_frac = 0.15) {
    SplitIndex s;
    s.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(hours) * train_frac));
    s.valid_end = static_cast<std::size_t>(std::floor(static_cast<double>(hours) * (train_frac + valid_frac)));
    s.validate(hours);
    return s;
  }

  void validate(std::size_t hours) const {
    if (!(0 < train_end && train_end < valid_end && valid_end < hours))
      throw Error("invalid split: need 0 < train_end < valid_end < T");
  }
};

// City-scale zone-hour panel. Arrays are indexed [hour][zone]. Immutable once
// built; derived variants (stressed demand, injected fields) are new panels.
class ZoneHourPanel {
public:
  static constexpr double kDeltaT = 1.0;  // hours

  ZoneHourPanel() = default;

  ZoneHourPanel(Grid2<double> demand, Grid2<double> temp_c, std::vector<double> capacity, std::vector<ZoneCoord> coords,
                std::vector<long long> zone_ids = {})
      : demand_(std::move(demand)),
        temp_(std::move(temp_c)),
        capacity_(std::move(capacity)),
        coords_(std::move(coords)),
        zone_ids_(std::move(zone_ids)) {
    const auto T = demand_.rows();
    const auto Z = demand_.cols();
    if (Z == 0 || T == 0) throw Error("panel must have at least one zone and one hour");
    if (temp_.rows() != T || temp_.cols() != Z) throw Error("temperature shape does not match demand");
    if (capacity_.size() != Z || coords_.size() != Z) throw Error("zone metadata size does not match demand");
    if (zone_ids_.empty()) {
      zone_ids_.resize(Z);
      std::iota(zone_ids_.begin(), zone_ids_.end(), 0LL);
    }
    if (zone_ids_.size() != Z) throw Error("zone id count does not match demand");
    for (std::size_t z = 0; z < Z; ++z)
      if (!(capacity_[z] > 0.0)) throw Error("capacity must be positive for zone " + std::to_string(zone_ids_[z]));
    s_raw_ = Grid2<double>(T, Z);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t z = 0; z < Z; ++z) {
        const double v = demand_(t, z);
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error("demand must be finite and non-negative");
        s_raw_(t, z) = v / (capacity_[z] * kDeltaT);
      }
  }

  std::size_t zones() const { return demand_.cols(); }
  std::size_t hours() const { return demand_.rows(); }

  const Grid2<double>& demand() const { return demand_; }
  const Grid2<double>& temp_c() const { return temp_; }
  const std::vector<double>& capacity() const { return capacity_; }
  const std::vector<ZoneCoord>& coords() const { return coords_; }
  const std::vector<long long>& zone_ids() const { return zone_ids_; }
  const Grid2<double>& s_raw() const { return s_raw_; }

  bool injected() const { return s_mapped_.has_value(); }
  const Grid2<double>& s_mapped() const {
    if (!s_mapped_) throw Error("panel has no s_mapped field; run injection first");
    return *s_mapped_;
  }
  const Grid2<double>& slr() const {
    if (!slr_) throw Error("panel has no slr field; run injection first");
    return *slr_;
  }

  ZoneHourPanel with_injection(Grid2<double> s_mapped, Grid2<double> slr) const {
    if (s_mapped.rows() != hours() || s_mapped.cols() != zones() || slr.rows() != hours() || slr.cols() != zones())
      throw Error("injected field shape does not match panel");
    for (double v : slr.raw())
      if (!(v >= 0.0 && v <= 1.0)) throw Error("slr outside [0,1]");
    ZoneHourPanel out = *this;
    out.s_mapped_ = std::move(s_mapped);
    out.slr_ = std::move(slr);
    return out;
  }

  // Demand scaled by m; injected fields are dropped because they depend on demand.
  ZoneHourPanel with_demand_scaled(double m) const {
    Grid2<double> d = demand_;
    for (auto& v : d.raw()) v *= m;
    return ZoneHourPanel(std::move(d), temp_, capacity_, coords_, zone_ids_);
  }

  ZoneHourPanel without_injection() const { return ZoneHourPanel(demand_, temp_, capacity_, coords_, zone_ids_); }

private:
  Grid2<double> demand_;
  Grid2<double> temp_;
  std::vector<double> capacity_;
  std::vector<ZoneCoord> coords_;
  std::vector<long long> zone_ids_;
  Grid2<double> s_raw_;
  std::optional<Grid2<double>> s_mapped_;
  std::optional<Grid2<double>> slr_;
};

// ---------------------------------------------------------------------------
// CSV ingestion

inline const std::vector<std::string> kTelemetryHeader = {"timestamp", "station_id", "p_req_kw",
                                                          "p_set_kw",  "p_real_kw",  "temp_c"};
inline const std::vector<std::string> kPanelHeader = {"zone", "hour", "demand_kwh", "temp_c"};
inline const std::vector<std::string> kInjectedPanelHeader = {"zone", "hour", "demand_kwh", "temp_c", "s_mapped", "slr"};
inline const std::vector<std::string> kZoneMetaHeader = {"zone", "capacity_kwh_per_h", "x_km", "y_km"};

struct TelemetryLoadOptions {
  double setpoint_tolerance_kw = 1.0;
};

inline std::vector<TelemetryRecord> load_telemetry_csv(const std::filesystem::path& path,
                                                       const TelemetryLoadOptions& opts = {}) {
  const auto table = csv::read(path, kTelemetryHeader);
  std::vector<TelemetryRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    TelemetryRecord r;
    r.timestamp = table.integer(i, 0);
    r.station_id = table.rows[i][1];
    r.p_req = table.number(i, 2);
    r.p_set = table.number(i, 3);
    r.p_real = table.number(i, 4);
    r.temp_c = table.number(i, 5);
    const std::size_t line = table.line_numbers[i];
    for (std::size_t c = 2; c <= 4; ++c) {
      const double v = c == 2 ? r.p_req : c == 3 ? r.p_set : r.p_real;
      if (!(v >= 0.0) || !std::isfinite(v))
        throw csv::ParseError(table.path, line, table.header[c], "power must be finite and non-negative");
    }
    if (r.p_real > r.p_set + opts.setpoint_tolerance_kw)
      throw csv::ParseError(table.path, line, "p_real_kw", "realized power exceeds setpoint beyond tolerance");
    out.push_back(std::move(r));
  }
  return out;
}

struct PanelLoadResult {
  ZoneHourPanel panel;
  std::size_t filled_missing = 0;
};

// Long-format panel plus zone metadata. Missing (zone, hour) pairs are
// zero-filled and counted. Reads the injected variant when its columns exist.
inline PanelLoadResult load_panel_csv(const std::filesystem::path& path, const std::filesystem::path& meta_path) {
  const auto meta = csv::read(meta_path, kZoneMetaHeader);
  std::map<long long, std::size_t> zone_index;
  std::vector<double> capacity;
  std::vector<ZoneCoord> coords;
  std::vector<long long> ids;
  for (std::size_t i = 0; i < meta.rows.size(); ++i) {
    const long long id = meta.integer(i, 0);
    const double cap = meta.number(i, 1);
    if (!(cap > 0.0)) throw csv::ParseError(meta.path, meta.line_numbers[i], "capacity_kwh_per_h", "capacity must be positive");
    if (!zone_index.emplace(id, ids.size()).second)
      throw csv::ParseError(meta.path, meta.line_numbers[i], "zone", "duplicate zone " + std::to_string(id));
    ids.push_back(id);
    capacity.push_back(cap);
    coords.push_back({meta.number(i, 2), meta.number(i, 3)});
  }
  if (ids.empty()) throw Error(meta.path + ": no zones");

  const auto first_line = [&] {
    std::ifstream in(path);
    std::string l;
    std::getline(in, l);
    if (!l.empty() && l.back() == '\r') l.pop_back();
    return l;
  }();
  const bool injected = csv::split_line(first_line) == kInjectedPanelHeader;
  const auto table = csv::read(path, injected ? kInjectedPanelHeader : kPanelHeader);

  long long max_hour = -1;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long long h = table.integer(i, 1);
    if (h < 0) throw csv::ParseError(table.path, table.line_numbers[i], "hour", "negative hour");
    max_hour = std::max(max_hour, h);
  }
  if (max_hour < 0) throw Error(table.path + ": no panel rows");
  const std::size_t T = static_cast<std::size_t>(max_hour) + 1;
  const std::size_t Z = ids.size();
  Grid2<double> demand(T, Z, 0.0), temp(T, Z, 0.0), s_mapped(T, Z, 0.0), slr(T, Z, 0.0);
  Grid2<char> seen(T, Z, 0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long long id = table.integer(i, 0);
    auto it = zone_index.find(id);
    if (it == zone_index.end())
      throw csv::ParseError(table.path, table.line_numbers[i], "zone", "zone " + std::to_string(id) + " absent from metadata");
    const auto z = it->second;
    const auto t = static_cast<std::size_t>(table.integer(i, 1));
    if (seen(t, z))
      throw csv::ParseError(table.path, table.line_numbers[i], "",
                            "duplicate key (zone=" + std::to_string(id) + ", hour=" + std::to_string(t) + ")");
    seen(t, z) = 1;
    const double v = table.number(i, 2);
    if (!(v >= 0.0)) throw csv::ParseError(table.path, table.line_numbers[i], "demand_kwh", "negative demand");
    demand(t, z) = v;
    temp(t, z) = table.number(i, 3);
    if (injected) {
      s_mapped(t, z) = table.number(i, 4);
      slr(t, z) = table.number(i, 5);
    }
  }
  PanelLoadResult out;
  for (char c : seen.raw()) out.filled_missing += c ? 0 : 1;
  if (injected && out.filled_missing > 0) {
    // Zero-filled rows carry no injected fields; fill with the zero-demand values.
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t z = 0; z < Z; ++z)
        if (!seen(t, z)) s_mapped(t, z) = 0.0, slr(t, z) = 0.0;
  }
  out.panel = ZoneHourPanel(std::move(demand), std::move(temp), std::move(capacity), std::move(coords), std::move(ids));
  if (injected) out.panel = out.panel.with_injection(std::move(s_mapped), std::move(slr));
  return out;
}

inline std::string telemetry_to_csv(const std::vector<TelemetryRecord>& records) {
  csv::Writer w(kTelemetryHeader);
  for (const auto& r : records) {
    w.cell(static_cast<long long>(r.timestamp)).cell(r.station_id).cell(r.p_req).cell(r.p_set).cell(r.p_real).cell(r.temp_c);
    w.end_row();
  }
  return w.str();
}

inline std::string panel_to_csv(const ZoneHourPanel& p) {
  csv::Writer w(p.injected() ? kInjectedPanelHeader : kPanelHeader);
  for (std::size_t z = 0; z < p.zones(); ++z)
    for (std::size_t t = 0; t < p.hours(); ++t) {
      w.cell(p.zone_ids()[z]).cell(t).cell(p.demand()(t, z)).cell(p.temp_c()(t, z));
      if (p.injected()) w.cell(p.s_mapped()(t, z)).cell(p.slr()(t, z));
      w.end_row();
    }
  return w.str();
}

inline std::string zone_meta_to_csv(const ZoneHourPanel& p) {
  csv::Writer w(kZoneMetaHeader);
  for (std::size_t z = 0; z < p.zones(); ++z) {
    w.cell(p.zone_ids()[z]).cell(p.capacity()[z]).cell(p.coords()[z].x_km).cell(p.coords()[z].y_km);
    w.end_row();
  }
  return w.str();
}

}  // namespace evres
