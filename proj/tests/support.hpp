#pragma once

#include <evres/common.hpp>
#include <evres/forecast/evaluate.hpp>
#include <evres/panel.hpp>

#include <filesystem>
#include <string>
#include <unistd.h>

namespace evres::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("evres_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    write_file_atomic(path_ / name, content);
    return path_ / name;
  }

private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

// T x Z panel whose demand cycles through `v` row-major; capacity and temperature are uniform.
inline ZoneHourPanel small_panel(std::size_t T, std::size_t Z, const std::vector<double>& v, double capacity = 100.0,
                                 double temp = 15.0) {
  Grid2<double> d(T, Z), tc(T, Z, temp);
  for (std::size_t i = 0; i < T * Z; ++i) d.raw()[i] = v[i % v.size()];
  std::vector<ZoneCoord> coords(Z);
  for (std::size_t z = 0; z < Z; ++z) coords[z] = {static_cast<double>(z) * 20.0, 0.0};
  return ZoneHourPanel(std::move(d), std::move(tc), std::vector<double>(Z, capacity), std::move(coords));
}

// Forecast series with one row per hour.
inline forecast::Forecasts make_forecasts(const std::vector<std::vector<double>>& vol, const std::vector<std::vector<double>>& slr) {
  forecast::Forecasts f;
  f.vol = Grid2<double>(vol.size(), vol.front().size());
  f.slr = Grid2<double>(slr.size(), slr.front().size());
  for (std::size_t t = 0; t < vol.size(); ++t)
    for (std::size_t z = 0; z < vol[t].size(); ++z) {
      f.vol(t, z) = vol[t][z];
      f.slr(t, z) = slr[t][z];
    }
  return f;
}

}  // namespace evres::testing
