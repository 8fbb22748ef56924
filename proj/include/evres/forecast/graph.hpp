#pragma once

#include <evres/panel.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace evres::forecast {

struct ZoneGraph {
  static constexpr double kDefaultRadiusKm = 5.0;

  Eigen::MatrixXd adjacency;       // binary, symmetric, zero diagonal
  Eigen::MatrixXd norm_adjacency;  // D^-1/2 (A + I) D^-1/2
  double radius_km = kDefaultRadiusKm;

  std::size_t zones() const { return static_cast<std::size_t>(adjacency.rows()); }
};

// Edge iff planar distance <= radius; self-loops added before symmetric normalisation.
inline ZoneGraph build_graph(const std::vector<ZoneCoord>& coords, double radius_km = ZoneGraph::kDefaultRadiusKm) {
  const auto n = static_cast<Eigen::Index>(coords.size());
  if (n == 0) throw Error("graph needs at least one zone");
  ZoneGraph g;
  g.radius_km = radius_km;
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = coords[static_cast<std::size_t>(i)].x_km - coords[static_cast<std::size_t>(j)].x_km;
      const double dy = coords[static_cast<std::size_t>(i)].y_km - coords[static_cast<std::size_t>(j)].y_km;
      if (std::hypot(dx, dy) <= radius_km) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
    }
  const Eigen::MatrixXd looped = g.adjacency + Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd inv_sqrt_deg = looped.rowwise().sum().cwiseSqrt().cwiseInverse();
  g.norm_adjacency = inv_sqrt_deg.asDiagonal() * looped * inv_sqrt_deg.asDiagonal();
  return g;
}

}  // namespace evres::forecast
