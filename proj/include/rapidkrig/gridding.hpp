#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rapidkrig/covariance.hpp"
#include "rapidkrig/errors.hpp"

namespace rapidkrig {

template <typename Scalar>
struct Domain {
  Scalar xmin = 0, xmax = 1, ymin = 0, ymax = 1;

  bool contains(Scalar x, Scalar y) const {
    return x >= xmin && x <= xmax && y >= ymin && y <= ymax;
  }
};

/// Integer offset (dx, dy) of a node relative to the lower-left corner of the central box.
struct GridOffset {
  int dx = 0;
  int dy = 0;
};

/// Offsets of the 2L x 2L block, row-major with x varying fastest. The central box has
/// corners (0,0), (1,0), (0,1), (1,1).
inline std::vector<GridOffset> block_offsets(int L) {
  std::vector<GridOffset> out;
  out.reserve(static_cast<std::size_t>(4 * L * L));
  for (int dy = -L + 1; dy <= L; ++dy)
    for (int dx = -L + 1; dx <= L; ++dx) out.push_back({dx, dy});
  return out;
}

/// Regular grid over a rectangle, extended by pad rows/columns on each side.
///
/// Node (px, py) in padded coordinates has flat index px + M1 * py and sits at
/// origin + ((px - pad_left) * hx, (py - pad_bottom) * hy).
template <typename Scalar>
struct PaddedGrid {
  Scalar x0 = 0, y0 = 0;
  Scalar hx = 1, hy = 1;
  Eigen::Index m1 = 0, m2 = 0;
  Eigen::Index pad_left = 0, pad_right = 0, pad_bottom = 0, pad_top = 0;

  Eigen::Index total_x() const { return m1 + pad_left + pad_right; }
  Eigen::Index total_y() const { return m2 + pad_bottom + pad_top; }
  Eigen::Index total_size() const { return total_x() * total_y(); }
  Eigen::Index interior_size() const { return m1 * m2; }

  Eigen::Index index(Eigen::Index px, Eigen::Index py) const { return px + total_x() * py; }
  std::array<Eigen::Index, 2> coords(Eigen::Index idx) const {
    return {idx % total_x(), idx / total_x()};
  }
  Point<Scalar> location(Eigen::Index px, Eigen::Index py) const {
    return {x0 + Scalar(px - pad_left) * hx, y0 + Scalar(py - pad_bottom) * hy};
  }
  Point<Scalar> location(Eigen::Index idx) const {
    const auto [px, py] = coords(idx);
    return location(px, py);
  }

  /// Padded flat index of interior node (ix, iy).
  Eigen::Index interior_to_padded(Eigen::Index ix, Eigen::Index iy) const {
    return index(ix + pad_left, iy + pad_bottom);
  }

  /// Interior nodes, row-major with x fastest.
  Locations<Scalar> interior_locations() const {
    Locations<Scalar> out(interior_size(), 2);
    for (Eigen::Index iy = 0; iy < m2; ++iy)
      for (Eigen::Index ix = 0; ix < m1; ++ix)
        out.row(ix + m1 * iy) << x0 + Scalar(ix) * hx, y0 + Scalar(iy) * hy;
    return out;
  }
};

namespace detail {

// Fractional grid coordinate, snapped onto a node when within rounding noise of it.
template <typename Scalar>
Scalar grid_coordinate(Scalar value, Scalar origin, Scalar spacing) {
  Scalar t = (value - origin) / spacing;
  const Scalar r = std::round(t);
  if (std::abs(t - r) < Scalar(1e-9) * std::max<Scalar>(Scalar(1), std::abs(r))) t = r;
  return t;
}

}  // namespace detail

/// Cell containing a location: interior-coordinate index of its lower-left node and the
/// fractional offset inside the cell. Points on a grid line belong to the cell above/right.
template <typename Scalar>
struct CellLocation {
  Eigen::Index ix = 0, iy = 0;
  Scalar fx = 0, fy = 0;
};

template <typename Scalar>
CellLocation<Scalar> locate_cell(const PaddedGrid<Scalar>& grid, Scalar x, Scalar y) {
  const Scalar tx = detail::grid_coordinate(x, grid.x0, grid.hx);
  const Scalar ty = detail::grid_coordinate(y, grid.y0, grid.hy);
  CellLocation<Scalar> c;
  c.ix = static_cast<Eigen::Index>(std::floor(tx));
  c.iy = static_cast<Eigen::Index>(std::floor(ty));
  c.fx = tx - Scalar(c.ix);
  c.fy = ty - Scalar(c.iy);
  return c;
}

/// Minimal padding so every observation has a full order-L neighborhood.
/// The interior grid spans the domain including both endpoints.
template <typename Scalar, typename Locs>
PaddedGrid<Scalar> build_padded_grid(const Domain<Scalar>& domain, Eigen::Index m1,
                                     Eigen::Index m2, int L, const Eigen::MatrixBase<Locs>& obs) {
  if (L < 1) throw DomainError("build_padded_grid: neighbor order L must be >= 1");
  if (m1 < 2 * L || m2 < 2 * L)
    throw DomainError("build_padded_grid: grid dimensions must be at least 2L in each direction");
  if (!(domain.xmax > domain.xmin) || !(domain.ymax > domain.ymin))
    throw DomainError("build_padded_grid: degenerate domain");

  PaddedGrid<Scalar> grid;
  grid.x0 = domain.xmin;
  grid.y0 = domain.ymin;
  grid.m1 = m1;
  grid.m2 = m2;
  grid.hx = (domain.xmax - domain.xmin) / Scalar(m1 - 1);
  grid.hy = (domain.ymax - domain.ymin) / Scalar(m2 - 1);

  Eigen::Index min_ix = std::numeric_limits<Eigen::Index>::max(), max_ix = 0;
  Eigen::Index min_iy = min_ix, max_iy = 0;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    const Scalar x = obs(i, 0), y = obs(i, 1);
    if (!domain.contains(x, y))
      throw DomainError("build_padded_grid: observation " + std::to_string(i) +
                        " lies outside the domain");
    const auto c = locate_cell(grid, x, y);
    min_ix = std::min(min_ix, c.ix);
    max_ix = std::max(max_ix, c.ix);
    min_iy = std::min(min_iy, c.iy);
    max_iy = std::max(max_iy, c.iy);
  }
  if (obs.rows() > 0) {
    grid.pad_left = std::max<Eigen::Index>(0, (L - 1) - min_ix);
    grid.pad_right = std::max<Eigen::Index>(0, max_ix + L - (m1 - 1));
    grid.pad_bottom = std::max<Eigen::Index>(0, (L - 1) - min_iy);
    grid.pad_top = std::max<Eigen::Index>(0, max_iy + L - (m2 - 1));
  }
  return grid;
}

/// The (2L)^2 padded-grid indices around one observation, in block_offsets order.
template <typename Scalar>
struct Neighborhood {
  Eigen::Index center_obs = -1;
  std::vector<Eigen::Index> indices;
  Scalar dx = 0, dy = 0;  // offset inside the central box, in units of spacing
};

template <typename Scalar, typename P>
Neighborhood<Scalar> neighborhood(const PaddedGrid<Scalar>& grid, const Eigen::MatrixBase<P>& loc,
                                  int L, Eigen::Index center_obs = -1) {
  const auto c = locate_cell(grid, Scalar(loc(0)), Scalar(loc(1)));
  const Eigen::Index cx = c.ix + grid.pad_left, cy = c.iy + grid.pad_bottom;
  if (cx - (L - 1) < 0 || cx + L >= grid.total_x() || cy - (L - 1) < 0 || cy + L >= grid.total_y())
    throw std::logic_error("neighborhood: block leaves the padded grid (padding contract violated)");
  Neighborhood<Scalar> nb;
  nb.center_obs = center_obs;
  nb.dx = c.fx;
  nb.dy = c.fy;
  nb.indices.reserve(static_cast<std::size_t>(4 * L * L));
  for (const auto& o : block_offsets(L)) nb.indices.push_back(grid.index(cx + o.dx, cy + o.dy));
  return nb;
}

/// Fill distance of a square grid with spacing h: half the cell diagonal.
template <typename Scalar>
Scalar fill_distance(Scalar h) {
  if (!(h > 0)) throw DomainError("fill_distance: spacing must be positive");
  return h * std::sqrt(Scalar(2)) / Scalar(2);
}

/// sup over candidates of the distance to the nearest node.
template <typename A, typename B>
typename A::Scalar fill_distance(const Eigen::MatrixBase<A>& nodes,
                                 const Eigen::MatrixBase<B>& candidates) {
  using Scalar = typename A::Scalar;
  if (nodes.rows() == 0) throw DomainError("fill_distance: no nodes");
  Scalar worst = 0;
  for (Eigen::Index c = 0; c < candidates.rows(); ++c) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < nodes.rows(); ++i)
      best = std::min(best, Scalar((nodes.row(i) - candidates.row(c)).squaredNorm()));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

}  // namespace rapidkrig
