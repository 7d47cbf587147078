#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kinchain/kernels.hpp"
#include "kinchain/skinning.hpp"

namespace kinchain::kernels {

void deform_points_parallel(std::span<const Vec3> points, const AnchorSet& anchors,
                            std::span<const RigidTransform> transforms, const RigidTransform& root,
                            std::span<Vec3> out) {
  if (out.size() != points.size()) throw std::invalid_argument("deform_points: output size mismatch");
  const long n = static_cast<long>(points.size());
#pragma omp parallel for schedule(static)
  for (long v = 0; v < n; ++v) {
    const SkinningWeights w = forward_skin_weights(points[v], anchors);
    out[v] = deform_point(points[v], w, transforms, root);
  }
}

PointGrid::PointGrid(std::span<const Vec3> points) : points_(points) {
  if (points.empty()) throw std::invalid_argument("PointGrid: empty point set");
  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  const double per_axis = std::max(1.0, std::cbrt(static_cast<double>(points.size())));
  cell_ = std::max(extent.maxCoeff() / per_axis, 1e-12);
  origin_ = lo;
  for (int a = 0; a < 3; ++a)
    dims_[a] = std::max(1L, static_cast<long>(std::floor(extent[a] / cell_)) + 1);

  const std::size_t cells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  std::vector<std::size_t> cell_of(points.size());
  std::vector<std::size_t> counts(cells + 1, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    long c[3];
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(static_cast<long>(std::floor((points[i][a] - origin_[a]) / cell_)), 0L,
                        dims_[a] - 1);
    cell_of[i] = cell_index(c[0], c[1], c[2]);
    ++counts[cell_of[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) counts[c + 1] += counts[c];
  cell_start_ = counts;
  sorted_.resize(points.size());
  std::vector<std::size_t> fill(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) sorted_[fill[cell_of[i]]++] = i;
}

void PointGrid::nearest(const Vec3& q, double& distance, std::size_t& index) const {
  long c[3];
  for (int a = 0; a < 3; ++a)
    c[a] = std::clamp(static_cast<long>(std::floor((q[a] - origin_[a]) / cell_)), 0L, dims_[a] - 1);

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  const long max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  for (long r = 0; r <= max_ring; ++r) {
    const long z0 = std::max(c[2] - r, 0L), z1 = std::min(c[2] + r, dims_[2] - 1);
    const long y0 = std::max(c[1] - r, 0L), y1 = std::min(c[1] + r, dims_[1] - 1);
    const long x0 = std::max(c[0] - r, 0L), x1 = std::min(c[0] + r, dims_[0] - 1);
    for (long z = z0; z <= z1; ++z) {
      for (long y = y0; y <= y1; ++y) {
        const bool inner_zy = std::abs(z - c[2]) < r && std::abs(y - c[1]) < r;
        for (long x = x0; x <= x1; ++x) {
          if (inner_zy && std::abs(x - c[0]) < r) continue;  // visited in an earlier ring
          const std::size_t cell = cell_index(x, y, z);
          for (std::size_t s = cell_start_[cell]; s < cell_start_[cell + 1]; ++s) {
            const std::size_t i = sorted_[s];
            const double d2 = (q - points_[i]).squaredNorm();
            if (d2 < best || (d2 == best && i < best_index)) {
              best = d2;
              best_index = i;
            }
          }
        }
      }
    }
    // Distance from q to the nearest face of the visited block that still has
    // unvisited cells beyond it.
    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (c[a] - r > 0) bound = std::min(bound, q[a] - (origin_[a] + (c[a] - r) * cell_));
      if (c[a] + r + 1 < dims_[a]) bound = std::min(bound, origin_[a] + (c[a] + r + 1) * cell_ - q[a]);
    }
    if (bound == std::numeric_limits<double>::infinity()) break;
    // Margin absorbs rounding in cell assignment and squared distances.
    if (bound > 0.0 && best < bound * bound * (1.0 - 1e-9)) break;
  }
  distance = std::sqrt(best);
  index = best_index;
}

NearestNeighbors nearest_parallel(std::span<const Vec3> queries, std::span<const Vec3> reference) {
  if (reference.empty()) throw std::invalid_argument("nearest: empty reference set");
  const PointGrid grid(reference);
  NearestNeighbors out;
  out.distance.resize(queries.size());
  out.index.resize(queries.size());
  const long n = static_cast<long>(queries.size());
#pragma omp parallel for schedule(static)
  for (long q = 0; q < n; ++q) grid.nearest(queries[q], out.distance[q], out.index[q]);
  return out;
}

}  // namespace kinchain::kernels
