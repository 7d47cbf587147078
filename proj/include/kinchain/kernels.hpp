#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kinchain/se3.hpp"

namespace kinchain {
struct AnchorSet;
}

// Data-parallel inner loops. Each *_serial function is the reference the
// OpenMP variant is tested against; both produce bitwise-identical output
// for any thread count.
namespace kinchain::kernels {

void deform_points_serial(std::span<const Vec3> points, const AnchorSet& anchors,
                          std::span<const RigidTransform> transforms, const RigidTransform& root,
                          std::span<Vec3> out);
void deform_points_parallel(std::span<const Vec3> points, const AnchorSet& anchors,
                            std::span<const RigidTransform> transforms, const RigidTransform& root,
                            std::span<Vec3> out);

/// Nearest reference point for every query. Ties go to the lowest reference
/// index.
struct NearestNeighbors {
  std::vector<double> distance;
  std::vector<std::size_t> index;
};

/// O(n*m) double loop.
NearestNeighbors nearest_serial(std::span<const Vec3> queries, std::span<const Vec3> reference);

/// Uniform-grid search, queries distributed over OpenMP threads.
NearestNeighbors nearest_parallel(std::span<const Vec3> queries, std::span<const Vec3> reference);

/// Uniform grid over a point set; exposed for the benchmark and tests.
class PointGrid {
 public:
  explicit PointGrid(std::span<const Vec3> points);
  /// Exact nearest neighbour of q (ties to the lowest index).
  void nearest(const Vec3& q, double& distance, std::size_t& index) const;

 private:
  std::size_t cell_index(long x, long y, long z) const {
    return (static_cast<std::size_t>(z) * dims_[1] + static_cast<std::size_t>(y)) * dims_[0] +
           static_cast<std::size_t>(x);
  }

  std::span<const Vec3> points_;
  Vec3 origin_;
  double cell_ = 1.0;
  long dims_[3] = {1, 1, 1};
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> sorted_;
};

}  // namespace kinchain::kernels
