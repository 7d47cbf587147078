#include <limits>
#include <stdexcept>

#include "kinchain/kernels.hpp"
#include "kinchain/skinning.hpp"

namespace kinchain::kernels {

void deform_points_serial(std::span<const Vec3> points, const AnchorSet& anchors,
                          std::span<const RigidTransform> transforms, const RigidTransform& root,
                          std::span<Vec3> out) {
  if (out.size() != points.size()) throw std::invalid_argument("deform_points: output size mismatch");
  for (std::size_t v = 0; v < points.size(); ++v) {
    const SkinningWeights w = forward_skin_weights(points[v], anchors);
    out[v] = deform_point(points[v], w, transforms, root);
  }
}

NearestNeighbors nearest_serial(std::span<const Vec3> queries, std::span<const Vec3> reference) {
  if (reference.empty()) throw std::invalid_argument("nearest: empty reference set");
  NearestNeighbors out;
  out.distance.resize(queries.size());
  out.index.resize(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t r = 0; r < reference.size(); ++r) {
      const double d2 = (queries[q] - reference[r]).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_index = r;
      }
    }
    out.distance[q] = std::sqrt(best);
    out.index[q] = best_index;
  }
  return out;
}

}  // namespace kinchain::kernels
