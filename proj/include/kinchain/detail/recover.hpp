#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "kinchain/chain.hpp"

namespace kinchain::detail {

// Scalar-generic chain recovery, shared by the public double API and the
// autodiff objective in fitting.
template <typename Scalar>
std::vector<Eigen::Matrix<Scalar, 3, 1>> recover_chain_impl(
    const KinematicChain& chain, const std::vector<Eigen::Matrix<Scalar, 3, 1>>& unconstrained,
    std::vector<Diagnostic>* warnings) {
  using std::sqrt;
  using V = Eigen::Matrix<Scalar, 3, 1>;
  // shift[k] is the accumulated correction t_k carried by joint k's subtree.
  std::vector<V> shift(chain.size(), V::Zero());
  std::vector<V> revised(chain.size());
  revised[chain.root()] = unconstrained[chain.root()];
  for (const std::size_t j : chain.order()) {
    for (const std::size_t k : chain.children(j)) {
      const Vec3 canonical = chain.position(k) - chain.position(j);
      const double length = canonical.norm();
      const V direction = unconstrained[k] - unconstrained[j];
      const Scalar norm = sqrt(direction.squaredNorm());
      if (norm < Scalar(1e-12 * length)) {
        shift[k] = revised[j] + canonical.cast<Scalar>() - unconstrained[k];
        if (warnings != nullptr) {
          warnings->push_back({DiagnosticKind::kDegenerateDirection, chain.joint(k).id,
                               "coincident unconstrained joints " + std::to_string(chain.joint(j).id) +
                                   " and " + std::to_string(chain.joint(k).id) +
                                   "; canonical offset used"});
        }
      } else {
        const Scalar mu = Scalar(length) / norm;
        shift[k] = shift[j] + direction * (mu - Scalar(1));
      }
      revised[k] = unconstrained[k] + shift[k];
    }
  }
  return revised;
}

}  // namespace kinchain::detail
