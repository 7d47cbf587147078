#pragma once

#include <map>
#include <span>
#include <vector>

#include "kinchain/se3.hpp"

namespace kinchain {

/// Symmetric Chamfer distance: half the sum of the two directed mean
/// nearest-neighbour distances. Throws std::invalid_argument on an empty set.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// F-score in percent. The distance threshold is `threshold_fraction` times
/// the bounding-box diagonal of `b` (the reference set); precision is the
/// share of `a` within the threshold of `b`, recall the share of `b` within
/// the threshold of `a`.
double f_score(std::span<const Vec3> a, std::span<const Vec3> b, double threshold_fraction);

double bounding_box_diagonal(std::span<const Vec3> points);

struct MetricReport {
  double chamfer = 0.0;
  /// threshold fraction -> F-score percentage
  std::map<double, double> f_scores;
};

/// One nearest-neighbour pass shared by every metric.
MetricReport evaluate(std::span<const Vec3> predicted, std::span<const Vec3> reference,
                      std::span<const double> threshold_fractions);

}  // namespace kinchain
