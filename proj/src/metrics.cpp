#include "kinchain/metrics.hpp"

#include <stdexcept>

#include "kinchain/kernels.hpp"

namespace kinchain {
namespace {

void require_nonempty(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("metrics: empty point set");
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double share_within(const std::vector<double>& d, double threshold) {
  std::size_t n = 0;
  for (const double x : d)
    if (x <= threshold) ++n;
  return static_cast<double>(n) / static_cast<double>(d.size());
}

double f_from(const std::vector<double>& a_to_b, const std::vector<double>& b_to_a,
              double threshold) {
  const double precision = share_within(a_to_b, threshold);
  const double recall = share_within(b_to_a, threshold);
  if (precision + recall == 0.0) return 0.0;
  return 200.0 * precision * recall / (precision + recall);
}

}  // namespace

double bounding_box_diagonal(std::span<const Vec3> points) {
  if (points.empty()) throw std::invalid_argument("bounding_box_diagonal: empty point set");
  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_nonempty(a, b);
  const auto ab = kernels::nearest_parallel(a, b);
  const auto ba = kernels::nearest_parallel(b, a);
  return 0.5 * (mean(ab.distance) + mean(ba.distance));
}

double f_score(std::span<const Vec3> a, std::span<const Vec3> b, double threshold_fraction) {
  require_nonempty(a, b);
  if (!(threshold_fraction > 0.0)) throw std::invalid_argument("f_score: threshold must be positive");
  const auto ab = kernels::nearest_parallel(a, b);
  const auto ba = kernels::nearest_parallel(b, a);
  return f_from(ab.distance, ba.distance, threshold_fraction * bounding_box_diagonal(b));
}

MetricReport evaluate(std::span<const Vec3> predicted, std::span<const Vec3> reference,
                      std::span<const double> threshold_fractions) {
  require_nonempty(predicted, reference);
  const auto ab = kernels::nearest_parallel(predicted, reference);
  const auto ba = kernels::nearest_parallel(reference, predicted);
  MetricReport report;
  report.chamfer = 0.5 * (mean(ab.distance) + mean(ba.distance));
  const double diagonal = bounding_box_diagonal(reference);
  for (const double t : threshold_fractions) {
    if (!(t > 0.0)) throw std::invalid_argument("evaluate: thresholds must be positive");
    report.f_scores[t] = f_from(ab.distance, ba.distance, t * diagonal);
  }
  return report;
}

}  // namespace kinchain
