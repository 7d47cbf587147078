#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "kinchain/kernels.hpp"
#include "kinchain/metrics.hpp"
#include "support.hpp"

namespace kinchain {
namespace {

using testing::Rng;
using testing::random_transform;
using testing::random_vec;

std::vector<Vec3> cloud(Rng& rng, std::size_t n, double scale) {
  std::vector<Vec3> p(n);
  for (Vec3& x : p) x = random_vec(rng, scale);
  return p;
}

TEST(Chamfer, Examples) {
  Rng rng(51);
  const auto a = cloud(rng, 50, 1.0);
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_EQ(chamfer_distance(std::vector<Vec3>{Vec3(0, 0, 0)}, std::vector<Vec3>{Vec3(1, 0, 0)}), 1.0);
}

TEST(Chamfer, MatchesBruteForceDoubleLoop) {
  Rng rng(52);
  for (int c = 0; c < 20; ++c) {
    const auto a = cloud(rng, 200, 2.0), b = cloud(rng, 200, 2.0);
    double sa = 0.0, sb = 0.0;
    for (const Vec3& p : a) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : b) best = std::min(best, (p - q).norm());
      sa += best;
    }
    for (const Vec3& q : b) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& p : a) best = std::min(best, (q - p).norm());
      sb += best;
    }
    EXPECT_EQ(chamfer_distance(a, b), 0.5 * (sa / 200.0 + sb / 200.0));
  }
}

TEST(Chamfer, SymmetricAndRigidInvariant) {
  Rng rng(53);
  for (int c = 0; c < 20; ++c) {
    auto a = cloud(rng, 150, 3.0), b = cloud(rng, 90, 3.0);
    EXPECT_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
    const RigidTransform t = random_transform(rng, 3.0, 5.0);
    const double before = chamfer_distance(a, b);
    for (Vec3& p : a) p = apply_point(t, p);
    for (Vec3& p : b) p = apply_point(t, p);
    EXPECT_NEAR(chamfer_distance(a, b), before, 1e-9);
  }
}

TEST(Chamfer, UniformOffsetOfDenseSamplesApproachesOffset) {
  std::vector<Vec3> a, b;
  for (int i = 0; i <= 400; ++i) a.emplace_back(i / 400.0, 0, 0);
  for (const Vec3& p : a) b.push_back(p + Vec3(0, 0.05, 0));
  EXPECT_NEAR(chamfer_distance(a, b), 0.05, 1e-12);
}

TEST(Chamfer, EmptyThrows) {
  const std::vector<Vec3> none, one{Vec3::Zero()};
  EXPECT_THROW(chamfer_distance(none, one), std::invalid_argument);
  EXPECT_THROW(chamfer_distance(one, none), std::invalid_argument);
}

TEST(FScore, Examples) {
  Rng rng(54);
  const auto a = cloud(rng, 80, 1.0);
  EXPECT_EQ(f_score(a, a, 0.01), 100.0);
  std::vector<Vec3> far = a;
  for (Vec3& p : far) p += Vec3(100, 0, 0);
  EXPECT_EQ(f_score(a, far, 0.001), 0.0);
}

TEST(FScore, HalfPrecisionFullRecall) {
  // b spans a unit diagonal box; a has two points on b and two far away.
  const std::vector<Vec3> b{Vec3(0, 0, 0), Vec3(1, 1, 1)};
  const std::vector<Vec3> a{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(10, 0, 0), Vec3(0, 10, 0)};
  EXPECT_NEAR(f_score(a, b, 0.02), 200.0 * 0.5 / 1.5, 1e-12);
}

TEST(FScore, MonotoneInThreshold) {
  Rng rng(55);
  for (int c = 0; c < 20; ++c) {
    const auto a = cloud(rng, 120, 1.0), b = cloud(rng, 100, 1.0);
    double prev = 0.0;
    for (double f = 0.001; f < 0.5; f *= 1.5) {
      const double s = f_score(a, b, f);
      EXPECT_GE(s, prev);
      EXPECT_LE(s, 100.0);
      prev = s;
    }
  }
}

TEST(FScore, Errors) {
  const std::vector<Vec3> none, one{Vec3::Zero()};
  EXPECT_THROW(f_score(none, one, 0.02), std::invalid_argument);
  EXPECT_THROW(f_score(one, one, 0.0), std::invalid_argument);
}

TEST(Evaluate, ReportCombinesBothMetrics) {
  Rng rng(56);
  const auto a = cloud(rng, 60, 1.0), b = cloud(rng, 70, 1.0);
  const std::vector<double> fr{0.01, 0.05};
  const MetricReport r = evaluate(a, b, fr);
  EXPECT_EQ(r.chamfer, chamfer_distance(a, b));
  ASSERT_EQ(r.f_scores.size(), 2u);
  EXPECT_EQ(r.f_scores.at(0.05), f_score(a, b, 0.05));
}

TEST(BoundingBoxDiagonal, UnitCube) {
  const std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(0.5, 0.2, 0.9)};
  EXPECT_NEAR(bounding_box_diagonal(p), std::sqrt(3.0), 1e-15);
}

TEST(Nearest, GridEqualsBruteForceIncludingTies) {
  Rng rng(57);
  for (int c = 0; c < 50; ++c) {
    auto ref = cloud(rng, 1 + static_cast<std::size_t>(c) * 20, testing::uniform(rng, 0.01, 20.0));
    // Duplicates and an exactly coplanar slab.
    ref.insert(ref.end(), ref.begin(), ref.begin() + static_cast<long>(ref.size() / 3));
    if (c % 3 == 0)
      for (Vec3& p : ref) p.z() = 0.0;
    auto queries = cloud(rng, 300, 25.0);
    queries.insert(queries.end(), ref.begin(), ref.end());
    const auto fast = kernels::nearest_parallel(queries, ref);
    const auto slow = kernels::nearest_serial(queries, ref);
    EXPECT_EQ(fast.distance, slow.distance);
    EXPECT_EQ(fast.index, slow.index);
  }
}

TEST(Nearest, SinglePointReference) {
  const std::vector<Vec3> ref{Vec3(1, 2, 3)};
  const std::vector<Vec3> q{Vec3(0, 0, 0), Vec3(1, 2, 3)};
  const auto r = kernels::nearest_parallel(q, ref);
  EXPECT_EQ(r.index, (std::vector<std::size_t>{0, 0}));
  EXPECT_EQ(r.distance[1], 0.0);
}

}  // namespace
}  // namespace kinchain
