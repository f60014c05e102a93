#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include <graspalign/se3.hpp>

#include "test_util.hpp"

using namespace graspalign;

namespace {

Transform3 rz(double angle, const Vec3& t = Vec3::Zero()) {
  return Transform3(Rotation3::about_axis(Vec3::UnitZ(), angle), t);
}

}  // namespace

TEST_CASE("compose identity and inverse") {
  detail::Rng rng(7);
  const Transform3 t = testing::random_transform(rng);
  CHECK(testing::transform_diff(compose(Transform3::identity(), t), t) <
        1e-12);
  CHECK(testing::transform_diff(compose(t, inverse(t)),
                                Transform3::identity()) < 1e-9);
}

TEST_CASE("compose matches hand-multiplied matrices") {
  // Rz(90) with translation (1,0,0), then Rz(90): Rz(180) at (1,0,0).
  const Transform3 a = rz(M_PI / 2.0, Vec3(1, 0, 0));
  const Transform3 b = rz(M_PI / 2.0);
  const Transform3 c = compose(a, b);
  Mat4 expected = Mat4::Identity();
  expected(0, 0) = -1.0;
  expected(1, 1) = -1.0;
  expected(0, 3) = 1.0;
  CHECK(testing::max_abs_diff(c.matrix(), expected) < 1e-12);
}

TEST_CASE("compose is associative") {
  detail::Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const Transform3 a = testing::random_transform(rng);
    const Transform3 b = testing::random_transform(rng);
    const Transform3 c = testing::random_transform(rng);
    CHECK(testing::transform_diff(compose(compose(a, b), c),
                                  compose(a, compose(b, c))) < 1e-12);
  }
}

TEST_CASE("apply_points matches the row-batch shorthand") {
  DenseCloud cloud;
  cloud.points.resize(1, 3);

  SUBCASE("identity") {
    cloud.points << 0.3, -0.2, 0.9;
    const DenseCloud out = apply_points(cloud, Transform3::identity());
    CHECK((out.points - cloud.points).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("pure translation moves the origin") {
    cloud.points << 0, 0, 0;
    const Transform3 t(Rotation3::identity(), Vec3(1, 2, 3));
    const DenseCloud out = apply_points(cloud, t);
    CHECK(out.points(0, 0) == doctest::Approx(1.0));
    CHECK(out.points(0, 1) == doctest::Approx(2.0));
    CHECK(out.points(0, 2) == doctest::Approx(3.0));
  }
  SUBCASE("rotation about z maps x to y") {
    cloud.points << 1, 0, 0;
    const DenseCloud out = apply_points(cloud, rz(M_PI / 2.0));
    CHECK(out.points(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.points(0, 1) == doctest::Approx(1.0));
  }
}

TEST_CASE("apply_points round trip and confidence carry") {
  detail::Rng rng(3);
  DenseCloud cloud;
  cloud.points.resize(40, 3);
  for (Eigen::Index i = 0; i < cloud.points.rows(); ++i) {
    cloud.points.row(i) = rng.gaussian3().transpose();
  }
  cloud.confidence = VecX::Constant(40, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Transform3 t = testing::random_transform(rng);
    const DenseCloud back = apply_points(apply_points(cloud, t), inverse(t));
    CHECK((back.points - cloud.points).cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE(back.confidence.has_value());
    CHECK((*back.confidence - *cloud.confidence).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("procrustes_project fixed point and scaling removal") {
  detail::Rng rng(11);
  const Mat3 r = testing::random_rotation(rng).matrix();
  CHECK((procrustes_project(r).matrix() - r).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((procrustes_project(2.0 * Mat3::Identity()).matrix() -
         Mat3::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("procrustes_project beats a coarse rotation grid") {
  // Reflection-contaminated near-skew input; brute-force search over
  // axis-angle samples cannot find anything closer in Frobenius norm.
  Mat3 skew;
  skew << 0, -0.01, 0.004, 0.01, 0, -0.007, -0.004, 0.007, 0;
  const Mat3 m =
      Vec3(1, 1, -1).asDiagonal() * (Mat3::Identity() + skew);
  const Rotation3 projected = procrustes_project(m);
  CHECK((projected.matrix().transpose() * projected.matrix() -
         Mat3::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK(projected.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-9));

  const double projected_cost = (projected.matrix() - m).norm();
  detail::Rng rng(29);
  double best_grid = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20000; ++i) {
    const Mat3 candidate = testing::random_rotation(rng).matrix();
    best_grid = std::min(best_grid, (candidate - m).norm());
  }
  CHECK(projected_cost <= best_grid + 1e-9);
}

TEST_CASE("procrustes_project rejects rank-deficient input") {
  Mat3 degenerate = Mat3::Zero();
  degenerate(0, 0) = 1.0;
  CHECK_THROWS_AS(procrustes_project(degenerate), InvalidInput);
}

TEST_CASE("procrustes output satisfies rotation invariants on random input") {
  detail::Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        m(r, c) = rng.gaussian();
      }
    }
    if (std::abs(m.determinant()) < 1e-3) {
      continue;
    }
    const Mat3 r = procrustes_project(m).matrix();
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("se3_distance basic values") {
  const Transform3 t = rz(0.7, Vec3(0.1, 0.2, 0.3));
  CHECK(se3_distance(t, t, 1.0) == doctest::Approx(0.0));
  CHECK(se3_distance(Transform3::identity(),
                     Transform3(Rotation3::identity(), Vec3(3, 4, 0)),
                     1.0) == doctest::Approx(5.0));
  CHECK(se3_distance(Transform3::identity(), rz(M_PI / 2.0), 1.0) ==
        doctest::Approx(M_PI / 2.0));
}

TEST_CASE("se3_distance is symmetric and nonnegative") {
  detail::Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const Transform3 a = testing::random_transform(rng);
    const Transform3 b = testing::random_transform(rng);
    const double d_ab = se3_distance(a, b, 1.0);
    CHECK(d_ab >= 0.0);
    CHECK(d_ab == doctest::Approx(se3_distance(b, a, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("rotation constructor repairs small drift and rejects junk") {
  detail::Rng rng(23);
  const Mat3 r = testing::random_rotation(rng).matrix();
  const Mat3 drifted = r + 1e-8 * Mat3::Ones();
  const Rotation3 repaired(drifted);
  CHECK((repaired.matrix().transpose() * repaired.matrix() -
         Mat3::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK_THROWS_AS(Rotation3(2.0 * r), InvalidInput);
}

TEST_CASE("transform homogeneous form and json round trip") {
  detail::Rng rng(31);
  const Transform3 t = testing::random_transform(rng);
  const Mat4 m = t.matrix();
  CHECK(m(3, 0) == 0.0);
  CHECK(m(3, 1) == 0.0);
  CHECK(m(3, 2) == 0.0);
  CHECK(m(3, 3) == 1.0);

  const Transform3 back = transform_from_json(transform_to_json(t));
  CHECK(testing::transform_diff(t, back) < 1e-15);

  Mat4 bad = m;
  bad(3, 3) = 2.0;
  CHECK_THROWS_AS(Transform3::from_matrix(bad), InvalidInput);
}

TEST_CASE("intrinsics validation and K layout") {
  Intrinsics k{500.0, 480.0, 320.0, 240.0};
  k.validate();
  const Mat3 km = k.K();
  CHECK(km(2, 2) == 1.0);
  CHECK(km(1, 0) == 0.0);
  CHECK(km(0, 2) == doctest::Approx(320.0));
  Intrinsics bad{0.0, 1.0, 0.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}
