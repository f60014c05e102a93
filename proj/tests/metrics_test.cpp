#include <doctest.h>

#include <fstream>

#include <graspalign/metrics.hpp>

#include "test_util.hpp"

using namespace graspalign;

namespace {

PixelSet set_of(std::initializer_list<std::pair<double, double>> pts) {
  PixelSet s;
  s.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  Eigen::Index i = 0;
  for (const auto& [u, v] : pts) {
    s.points(i, 0) = u;
    s.points(i, 1) = v;
    ++i;
  }
  return s;
}

}  // namespace

TEST_CASE("avg_min_distance hand values") {
  const PixelSet a = set_of({{0, 0}, {10, 0}});
  const PixelSet b = set_of({{0, 0}});
  CHECK(avg_min_distance(a, a) == doctest::Approx(0.0));
  CHECK(avg_min_distance(set_of({{0, 0}}), set_of({{3, 4}})) ==
        doctest::Approx(5.0));
  // Asymmetry witness: D(A,B) = (0 + 10)/2 = 5, D(B,A) = 0.
  CHECK(avg_min_distance(a, b) == doctest::Approx(5.0));
  CHECK(avg_min_distance(b, a) == doctest::Approx(0.0));
  CHECK(symmetrized(a, b) == doctest::Approx(2.5));
}

TEST_CASE("symmetrized is symmetric and zero on identical sets") {
  detail::Rng rng(3);
  PixelSet a, b;
  a.points.resize(50, 2);
  b.points.resize(70, 2);
  for (Eigen::Index i = 0; i < 50; ++i) {
    a.points(i, 0) = rng.uniform(0, 100);
    a.points(i, 1) = rng.uniform(0, 100);
  }
  for (Eigen::Index i = 0; i < 70; ++i) {
    b.points(i, 0) = rng.uniform(0, 100);
    b.points(i, 1) = rng.uniform(0, 100);
  }
  CHECK(symmetrized(a, a) == doctest::Approx(0.0));
  CHECK(symmetrized(a, b) ==
        doctest::Approx(symmetrized(b, a)).epsilon(1e-12));
  CHECK(avg_min_distance(a, b) >= 0.0);
}

TEST_CASE("grid-accelerated nearest search matches brute force") {
  detail::Rng rng(7);
  PixelSet a, b;
  a.points.resize(200, 2);
  b.points.resize(300, 2);
  for (Eigen::Index i = 0; i < a.points.rows(); ++i) {
    a.points(i, 0) = rng.uniform(-50, 700);
    a.points(i, 1) = rng.uniform(-50, 500);
  }
  for (Eigen::Index i = 0; i < b.points.rows(); ++i) {
    b.points(i, 0) = rng.uniform(-50, 700);
    b.points(i, 1) = rng.uniform(-50, 500);
  }
  const double fast = avg_min_distance(a, b);
  const double brute = detail_metrics::avg_min_distance_brute(a, b);
  CHECK(fast == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("silhouette_pixels enumerates set pixels as (column, row)") {
  SUBCASE("single pixel") {
    BinaryRaster mask;
    mask.width = 5;
    mask.height = 4;
    mask.data.assign(20, 0);
    mask.at(3, 2) = 1;
    const PixelSet s = silhouette_pixels(mask);
    REQUIRE(s.points.rows() == 1);
    CHECK(s.points(0, 0) == 3.0);
    CHECK(s.points(0, 1) == 2.0);
  }
  SUBCASE("full 2x2 mask") {
    BinaryRaster mask;
    mask.width = 2;
    mask.height = 2;
    mask.data.assign(4, 1);
    CHECK(silhouette_pixels(mask).points.rows() == 4);
  }
  SUBCASE("checkerboard enumeration") {
    BinaryRaster mask;
    mask.width = 4;
    mask.height = 4;
    mask.data.assign(16, 0);
    int expected = 0;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        if ((r + c) % 2 == 0) {
          mask.at(c, r) = 1;
          ++expected;
        }
      }
    }
    const PixelSet s = silhouette_pixels(mask);
    CHECK(s.points.rows() == expected);
    CHECK(expected == 8);
    for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
      const int c = static_cast<int>(s.points(i, 0));
      const int r = static_cast<int>(s.points(i, 1));
      CHECK((r + c) % 2 == 0);
    }
  }
  SUBCASE("empty mask is an error") {
    BinaryRaster empty;
    empty.width = 3;
    empty.height = 3;
    empty.data.assign(9, 0);
    CHECK_THROWS_AS(silhouette_pixels(empty), InvalidInput);
  }
}

TEST_CASE("render_overlay") {
  testing::TempDir dir("overlay");
  const Intrinsics k{100.0, 100.0, 8.0, 6.0};
  BinaryRaster mask;
  mask.width = 16;
  mask.height = 12;
  mask.data.assign(static_cast<size_t>(16) * 12, 0);
  for (int r = 4; r < 8; ++r) {
    for (int c = 5; c < 10; ++c) {
      mask.at(c, r) = 1;
    }
  }

  SUBCASE("back-projected mask pixels land exactly on the silhouette") {
    const PixelSet sil = silhouette_pixels(mask);
    DenseCloud cloud;
    cloud.points.resize(sil.points.rows(), 3);
    for (Eigen::Index i = 0; i < sil.points.rows(); ++i) {
      cloud.points(i, 0) = (sil.points(i, 0) - k.cx) / k.fx;
      cloud.points(i, 1) = (sil.points(i, 1) - k.cy) / k.fy;
      cloud.points(i, 2) = 1.0;
    }
    const MatX3 projected = transform_points(cloud.points,
                                             Transform3::identity());
    PixelSet reproj;
    reproj.points.resize(projected.rows(), 2);
    for (Eigen::Index i = 0; i < projected.rows(); ++i) {
      reproj.points(i, 0) =
          (k.fx * projected(i, 0) + k.cx * projected(i, 2)) / projected(i, 2);
      reproj.points(i, 1) =
          (k.fy * projected(i, 1) + k.cy * projected(i, 2)) / projected(i, 2);
    }
    CHECK(symmetrized(reproj, sil) == doctest::Approx(0.0));
    render_overlay(cloud, Transform3::identity(), k, mask,
                   dir.path() / "exact.ppm");
  }

  SUBCASE("empty-after-clipping cloud renders just the mask") {
    DenseCloud behind;
    behind.points.resize(3, 3);
    behind.points << 0, 0, -1, 0.5, 0.5, -2, 100, 100, 1e-12;
    render_overlay(behind, Transform3::identity(), k, mask,
                   dir.path() / "clipped.ppm");
    std::ifstream f(dir.path() / "clipped.ppm", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
    size_t header_end = 0;
    for (int newlines = 0; header_end < bytes.size() && newlines < 3;
         ++header_end) {
      if (bytes[header_end] == '\n') ++newlines;
    }
    size_t white = 0, accent = 0;
    for (size_t i = header_end; i + 2 < bytes.size(); i += 3) {
      const unsigned char r = bytes[i], g = bytes[i + 1], b = bytes[i + 2];
      if (r == 255 && g == 255 && b == 255) ++white;
      if (r == 255 && g == 96 && b == 0) ++accent;
    }
    CHECK(white == mask.count_set());
    CHECK(accent == 0);
  }

  SUBCASE("identical inputs produce identical bytes") {
    DenseCloud cloud;
    cloud.points.resize(2, 3);
    cloud.points << 0.01, 0.0, 1.0, -0.02, 0.01, 1.2;
    render_overlay(cloud, Transform3::identity(), k, mask,
                   dir.path() / "d1.ppm");
    render_overlay(cloud, Transform3::identity(), k, mask,
                   dir.path() / "d2.ppm");
    std::ifstream f1(dir.path() / "d1.ppm", std::ios::binary);
    std::ifstream f2(dir.path() / "d2.ppm", std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK_FALSE(b1.empty());
  }
}

TEST_CASE("distance is zero exactly when every point has a coincident match") {
  PixelSet a = set_of({{1, 2}, {3, 4}});
  PixelSet b = set_of({{3, 4}, {1, 2}, {9, 9}});
  CHECK(avg_min_distance(a, b) == 0.0);
  PixelSet c = set_of({{1, 2}, {3, 4.0001}});
  CHECK(avg_min_distance(c, b) > 0.0);
}
