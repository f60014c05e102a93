#include <doctest.h>

#include <fstream>

#include <graspalign/io.hpp>

#include "test_util.hpp"

using namespace graspalign;

TEST_CASE("ply round trip preserves float32 payloads exactly") {
  testing::TempDir dir("ply");
  DenseCloud cloud;
  cloud.points.resize(5, 3);
  cloud.points << 0.1f, -2.25f, 3.5f,
      1e-7f, 123456.0f, -0.0625f,
      0.333333343f, 1.0f, 2.0f,
      -7.0f, 0.0f, 9.125f,
      4.0f, 5.0f, 6.0f;
  cloud.confidence = VecX(5);
  *cloud.confidence << 1.0f, 2.5f, 0.0f, 1.25f, 3.0f;

  const auto path = dir.path() / "cloud.ply";
  write_ply(path, cloud);
  const DenseCloud back = read_ply(path);
  CHECK((back.points - cloud.points).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.confidence.has_value());
  CHECK((*back.confidence - *cloud.confidence).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ply without confidence") {
  testing::TempDir dir("ply2");
  DenseCloud cloud;
  cloud.points.resize(2, 3);
  cloud.points << 1, 2, 3, 4, 5, 6;
  const auto path = dir.path() / "bare.ply";
  write_ply(path, cloud);
  const DenseCloud back = read_ply(path);
  CHECK_FALSE(back.confidence.has_value());
  CHECK(back.points.rows() == 2);
}

TEST_CASE("pgm masks round trip with threshold semantics") {
  testing::TempDir dir("pgm");
  BinaryRaster mask;
  mask.width = 4;
  mask.height = 3;
  mask.data = {1, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0, 1};
  const auto path = dir.path() / "mask.pgm";
  write_pgm_mask(path, mask);
  const BinaryRaster back = read_pgm_mask(path);
  CHECK(back.width == 4);
  CHECK(back.height == 3);
  CHECK(back.data == mask.data);
  CHECK(back.count_set() == 6);
}

TEST_CASE("pgm reader applies the 128 threshold") {
  testing::TempDir dir("pgm_thr");
  const auto path = dir.path() / "gray.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n2 1\n255\n";
    const unsigned char px[2] = {127, 128};
    out.write(reinterpret_cast<const char*>(px), 2);
  }
  const BinaryRaster mask = read_pgm_mask(path);
  CHECK(mask.at(0, 0) == 0);
  CHECK(mask.at(1, 0) == 1);
}

TEST_CASE("ppm writer emits deterministic bytes") {
  testing::TempDir dir("ppm");
  RgbImage img;
  img.width = 2;
  img.height = 2;
  img.rgb.assign(12, 0);
  img.set(0, 0, 255, 96, 0);
  img.set(1, 1, 255, 255, 255);
  const auto a = dir.path() / "a.ppm";
  const auto b = dir.path() / "b.ppm";
  write_ppm(a, img);
  write_ppm(b, img);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(sa.substr(0, 2) == "P6");
}

TEST_CASE("missing files raise InvalidInput") {
  CHECK_THROWS_AS(read_ply("/nonexistent/x.ply"), InvalidInput);
  CHECK_THROWS_AS(read_pgm_mask("/nonexistent/x.pgm"), InvalidInput);
}
