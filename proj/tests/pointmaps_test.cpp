#include <doctest.h>

#include <fstream>

#include <graspalign/pointmaps.hpp>

#include "test_util.hpp"

using namespace graspalign;

namespace {

PairPrediction make_pred(int w, int h, int n = 0, int m = 1) {
  detail::Rng rng(static_cast<uint64_t>(w * 100 + h));
  PairPrediction pred;
  pred.n = n;
  pred.m = m;
  auto fill = [&](Pointmap& map, ConfidenceMap& conf) {
    map.width = w;
    map.height = h;
    map.coords.resize(static_cast<Eigen::Index>(w) * h, 3);
    for (Eigen::Index i = 0; i < map.coords.rows(); ++i) {
      map.coords.row(i) = rng.gaussian3().transpose();
    }
    conf.width = w;
    conf.height = h;
    conf.values = VecX::Constant(static_cast<Eigen::Index>(w) * h, 2.0);
  };
  fill(pred.x_nn, pred.c_nn);
  fill(pred.x_nm, pred.c_nm);
  return pred;
}

BinaryRaster ones(int w, int h) {
  BinaryRaster r;
  r.width = w;
  r.height = h;
  r.data.assign(static_cast<size_t>(w) * h, 1);
  return r;
}

}  // namespace

TEST_CASE("mask_confidences") {
  const PairPrediction pred = make_pred(4, 3);

  SUBCASE("all-ones masks leave the prediction unchanged") {
    const PairPrediction out = mask_confidences(pred, ones(4, 3), ones(4, 3));
    CHECK((out.c_nn.values - pred.c_nn.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.c_nm.values - pred.c_nm.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("all-zero masks clear every confidence") {
    BinaryRaster zero = ones(4, 3);
    std::fill(zero.data.begin(), zero.data.end(), 0);
    const PairPrediction out = mask_confidences(pred, zero, zero);
    CHECK(out.c_nn.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.c_nm.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single masked pixel matches the elementwise product") {
    BinaryRaster mask = ones(4, 3);
    mask.at(2, 1) = 0;
    const PairPrediction out = mask_confidences(pred, mask, ones(4, 3));
    VecX expected = pred.c_nn.values;
    for (int h = 0; h < 3; ++h) {
      for (int w = 0; w < 4; ++w) {
        expected(pred.c_nn.index(w, h)) *= mask.at(w, h);
      }
    }
    CHECK((out.c_nn.values - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.c_nn.values(out.c_nn.index(2, 1)) == 0.0);
    CHECK((out.c_nm.values - pred.c_nm.values).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("size mismatch is rejected") {
    CHECK_THROWS_AS(mask_confidences(pred, ones(3, 3), ones(4, 3)),
                    InvalidInput);
  }
}

TEST_CASE("pair prediction validation") {
  PairPrediction pred = make_pred(3, 2);
  pred.m = pred.n;
  CHECK_THROWS_AS(pred.validate(), InvalidInput);
}

TEST_CASE("pmap files round trip bit-exactly") {
  testing::TempDir dir("pmap");
  const PairPrediction pred = make_pred(5, 4);
  // The format stores float32; quantize the reference the same way.
  Pointmap map = pred.x_nn;
  for (Eigen::Index i = 0; i < map.coords.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      map.coords(i, c) = static_cast<float>(map.coords(i, c));
    }
  }
  const auto path = dir.path() / "member.pmap";
  write_pmap(path, map, pred.c_nn);
  const auto [back_map, back_conf] = read_pmap(path);
  CHECK(back_map.width == 5);
  CHECK(back_map.height == 4);
  CHECK((back_map.coords - map.coords).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back_conf.values - pred.c_nn.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pmap header validation") {
  testing::TempDir dir("pmap_bad");
  const auto path = dir.path() / "bad.pmap";
  {
    std::ofstream out(path, std::ios::binary);
    out << "JUNKxxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_AS(read_pmap(path), InvalidInput);
}

TEST_CASE("manifest round trip resolves relative paths") {
  testing::TempDir dir("manifest");
  PairPrediction pred = make_pred(3, 3, 0, 1);
  for (Eigen::Index i = 0; i < pred.x_nn.coords.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      pred.x_nn.coords(i, c) = static_cast<float>(pred.x_nn.coords(i, c));
      pred.x_nm.coords(i, c) = static_cast<float>(pred.x_nm.coords(i, c));
    }
  }
  write_pmap(dir.path() / "a.pmap", pred.x_nn, pred.c_nn);
  write_pmap(dir.path() / "b.pmap", pred.x_nm, pred.c_nm);
  write_manifest(dir.path() / "manifest.json", {{"a.pmap", "b.pmap"}},
                 {{0, 1}});
  const auto preds = read_manifest(dir.path() / "manifest.json");
  REQUIRE(preds.size() == 1);
  CHECK(preds[0].n == 0);
  CHECK(preds[0].m == 1);
  CHECK((preds[0].x_nn.coords - pred.x_nn.coords).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((preds[0].x_nm.coords - pred.x_nm.coords).cwiseAbs().maxCoeff() ==
        0.0);
}
