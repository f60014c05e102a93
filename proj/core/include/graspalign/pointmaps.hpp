#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <graspalign/io.hpp>
#include <graspalign/se3.hpp>

namespace graspalign {

/// Per-pixel 3D coordinates in the frame of the pair's first image.
/// Rows are stored row-major: index = h * width + w.
struct Pointmap {
  int width = 0;
  int height = 0;
  MatX3 coords;

  Eigen::Index pixel_count() const {
    return static_cast<Eigen::Index>(width) * height;
  }
  Eigen::Index index(int w, int h) const {
    return static_cast<Eigen::Index>(h) * width + w;
  }
  void validate() const;
};

/// Per-pixel nonnegative confidence; masked-out pixels are exactly 0.
struct ConfidenceMap {
  int width = 0;
  int height = 0;
  VecX values;

  Eigen::Index index(int w, int h) const {
    return static_cast<Eigen::Index>(h) * width + w;
  }
  void validate() const;
};

/// Output of one pairwise pointmap query: both members' coordinates are in
/// the frame of image n.
struct PairPrediction {
  int n = 0;
  int m = 0;
  Pointmap x_nn;
  Pointmap x_nm;
  ConfidenceMap c_nn;
  ConfidenceMap c_nm;

  void validate() const;
};

/// Zeroes the confidence of masked-out pixels (mask value 0); everything
/// else is unchanged. Masks follow the raster dimensions of the pair.
PairPrediction mask_confidences(const PairPrediction& pred,
                                const BinaryRaster& mask_n,
                                const BinaryRaster& mask_m);

// PMAP container (little-endian): magic "PMAP", u32 version = 1, u32 W,
// u32 H, W*H*3 float32 coords (h outer, w inner, xyz innermost), then
// W*H float32 confidences. One file per (pair, member).
void write_pmap(const std::filesystem::path& path, const Pointmap& map,
                const ConfidenceMap& conf);
std::pair<Pointmap, ConfidenceMap> read_pmap(const std::filesystem::path& path);

// JSON manifest listing pairs: [{"n":0,"m":1,"x_nn":path,"x_nm":path}].
// Relative paths are resolved against the manifest's directory.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::array<std::string, 2>>& files,
                    const std::vector<std::pair<int, int>>& pairs);
std::vector<PairPrediction> read_manifest(const std::filesystem::path& path);

}  // namespace graspalign
