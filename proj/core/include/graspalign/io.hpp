#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <graspalign/se3.hpp>

namespace graspalign {

/// Row-major byte raster; pixel (col, row) at index row * width + col.
struct BinaryRaster {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  uint8_t at(int col, int row) const {
    return data[static_cast<size_t>(row) * width + col];
  }
  uint8_t& at(int col, int row) {
    return data[static_cast<size_t>(row) * width + col];
  }
  size_t count_set() const;
};

/// Row-major 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 bytes per pixel

  void set(int col, int row, uint8_t r, uint8_t g, uint8_t b);
};

// ASCII PLY with per-vertex x, y, z and optional confidence. Values are
// printed with enough digits that float32 payloads round-trip exactly.
void write_ply(const std::filesystem::path& path, const DenseCloud& cloud);
DenseCloud read_ply(const std::filesystem::path& path);

// Portable graymap (P5, maxval 255); read thresholds at 128.
BinaryRaster read_pgm_mask(const std::filesystem::path& path);
void write_pgm_mask(const std::filesystem::path& path,
                    const BinaryRaster& mask);

// Portable pixmap (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

}  // namespace graspalign
