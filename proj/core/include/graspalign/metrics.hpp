#pragma once

#include <filesystem>

#include <graspalign/io.hpp>
#include <graspalign/se3.hpp>

namespace graspalign {

/// A set of 2D pixel coordinates (continuous, not grid-bound).
struct PixelSet {
  MatX2 points;

  Eigen::Index size() const { return points.rows(); }
  void validate() const;
};

/// Average minimum pixel distance D(A, B): mean over a in A of the distance
/// to the closest b in B. Asymmetric.
double avg_min_distance(const PixelSet& a, const PixelSet& b);

/// Symmetrized metric 0.5 (D(A,B) + D(B,A)).
double symmetrized(const PixelSet& a, const PixelSet& b);

/// Pixel-center coordinates (u, v) = (column, row) of all set mask pixels.
PixelSet silhouette_pixels(const BinaryRaster& mask);

/// Writes a portable pixmap: silhouette white on black, projected cloud
/// points in a fixed accent color; out-of-frame points clipped.
void render_overlay(const DenseCloud& cloud, const Transform3& pose,
                    const Intrinsics& intrinsics, const BinaryRaster& mask,
                    const std::filesystem::path& out_path);

namespace detail_metrics {
/// Brute-force reference used as the oracle for the grid-accelerated path.
double avg_min_distance_brute(const PixelSet& a, const PixelSet& b);
}  // namespace detail_metrics

}  // namespace graspalign
