#pragma once

#include <graspalign/se3.hpp>

namespace graspalign {

/// Result of a similarity fit dst ~ scale * R * src + t.
struct SimilarityFit {
  double scale = 1.0;
  Transform3 transform;  // rotation R and translation t
  double rms = 0.0;      // weighted RMS residual after alignment
};

/// Weighted least-squares similarity between corresponding row batches.
/// Weights default to uniform. Throws InvalidInput on size mismatch,
/// fewer than 3 points, or a degenerate (rank-deficient) configuration.
SimilarityFit fit_similarity(const MatX3& src, const MatX3& dst,
                             const VecX* weights = nullptr);

/// Rigid-only variant (scale pinned to 1), e.g. for pose-from-points.
SimilarityFit fit_rigid(const MatX3& src, const MatX3& dst,
                        const VecX* weights = nullptr);

}  // namespace graspalign
