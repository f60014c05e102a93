#pragma once

#include <vector>

#include <graspalign/pointmaps.hpp>
#include <graspalign/se3.hpp>

namespace graspalign {

/// Free variables of the pairwise-to-global alignment. Each (pair, member)
/// edge carries a pose and positive scale; a model point for edge e and
/// pixel x is P_e applied to (sigma_e * x). The gauge anchor is edge 0
/// (first member of the first pair): identity pose, scale 1.
struct GlobalAlignmentVariables {
  std::vector<Pointmap> global_maps;   // one per image
  std::vector<Transform3> pair_poses;  // 2 per pair: index 2*pair + slot
  std::vector<double> pair_scales;     // same indexing, all > 0

  void validate() const;
};

struct GlobalAlignmentResult {
  DenseCloud dense;
  std::vector<Transform3> camera_poses;
  double final_loss = 0.0;
  bool converged = false;
  int iterations = 0;
  // Loss after every accepted optimizer step (non-increasing).
  std::vector<double> accepted_losses;
};

struct AlignOptions {
  int max_iters = 500;
  double lr = 1e-2;
  double conf_threshold = 1.5;
  int threads = 1;
};

/// Confidence-weighted sum of unsquared point distances (the global
/// alignment objective). Nonnegative; zero on perfectly consistent input.
double alignment_loss(const GlobalAlignmentVariables& vars,
                      const std::vector<PairPrediction>& preds,
                      int threads = 1);

/// Jointly recovers global maps plus per-edge poses and scales, then
/// extracts the dense cloud (pixels above conf_threshold) and per-image
/// camera poses. Throws DisconnectedGraph if the pairs do not connect all
/// images and InvalidInput when nothing supervises the problem.
GlobalAlignmentResult global_align(const std::vector<PairPrediction>& preds,
                                   const AlignOptions& opts = {});

/// Raw-parameter view of the alignment objective. Parameters are packed as
/// all global-map coordinates followed, per non-anchored edge, by the 3x3
/// pose block (column-major), translation and log scale. Poses are plain
/// matrix entries here so derivatives can be checked off-manifold.
class AlignmentObjective {
 public:
  AlignmentObjective(const std::vector<PairPrediction>& preds,
                     bool anchor_fixed, int threads = 1);

  Eigen::Index param_count() const { return param_count_; }
  int image_count() const { return image_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  VecX pack(const GlobalAlignmentVariables& vars) const;
  GlobalAlignmentVariables unpack(const VecX& params) const;

  double loss(const VecX& params) const;
  double loss_and_grad(const VecX& params, VecX& grad) const;

  /// Re-projects every pose block onto SE(3) in place.
  void project_poses(VecX& params) const;

  /// Confidence-weighted spanning-tree initialization (similarity fits).
  GlobalAlignmentVariables initial_guess() const;

 private:
  struct Edge {
    int pair = 0;
    int slot = 0;   // 0: member n, 1: member m
    int image = 0;  // image whose pixels this edge's raster indexes
  };

  const Pointmap& raster(const Edge& e) const;
  const ConfidenceMap& conf(const Edge& e) const;
  double loss_and_grad_impl(const VecX& params, VecX* grad) const;
  Eigen::Index map_offset(int image) const { return map_offsets_[image]; }
  Eigen::Index edge_offset(int edge) const;

  const std::vector<PairPrediction>& preds_;
  std::vector<Edge> edges_;
  std::vector<Eigen::Index> map_offsets_;
  std::vector<int> image_width_, image_height_;
  Eigen::Index maps_size_ = 0;
  Eigen::Index param_count_ = 0;
  int image_count_ = 0;
  bool anchor_fixed_ = true;
  int threads_ = 1;

  friend GlobalAlignmentResult global_align(
      const std::vector<PairPrediction>&, const AlignOptions&);
};

}  // namespace graspalign
