#include <graspalign/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace graspalign {

void PixelSet::validate() const {
  if (points.rows() < 1) {
    throw InvalidInput("PixelSet: empty set");
  }
  if (!points.allFinite()) {
    throw InvalidInput("PixelSet: non-finite coordinates");
  }
}

namespace detail_metrics {

double avg_min_distance_brute(const PixelSet& a, const PixelSet& b) {
  a.validate();
  b.validate();
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.points.rows(); ++j) {
      const double dx = a.points(i, 0) - b.points(j, 0);
      const double dy = a.points(i, 1) - b.points(j, 1);
      best = std::min(best, dx * dx + dy * dy);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(a.points.rows());
}

}  // namespace detail_metrics

namespace {

// Uniform-grid nearest-point index over a fixed point set.
class PixelGrid {
 public:
  explicit PixelGrid(const MatX2& pts) : pts_(pts) {
    lo_ = pts.colwise().minCoeff();
    const Vec2 hi = pts.colwise().maxCoeff();
    const double extent = std::max((hi - lo_).maxCoeff(), 1e-9);
    const double target_cells =
        std::clamp(std::sqrt(static_cast<double>(pts.rows())), 1.0, 2048.0);
    cell_ = extent / target_cells;
    nx_ = static_cast<int>((hi.x() - lo_.x()) / cell_) + 1;
    ny_ = static_cast<int>((hi.y() - lo_.y()) / cell_) + 1;
    cells_.resize(static_cast<size_t>(nx_) * ny_);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      cells_[cell_index(pts(i, 0), pts(i, 1))].push_back(i);
    }
  }

  double min_distance(double x, double y) const {
    const int cx = coord_x(x);
    const int cy = coord_y(y);
    double best_sq = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      // Once a candidate is found, rings whose nearest possible point is
      // farther than the current best cannot improve it.
      if (std::isfinite(best_sq)) {
        const double ring_min = (ring - 1) * cell_;
        if (ring_min > 0 && ring_min * ring_min > best_sq) {
          break;
        }
      }
      scan_ring(cx, cy, ring, x, y, best_sq);
    }
    return std::sqrt(best_sq);
  }

 private:
  int coord_x(double x) const {
    return std::clamp(static_cast<int>((x - lo_.x()) / cell_), 0, nx_ - 1);
  }
  int coord_y(double y) const {
    return std::clamp(static_cast<int>((y - lo_.y()) / cell_), 0, ny_ - 1);
  }
  size_t cell_index(double x, double y) const {
    return static_cast<size_t>(coord_y(y)) * nx_ + coord_x(x);
  }

  void scan_cell(int cx, int cy, double x, double y, double& best_sq) const {
    if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) {
      return;
    }
    for (Eigen::Index i : cells_[static_cast<size_t>(cy) * nx_ + cx]) {
      const double dx = pts_(i, 0) - x;
      const double dy = pts_(i, 1) - y;
      best_sq = std::min(best_sq, dx * dx + dy * dy);
    }
  }

  void scan_ring(int cx, int cy, int ring, double x, double y,
                 double& best_sq) const {
    if (ring == 0) {
      scan_cell(cx, cy, x, y, best_sq);
      return;
    }
    for (int dx = -ring; dx <= ring; ++dx) {
      scan_cell(cx + dx, cy - ring, x, y, best_sq);
      scan_cell(cx + dx, cy + ring, x, y, best_sq);
    }
    for (int dy = -ring + 1; dy <= ring - 1; ++dy) {
      scan_cell(cx - ring, cy + dy, x, y, best_sq);
      scan_cell(cx + ring, cy + dy, x, y, best_sq);
    }
  }

  const MatX2& pts_;
  Vec2 lo_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<Eigen::Index>> cells_;
};

}  // namespace

double avg_min_distance(const PixelSet& a, const PixelSet& b) {
  a.validate();
  b.validate();
  if (a.points.rows() * b.points.rows() < 4096) {
    return detail_metrics::avg_min_distance_brute(a, b);
  }
  const PixelGrid grid(b.points);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.points.rows(); ++i) {
    total += grid.min_distance(a.points(i, 0), a.points(i, 1));
  }
  return total / static_cast<double>(a.points.rows());
}

double symmetrized(const PixelSet& a, const PixelSet& b) {
  return 0.5 * (avg_min_distance(a, b) + avg_min_distance(b, a));
}

PixelSet silhouette_pixels(const BinaryRaster& mask) {
  const size_t count = mask.count_set();
  if (count == 0) {
    throw InvalidInput("silhouette_pixels: empty mask");
  }
  PixelSet set;
  set.points.resize(static_cast<Eigen::Index>(count), 2);
  Eigen::Index row = 0;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (mask.at(c, r) != 0) {
        set.points(row, 0) = c;
        set.points(row, 1) = r;
        ++row;
      }
    }
  }
  return set;
}

void render_overlay(const DenseCloud& cloud, const Transform3& pose,
                    const Intrinsics& intrinsics, const BinaryRaster& mask,
                    const std::filesystem::path& out_path) {
  cloud.validate();
  intrinsics.validate();
  RgbImage image;
  image.width = mask.width;
  image.height = mask.height;
  image.rgb.assign(static_cast<size_t>(mask.width) * mask.height * 3, 0);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (mask.at(c, r) != 0) {
        image.set(c, r, 255, 255, 255);
      }
    }
  }
  const MatX3 pts = transform_points(cloud.points, pose);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const double w = pts(i, 2);
    if (!(w > 1e-9)) {
      continue;  // behind the camera: clipped
    }
    const double u = (intrinsics.fx * pts(i, 0) + intrinsics.cx * w) / w;
    const double v = (intrinsics.fy * pts(i, 1) + intrinsics.cy * w) / w;
    const int col = static_cast<int>(std::lround(u));
    const int row = static_cast<int>(std::lround(v));
    if (col < 0 || row < 0 || col >= mask.width || row >= mask.height) {
      continue;
    }
    image.set(col, row, 255, 96, 0);
  }
  write_ppm(out_path, image);
}

}  // namespace graspalign
