#include <graspalign/global_align.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <graspalign/detail/adam.hpp>
#include <graspalign/detail/log.hpp>
#include <graspalign/detail/parallel.hpp>
#include <graspalign/similarity.hpp>

namespace graspalign {

namespace {

constexpr Eigen::Index kEdgeParams = 13;  // 9 pose + 3 translation + log scale

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

void check_connected(const std::vector<PairPrediction>& preds,
                     int image_count) {
  std::vector<int> parent(image_count);
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& p : preds) {
    const int a = find_root(parent, p.n);
    const int b = find_root(parent, p.m);
    parent[a] = b;
  }
  const int root = find_root(parent, 0);
  for (int i = 1; i < image_count; ++i) {
    if (find_root(parent, i) != root) {
      throw DisconnectedGraph(
          "pair graph does not connect all images (image " +
          std::to_string(i) + " unreachable)");
    }
  }
}

}  // namespace

void GlobalAlignmentVariables::validate() const {
  if (pair_poses.size() != pair_scales.size()) {
    throw InvalidInput("GlobalAlignmentVariables: pose/scale count mismatch");
  }
  for (double s : pair_scales) {
    if (!(s > 0.0)) {
      throw InvalidInput("GlobalAlignmentVariables: scales must be positive");
    }
  }
  for (const auto& m : global_maps) {
    m.validate();
  }
}

AlignmentObjective::AlignmentObjective(
    const std::vector<PairPrediction>& preds, bool anchor_fixed, int threads)
    : preds_(preds), anchor_fixed_(anchor_fixed), threads_(threads) {
  if (preds.empty()) {
    throw InvalidInput("alignment: no pair predictions");
  }
  int max_image = 0;
  for (const auto& p : preds) {
    p.validate();
    max_image = std::max({max_image, p.n, p.m});
  }
  image_count_ = max_image + 1;
  if (image_count_ < 2) {
    throw InvalidInput("alignment: need at least 2 images");
  }

  image_width_.assign(image_count_, -1);
  image_height_.assign(image_count_, -1);
  std::vector<bool> seen(image_count_, false);
  auto note_image = [&](int image, int w, int h) {
    if (image_width_[image] < 0) {
      image_width_[image] = w;
      image_height_[image] = h;
    } else if (image_width_[image] != w || image_height_[image] != h) {
      throw InvalidInput("alignment: inconsistent raster size for image " +
                         std::to_string(image));
    }
    seen[image] = true;
  };
  edges_.reserve(preds.size() * 2);
  for (int p = 0; p < static_cast<int>(preds.size()); ++p) {
    const auto& pred = preds[static_cast<size_t>(p)];
    note_image(pred.n, pred.x_nn.width, pred.x_nn.height);
    note_image(pred.m, pred.x_nm.width, pred.x_nm.height);
    edges_.push_back(Edge{p, 0, pred.n});
    edges_.push_back(Edge{p, 1, pred.m});
  }
  for (int i = 0; i < image_count_; ++i) {
    if (!seen[i]) {
      throw InvalidInput("alignment: image index " + std::to_string(i) +
                         " never referenced by any pair");
    }
  }

  map_offsets_.resize(image_count_ + 1);
  Eigen::Index offset = 0;
  for (int i = 0; i < image_count_; ++i) {
    map_offsets_[i] = offset;
    offset += static_cast<Eigen::Index>(image_width_[i]) * image_height_[i] * 3;
  }
  map_offsets_[image_count_] = offset;
  maps_size_ = offset;
  const Eigen::Index free_edges =
      static_cast<Eigen::Index>(edges_.size()) - (anchor_fixed_ ? 1 : 0);
  param_count_ = maps_size_ + free_edges * kEdgeParams;
}

const Pointmap& AlignmentObjective::raster(const Edge& e) const {
  const auto& pred = preds_[static_cast<size_t>(e.pair)];
  return e.slot == 0 ? pred.x_nn : pred.x_nm;
}

const ConfidenceMap& AlignmentObjective::conf(const Edge& e) const {
  const auto& pred = preds_[static_cast<size_t>(e.pair)];
  return e.slot == 0 ? pred.c_nn : pred.c_nm;
}

Eigen::Index AlignmentObjective::edge_offset(int edge) const {
  if (anchor_fixed_) {
    if (edge == 0) {
      return -1;
    }
    return maps_size_ + static_cast<Eigen::Index>(edge - 1) * kEdgeParams;
  }
  return maps_size_ + static_cast<Eigen::Index>(edge) * kEdgeParams;
}

VecX AlignmentObjective::pack(const GlobalAlignmentVariables& vars) const {
  if (static_cast<int>(vars.global_maps.size()) != image_count_ ||
      vars.pair_poses.size() != edges_.size()) {
    throw InvalidInput("alignment pack: variable shape mismatch");
  }
  VecX params(param_count_);
  for (int i = 0; i < image_count_; ++i) {
    const auto& map = vars.global_maps[static_cast<size_t>(i)];
    const Eigen::Index n = map.pixel_count();
    for (Eigen::Index px = 0; px < n; ++px) {
      params.segment<3>(map_offsets_[i] + px * 3) =
          map.coords.row(px).transpose();
    }
  }
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    const Eigen::Index off = edge_offset(e);
    if (off < 0) {
      continue;
    }
    const auto& pose = vars.pair_poses[static_cast<size_t>(e)];
    const Mat3 r = pose.rotation().matrix();
    for (int c = 0; c < 3; ++c) {
      params.segment<3>(off + 3 * c) = r.col(c);
    }
    params.segment<3>(off + 9) = pose.translation();
    params(off + 12) = std::log(vars.pair_scales[static_cast<size_t>(e)]);
  }
  return params;
}

GlobalAlignmentVariables AlignmentObjective::unpack(const VecX& params) const {
  GlobalAlignmentVariables vars;
  vars.global_maps.resize(static_cast<size_t>(image_count_));
  for (int i = 0; i < image_count_; ++i) {
    auto& map = vars.global_maps[static_cast<size_t>(i)];
    map.width = image_width_[i];
    map.height = image_height_[i];
    map.coords.resize(map.pixel_count(), 3);
    for (Eigen::Index px = 0; px < map.pixel_count(); ++px) {
      map.coords.row(px) =
          params.segment<3>(map_offsets_[i] + px * 3).transpose();
    }
  }
  vars.pair_poses.resize(edges_.size());
  vars.pair_scales.resize(edges_.size());
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    const Eigen::Index off = edge_offset(e);
    if (off < 0) {
      vars.pair_poses[static_cast<size_t>(e)] = Transform3::identity();
      vars.pair_scales[static_cast<size_t>(e)] = 1.0;
      continue;
    }
    Mat3 r;
    for (int c = 0; c < 3; ++c) {
      r.col(c) = params.segment<3>(off + 3 * c);
    }
    vars.pair_poses[static_cast<size_t>(e)] =
        Transform3(Rotation3(r), params.segment<3>(off + 9));
    vars.pair_scales[static_cast<size_t>(e)] = std::exp(params(off + 12));
  }
  return vars;
}

void AlignmentObjective::project_poses(VecX& params) const {
  for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
    const Eigen::Index off = edge_offset(e);
    if (off < 0) {
      continue;
    }
    Mat3 r;
    for (int c = 0; c < 3; ++c) {
      r.col(c) = params.segment<3>(off + 3 * c);
    }
    const Mat3 projected = procrustes_project(r).matrix();
    for (int c = 0; c < 3; ++c) {
      params.segment<3>(off + 3 * c) = projected.col(c);
    }
  }
}

double AlignmentObjective::loss(const VecX& params) const {
  return loss_and_grad_impl(params, nullptr);
}

double AlignmentObjective::loss_and_grad(const VecX& params,
                                         VecX& grad) const {
  grad.setZero(param_count_);
  return loss_and_grad_impl(params, &grad);
}

double AlignmentObjective::loss_and_grad_impl(const VecX& params,
                                              VecX* grad) const {
  const size_t n_edges = edges_.size();
  const int chunks = std::max(1, std::min<int>(threads_, 8));
  std::vector<double> partial_loss(static_cast<size_t>(chunks), 0.0);
  std::vector<VecX> partial_grad;
  if (grad != nullptr && chunks > 1) {
    partial_grad.assign(static_cast<size_t>(chunks),
                        VecX::Zero(param_count_));
  }

  auto run = [&](size_t begin, size_t end, size_t chunk) {
    VecX* g = grad == nullptr ? nullptr
              : chunks > 1    ? &partial_grad[chunk]
                              : grad;
    double local = 0.0;
    for (size_t e = begin; e < end; ++e) {
      const Edge& edge = edges_[e];
      const Pointmap& x = raster(edge);
      const ConfidenceMap& c = conf(edge);
      const Eigen::Index map_off = map_offsets_[edge.image];
      const Eigen::Index off = edge_offset(static_cast<int>(e));

      Mat3 rot = Mat3::Identity();
      Vec3 t = Vec3::Zero();
      double log_sigma = 0.0;
      if (off >= 0) {
        for (int col = 0; col < 3; ++col) {
          rot.col(col) = params.segment<3>(off + 3 * col);
        }
        t = params.segment<3>(off + 9);
        log_sigma = params(off + 12);
      }
      const double sigma = std::exp(log_sigma);

      for (Eigen::Index px = 0; px < x.pixel_count(); ++px) {
        const double weight = c.values(px);
        if (weight == 0.0) {
          continue;
        }
        const Vec3 xi = x.coords.row(px).transpose();
        const Vec3 v = rot * (sigma * xi) + t;
        const Vec3 global = params.segment<3>(map_off + px * 3);
        const Vec3 r = global - v;
        const double norm = r.norm();
        local += weight * norm;
        // Subgradient at (numerically) zero residual is zero; without the
        // cutoff, exact-fit pixels emit unit-norm junk directions.
        if (g != nullptr && norm > 1e-10) {
          const Vec3 gr = (weight / norm) * r;
          g->segment<3>(map_off + px * 3) += gr;
          if (off >= 0) {
            g->segment<3>(off + 9) -= gr;
            for (int col = 0; col < 3; ++col) {
              g->segment<3>(off + 3 * col) -= gr * (sigma * xi(col));
            }
            (*g)(off + 12) -= gr.dot(v - t);
          }
        }
      }
    }
    partial_loss[chunk] = local;
  };

  detail::parallel_chunks(n_edges, chunks, run);

  double total = 0.0;
  for (double l : partial_loss) {
    total += l;
  }
  if (grad != nullptr && chunks > 1) {
    for (const auto& pg : partial_grad) {
      *grad += pg;
    }
  }
  return total;
}

GlobalAlignmentVariables AlignmentObjective::initial_guess() const {
  GlobalAlignmentVariables vars;
  vars.global_maps.resize(static_cast<size_t>(image_count_));
  vars.pair_poses.assign(edges_.size(), Transform3::identity());
  vars.pair_scales.assign(edges_.size(), 1.0);

  std::vector<bool> known(static_cast<size_t>(image_count_), false);
  const int anchor_image = preds_[0].n;
  vars.global_maps[static_cast<size_t>(anchor_image)] = preds_[0].x_nn;
  known[static_cast<size_t>(anchor_image)] = true;

  auto fit_edge = [&](const Pointmap& src, const ConfidenceMap& weights,
                      const Pointmap& dst_map) -> SimilarityFit {
    try {
      if (weights.values.sum() > 0.0) {
        return fit_similarity(src.coords, dst_map.coords, &weights.values);
      }
      return fit_similarity(src.coords, dst_map.coords);
    } catch (const InvalidInput&) {
      return SimilarityFit{};
    }
  };
  auto propagate = [&](const Pointmap& fitted_src, const ConfidenceMap& w,
                       int known_image, const Pointmap& other_src,
                       int unknown_image) {
    const SimilarityFit fit = fit_edge(
        fitted_src, w, vars.global_maps[static_cast<size_t>(known_image)]);
    Pointmap out = other_src;
    out.coords = transform_points(fit.scale * other_src.coords, fit.transform);
    vars.global_maps[static_cast<size_t>(unknown_image)] = std::move(out);
    known[static_cast<size_t>(unknown_image)] = true;
  };

  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (const auto& pred : preds_) {
      const bool kn = known[static_cast<size_t>(pred.n)];
      const bool km = known[static_cast<size_t>(pred.m)];
      if (kn && !km) {
        propagate(pred.x_nn, pred.c_nn, pred.n, pred.x_nm, pred.m);
        progressed = true;
      } else if (km && !kn) {
        propagate(pred.x_nm, pred.c_nm, pred.m, pred.x_nn, pred.n);
        progressed = true;
      }
    }
  }
  for (int i = 0; i < image_count_; ++i) {
    if (!known[static_cast<size_t>(i)]) {
      throw DisconnectedGraph("alignment init: image " + std::to_string(i) +
                              " unreachable from the anchor");
    }
  }

  for (size_t e = 0; e < edges_.size(); ++e) {
    if (anchor_fixed_ && e == 0) {
      continue;
    }
    const Edge& edge = edges_[e];
    const SimilarityFit fit =
        fit_edge(raster(edge), conf(edge),
                 vars.global_maps[static_cast<size_t>(edge.image)]);
    vars.pair_poses[e] = fit.transform;
    vars.pair_scales[e] = fit.scale;
  }
  return vars;
}

double alignment_loss(const GlobalAlignmentVariables& vars,
                      const std::vector<PairPrediction>& preds, int threads) {
  AlignmentObjective objective(preds, false, threads);
  vars.validate();
  return objective.loss(objective.pack(vars));
}

GlobalAlignmentResult global_align(const std::vector<PairPrediction>& preds,
                                   const AlignOptions& opts) {
  if (preds.empty()) {
    throw InvalidInput("global_align: no pair predictions");
  }
  int max_image = 0;
  for (const auto& p : preds) {
    max_image = std::max({max_image, p.n, p.m});
  }
  // Unreferenced intermediate indices are islands of the pair graph, so
  // connectivity is checked before the objective insists on full coverage.
  check_connected(preds, max_image + 1);
  AlignmentObjective objective(preds, true, opts.threads);

  double total_confidence = 0.0;
  for (const auto& p : preds) {
    total_confidence += p.c_nn.values.sum() + p.c_nm.values.sum();
  }
  if (total_confidence <= 0.0) {
    throw InvalidInput("no supervising pixels");
  }

  VecX params = objective.pack(objective.initial_guess());
  objective.project_poses(params);

  double loss_cur = objective.loss(params);
  GlobalAlignmentResult result;
  result.accepted_losses.push_back(loss_cur);

  detail::Adam adam(objective.param_count());
  VecX grad(objective.param_count());
  double backoff = 1.0;
  constexpr double kBackoffFloor = 1e-8;
  bool floored = false;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    if (backoff <= kBackoffFloor) {
      floored = true;
      break;
    }
    objective.loss_and_grad(params, grad);
    const double lr =
        detail::cosine_decay(opts.lr, iter, opts.max_iters) * backoff;
    if (lr <= 0.0) {
      break;
    }
    const auto snapshot = adam.save();
    VecX candidate = params;
    adam.step(candidate, grad, lr);
    objective.project_poses(candidate);
    const double loss_new = objective.loss(candidate);
    if (loss_new <= loss_cur) {
      params = std::move(candidate);
      loss_cur = loss_new;
      result.accepted_losses.push_back(loss_cur);
      backoff = std::min(1.0, backoff * 1.25);
    } else {
      adam.restore(snapshot);
      backoff *= 0.5;
    }
  }
  result.iterations = iter;
  result.final_loss = loss_cur;
  if (opts.max_iters == 0) {
    result.converged = false;
  } else if (floored) {
    result.converged = true;
  } else {
    const auto& acc = result.accepted_losses;
    const double prev = acc.size() >= 2 ? acc[acc.size() - 2] : acc.back();
    const double rel =
        (prev - acc.back()) / std::max(std::abs(prev), 1e-300);
    result.converged = rel < 1e-7;
  }
  GA_LOG_INFO("global_align: loss " << result.final_loss << " after " << iter
                                    << " iterations (converged="
                                    << result.converged << ")");

  const GlobalAlignmentVariables vars = objective.unpack(params);

  // Camera pose per image: every edge of a pair led by n maps pair-frame
  // points (camera n's frame) into the global frame, so its pose estimates
  // that camera's pose. Average the candidates.
  std::vector<std::vector<size_t>> leader_edges(
      static_cast<size_t>(objective.image_count()));
  for (size_t e = 0; e < static_cast<size_t>(objective.edge_count()); ++e) {
    const int pair = static_cast<int>(e / 2);
    leader_edges[static_cast<size_t>(preds[static_cast<size_t>(pair)].n)]
        .push_back(e);
  }
  for (int i = 0; i < objective.image_count(); ++i) {
    if (leader_edges[static_cast<size_t>(i)].empty()) {
      throw InvalidInput("image " + std::to_string(i) +
                         " never leads a pair; its camera pose is "
                         "underdetermined by the manifest");
    }
    Mat3 rot_sum = Mat3::Zero();
    Vec3 t_sum = Vec3::Zero();
    for (size_t e : leader_edges[static_cast<size_t>(i)]) {
      rot_sum += vars.pair_poses[e].rotation().matrix();
      t_sum += vars.pair_poses[e].translation();
    }
    const double k =
        static_cast<double>(leader_edges[static_cast<size_t>(i)].size());
    result.camera_poses.push_back(
        Transform3(procrustes_project(rot_sum / k), t_sum / k));
  }

  // Dense extraction: a pixel's confidence is the best confidence any edge
  // assigns to it; keep pixels above the threshold. Order: image ascending,
  // pixel index ascending.
  std::vector<std::pair<int, Eigen::Index>> kept;
  std::vector<double> keep_conf;
  for (int i = 0; i < objective.image_count(); ++i) {
    const auto& map = vars.global_maps[static_cast<size_t>(i)];
    VecX best = VecX::Zero(map.pixel_count());
    for (size_t e = 0; e < static_cast<size_t>(objective.edge_count()); ++e) {
      const int pair = static_cast<int>(e / 2);
      const auto& pred = preds[static_cast<size_t>(pair)];
      const int image = (e % 2 == 0) ? pred.n : pred.m;
      if (image != i) {
        continue;
      }
      const auto& conf = (e % 2 == 0) ? pred.c_nn : pred.c_nm;
      best = best.cwiseMax(conf.values);
    }
    for (Eigen::Index px = 0; px < map.pixel_count(); ++px) {
      if (best(px) > opts.conf_threshold) {
        kept.emplace_back(i, px);
        keep_conf.push_back(best(px));
      }
    }
  }
  if (kept.empty()) {
    throw InvalidInput("no supervising pixels");
  }
  result.dense.points.resize(static_cast<Eigen::Index>(kept.size()), 3);
  VecX conf_out(static_cast<Eigen::Index>(kept.size()));
  for (size_t k = 0; k < kept.size(); ++k) {
    const auto& [image, px] = kept[k];
    result.dense.points.row(static_cast<Eigen::Index>(k)) =
        vars.global_maps[static_cast<size_t>(image)].coords.row(px);
    conf_out(static_cast<Eigen::Index>(k)) = keep_conf[k];
  }
  result.dense.confidence = conf_out;
  return result;
}

}  // namespace graspalign
