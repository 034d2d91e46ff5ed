#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anchorpose/camera_crop.hpp"
#include "anchorpose/codec.hpp"
#include "anchorpose/grid.hpp"
#include "anchorpose/synth.hpp"

namespace anchorpose {

// Dense per-cell prediction (or ground truth) over a crop.
struct DenseMaps {
  int res = 0;
  std::size_t num_anchors = 0;  // K; region_probs carries K + 1 classes
  Grid<double> mask;
  // Cell (r, c) owns probabilities [(r * res + c) * (K + 1), ... + K + 1).
  std::vector<double> region_probs;
  Grid<Vec3> anchor_xyz;
  Grid<Vec3> residual;
  GridMaps grids;

  // Bookkeeping carried alongside the maps.
  std::string scene_id;
  std::string object_id;
  Pose gt_pose;

  std::size_t num_classes() const { return num_anchors + 1; }
  std::size_t cells() const { return static_cast<std::size_t>(res) * res; }
  double* probs(std::size_t cell) { return region_probs.data() + cell * num_classes(); }
  const double* probs(std::size_t cell) const { return region_probs.data() + cell * num_classes(); }
  // Most probable class of a cell, lowest index on ties.
  std::size_t argmax_class(std::size_t cell) const;
  std::vector<std::size_t> argmax_classes() const;
};

// Stand-in for network error, applied to ground-truth maps.
struct NoiseSpec {
  double residual_sigma = 0.0;   // meters, on residuals of masked cells
  double label_flip_prob = 0.0;  // per masked cell, class resampled over all K + 1
  double mask_flip_prob = 0.0;   // per cell
  double depth_sigma = 0.0;      // meters, moves valid cam_xyz along its ray
  double pixel_sigma = 0.0;      // crop-frame pixels, on uv of valid cells
  std::uint64_t seed = 0;

  void validate() const;
};

// Harness defaults; not derived from any trained network.
NoiseSpec default_noise_spec(std::uint64_t seed);

// Throws ObjectMismatch when scene and anchors name different objects.
DenseMaps ground_truth_maps(const SceneSample& scene, const AnchorSet& anchors, const Roi& roi,
                            IntrinsicsMode mode = IntrinsicsMode::kOriginalWarped);

DenseMaps corrupt(const DenseMaps& maps, const AnchorSet& anchors, const NoiseSpec& noise);

// Mean absolute difference over cells.
double loss_mask(const Grid<double>& pred, const Grid<double>& gt);

// Mean over cells with mask > 0 of -log(max(mask * p[gt], 1e-12)). The mask
// multiplies the probabilities without renormalization; 0 when no cell is on.
double loss_coarse(const std::vector<double>& pred_probs, std::size_t num_classes,
                   const std::vector<std::size_t>& gt_classes, const Grid<double>& pred_mask);

// Mean over cells with mask > 0.5 of the L1 norm of pred - gt; 0 if none.
double loss_fine(const Grid<Vec3>& pred, const Grid<Vec3>& gt, const Grid<double>& mask);

struct LossComponents {
  double mask = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
};

// Unweighted sum of the three map losses and the pose term. Throws NonFinite.
double loss_total(const LossComponents& components, double pose_error_term);

LossComponents compute_losses(const DenseMaps& pred, const DenseMaps& gt);

// Directory of PFM planes plus manifest.json. Planes are float32, so a round
// trip loses precision beyond single-precision.
void save_dense_maps(const std::filesystem::path& dir, const DenseMaps& maps);
DenseMaps load_dense_maps(const std::filesystem::path& dir);

}  // namespace anchorpose
