#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorpose/codec.hpp"
#include "anchorpose/correspondence.hpp"
#include "anchorpose/geom.hpp"

namespace anchorpose {

enum class SolveMode { k3d3d, k2d3d, kFused };

std::string mode_name(SolveMode mode);
SolveMode mode_from_name(const std::string& name);

// Dense correspondences: object-frame points paired with camera-frame points
// (3D-3D), crop-frame pixels (2D-3D), or both.
struct CorrSet {
  std::vector<Vec3> obj_pts;
  std::optional<std::vector<Vec3>> cam_pts;
  std::optional<std::vector<Vec2>> img_pts;
  std::vector<double> weights;

  std::size_t size() const { return obj_pts.size(); }
  // Throws Precondition on inconsistent lengths or bad weights.
  void validate() const;
  CorrSet subset(const std::vector<std::size_t>& indices) const;
};

struct SolveReport {
  Pose pose;
  std::size_t inlier_count = 0;
  double rmse = 0.0;  // meters for 3d3d, pixels for 2d3d, whitened units for fused
  int iterations = 0;
  SolveMode mode = SolveMode::k3d3d;
  bool converged = true;
  // Objective after every accepted Gauss-Newton step, starting at the init.
  std::vector<double> objective_trace;
};

nlohmann::json solve_report_to_json(const SolveReport& report);

// One correspondence per cell with mask > threshold, valid geometry and a
// non-background argmax class. img points are in the maps' crop frame, to be
// used with maps.grids.k_crop. Throws NoForeground when nothing survives.
CorrSet extract_correspondences(const DenseMaps& maps, const AnchorSet& anchors,
                                double mask_threshold = 0.5);

// Closed-form weighted least squares (Umeyama without scale) with reflection
// correction. Throws DegenerateConfiguration for < 3 points or collinear sets.
SolveReport solve_3d3d(const CorrSet& corr);

struct GaussNewtonOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
};

// Linear DLT pose from >= 6 non-coplanar 2D-3D pairs; nullopt when the
// configuration is planar or otherwise degenerate.
std::optional<Pose> dlt_pose(const CorrSet& corr, const Intrinsics& k);

// Weighted reprojection Gauss-Newton with step halving. Rotation updates are
// taken in the 6D representation, restricted to the three directions that
// change the rotation. Default init: solve_3d3d when cam_pts exist, otherwise
// DLT, otherwise identity rotation at 1 m depth. Throws
// DegenerateConfiguration for < 6 points. Non-convergence is reported via
// converged = false and iterations == max_iterations.
SolveReport solve_2d3d(const CorrSet& corr, const Intrinsics& k,
                       const std::optional<Pose>& init = std::nullopt,
                       const GaussNewtonOptions& options = {});

struct RansacOptions {
  double inlier_tol = 0.005;  // meters for 3d3d, pixels for 2d3d
  int max_iters = 256;
  std::uint64_t seed = 0;
};

// Hypothesize-and-verify over minimal samples (3 for 3d3d, 6 for 2d3d), then
// a refit on the best consensus set. The best hypothesis is chosen by
// (inliers, -rmse, lowest index). Throws NoConsensus below 10% inliers.
SolveReport ransac(const CorrSet& corr, SolveMode mode, const RansacOptions& options,
                   const Intrinsics* k = nullptr);

struct FusedOptions {
  double sigma_m = 0.005;  // meters
  double sigma_px = 1.0;   // pixels
  // Re-estimate both sigmas from the residuals of each term until they
  // settle. When false, sigma_m / sigma_px stay fixed.
  bool adaptive_balance = true;
  RansacOptions init_ransac{0.02, 256, 0};
  GaussNewtonOptions gauss_newton{};
};

// RANSAC 3d3d init, then Gauss-Newton on
// sum w (|R o + t - c|^2 / sigma_m^2 + |project(o) - img|^2 / sigma_px^2)
// over the consensus set.
SolveReport solve_fused(const CorrSet& corr, const Intrinsics& k, const FusedOptions& options = {});

struct PoseError {
  double rot_deg = 0.0;
  double trans_m = 0.0;
};

// Geodesic rotation angle in [0, 180] degrees and translation distance.
PoseError pose_error(const Pose& pred, const Pose& gt);

// Scalar pose term for the total loss: angle in radians plus meters.
double pose_loss_term(const PoseError& error);

}  // namespace anchorpose
