#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "anchorpose/camera_crop.hpp"
#include "anchorpose/codec.hpp"
#include "anchorpose/correspondence.hpp"
#include "anchorpose/metrics.hpp"
#include "anchorpose/solver.hpp"
#include "anchorpose/synth.hpp"

namespace anchorpose {

// Independent seed for item `index` of a run seeded with `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers write results
// into slot i, so the output order never depends on scheduling. The first
// exception (by index) is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// How a scene goes from ground truth to a pose estimate.
struct PipelineOptions {
  int res = kCorrespondenceRes;
  double zoom = 1.5;  // crop window = zoom * longest side of the tight box
  IntrinsicsMode intrinsics = IntrinsicsMode::kCropAdjusted;
  double mask_threshold = 0.5;
  // RANSAC for 3d3d / 2d3d. Without it they are plain least squares.
  bool robust = true;
  RansacOptions ransac_3d{0.02, 256, 0};
  RansacOptions ransac_2d{3.0, 256, 0};
  FusedOptions fused{};
};

Roi pipeline_roi(const SceneSample& scene, const PipelineOptions& options);

struct SceneResult {
  std::string scene_id;
  bool solved = false;
  std::string failure;  // error code name when not solved
  SolveReport report;
  EvalRecord record;
};

// Solves a correspondence set in the given mode: RANSAC (or plain least
// squares when options.robust is off) for 3d3d and 2d3d, solve_fused for fused. `seed` drives the RANSAC sampling.
SolveReport solve_correspondences(const CorrSet& corr, const Intrinsics& k_crop, SolveMode mode,
                                  const PipelineOptions& options, std::uint64_t seed);

// Ground-truth maps, corruption with `noise`, correspondence extraction,
// solving, evaluation. Solver failures produce an unsolved result evaluated
// at the identity pose.
SceneResult run_scene(const ObjectModel& model, const AnchorSet& anchors, const SceneSample& scene,
                      const NoiseSpec& noise, SolveMode mode, const PipelineOptions& options);

// run_scene over every scene; scene i gets noise seed derive_seed(noise.seed, i).
std::vector<SceneResult> run_benchmark(const ObjectModel& model, const AnchorSet& anchors,
                                       const std::vector<SceneSample>& scenes,
                                       const NoiseSpec& noise, SolveMode mode,
                                       const PipelineOptions& options, int jobs = 1);

struct BenchmarkSpec {
  Shape shape = Shape::kBlob;
  std::size_t n_points = 6000;
  double scale = 0.1;  // meters
  std::string object_id = "obj";
  std::size_t n_scenes = 50;
  std::vector<double> occlusion_levels{1.0};
  SceneConfig scene{};
};

struct Benchmark {
  ObjectModel model;
  std::vector<SceneSample> scenes;
};

// The model and scenes are pure functions of spec (scene.seed included).
Benchmark build_benchmark(const BenchmarkSpec& spec);

struct RowStats {
  double add01d_pct = 0.0;
  double auc = 0.0;  // ADD(-S) AUC, fraction
  double deg10cm10_pct = 0.0;
  double mean_rot_deg = 0.0;
  double mean_trans_m = 0.0;
  std::size_t failures = 0;
};

RowStats summarize(const std::vector<SceneResult>& results);

// The "direct coordinate" baseline: one anchor at the model centroid.
AnchorSet centroid_anchor_set(const ObjectModel& model);

struct AnchorAblationConfig {
  std::vector<std::size_t> ks{4, 8, 16, 32, 64, 128};
  bool include_baseline = true;
  // sigma = relative_sigma * covering_radius(K), unless absolute is set.
  double relative_sigma = 2.0;
  bool absolute = false;
  double absolute_sigma = 0.005;
  SolveMode mode = SolveMode::k3d3d;
  std::uint64_t seed = 0;
  PipelineOptions pipeline{};
};

struct AnchorAblationRow {
  std::size_t k = 0;
  double covering_radius = 0.0;
  double sigma = 0.0;
  RowStats stats;
};

std::vector<AnchorAblationRow> ablate_anchors(const Benchmark& bench,
                                              const AnchorAblationConfig& config, int jobs = 1);
// Columns: K, covering_radius, add01d_pct, auc, deg10cm10_pct.
std::string anchor_ablation_csv(const std::vector<AnchorAblationRow>& rows);

struct CorrAblationConfig {
  std::size_t k = kDefaultAnchorCount;
  NoiseSpec noise{0.002, 0.0, 0.0, 0.005, 0.0, 0};
  std::uint64_t seed = 0;
  PipelineOptions pipeline{};
};

struct CorrAblationRow {
  SolveMode mode = SolveMode::k2d3d;
  RowStats stats;
};

// Rows in the fixed order 2d3d, 3d3d, fused; all three see identical maps.
std::vector<CorrAblationRow> ablate_corr(const Benchmark& bench, const CorrAblationConfig& config,
                                         int jobs = 1);
// Columns: mode, add01d_pct, auc, deg10cm10_pct, mean_rot_deg, mean_trans_m.
std::string corr_ablation_csv(const std::vector<CorrAblationRow>& rows);

struct IntrinsicsAblationConfig {
  std::size_t k = kDefaultAnchorCount;
  NoiseSpec noise{0.0, 0.0, 0.0, 0.0, 0.5, 0};
  std::uint64_t seed = 0;
  PipelineOptions pipeline{};
};

struct IntrinsicsAblationRow {
  std::string name;  // "K_org" or "K_crop"
  RowStats stats;
};

// 2d3d solving on maps built with the unadjusted K_org, then with K_crop.
std::vector<IntrinsicsAblationRow> ablate_intrinsics(const Benchmark& bench,
                                                     const IntrinsicsAblationConfig& config,
                                                     int jobs = 1);
// Columns: intrinsics, add01d_pct, auc, deg10cm10_pct, mean_rot_deg, mean_trans_m.
std::string intrinsics_ablation_csv(const std::vector<IntrinsicsAblationRow>& rows);

// Shared number formatting for CSV output.
std::string format_number(double v);

}  // namespace anchorpose
