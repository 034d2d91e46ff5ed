#include "anchorpose/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <random>
#include <thread>

#include "anchorpose/error.hpp"

namespace anchorpose {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Roi pipeline_roi(const SceneSample& scene, const PipelineOptions& options) {
  return square_roi(scene.bbox, options.zoom, options.res);
}

SolveReport solve_correspondences(const CorrSet& corr, const Intrinsics& k_crop, SolveMode mode,
                                  const PipelineOptions& options, std::uint64_t seed) {
  switch (mode) {
    case SolveMode::k3d3d: {
      if (!options.robust) return solve_3d3d(corr);
      RansacOptions r = options.ransac_3d;
      r.seed = seed;
      return ransac(corr, SolveMode::k3d3d, r);
    }
    case SolveMode::k2d3d: {
      if (!options.robust) return solve_2d3d(corr, k_crop);
      RansacOptions r = options.ransac_2d;
      r.seed = seed;
      return ransac(corr, SolveMode::k2d3d, r, &k_crop);
    }
    case SolveMode::kFused: {
      FusedOptions f = options.fused;
      f.init_ransac.seed = seed;
      return solve_fused(corr, k_crop, f);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown solve mode");
}

SceneResult run_scene(const ObjectModel& model, const AnchorSet& anchors, const SceneSample& scene,
                      const NoiseSpec& noise, SolveMode mode, const PipelineOptions& options) {
  const Roi roi = pipeline_roi(scene, options);
  const DenseMaps gt = ground_truth_maps(scene, anchors, roi, options.intrinsics);
  const DenseMaps pred = corrupt(gt, anchors, noise);
  SceneResult result;
  result.scene_id = scene.scene_id;
  Pose estimate = Pose::identity();
  try {
    const CorrSet corr = extract_correspondences(pred, anchors, options.mask_threshold);
    result.report = solve_correspondences(corr, pred.grids.k_crop, mode, options,
                                          derive_seed(noise.seed, 1));
    estimate = result.report.pose;
    result.solved = true;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kNoForeground:
      case ErrorCode::kDegenerateConfiguration:
      case ErrorCode::kNoConsensus:
        result.failure = error_code_name(e.code());
        result.report.mode = mode;
        break;
      default:
        throw;
    }
  }
  result.record = make_eval_record(model, estimate, scene.gt_pose, scene.scene_id);
  return result;
}

std::vector<SceneResult> run_benchmark(const ObjectModel& model, const AnchorSet& anchors,
                                       const std::vector<SceneSample>& scenes,
                                       const NoiseSpec& noise, SolveMode mode,
                                       const PipelineOptions& options, int jobs) {
  std::vector<SceneResult> results(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    NoiseSpec n = noise;
    n.seed = derive_seed(noise.seed, i);
    results[i] = run_scene(model, anchors, scenes[i], n, mode, options);
  });
  return results;
}

Benchmark build_benchmark(const BenchmarkSpec& spec) {
  ObjectModel model =
      make_model(spec.shape, spec.n_points, spec.scale, spec.scene.seed, spec.object_id);
  std::vector<SceneSample> scenes =
      make_benchmark(model, spec.scene, spec.n_scenes, spec.occlusion_levels);
  return {std::move(model), std::move(scenes)};
}

RowStats summarize(const std::vector<SceneResult>& results) {
  if (results.empty()) throw Error(ErrorCode::kEmptyInput, "no scene results");
  std::vector<EvalRecord> records;
  RowStats stats;
  for (const SceneResult& r : results) {
    records.push_back(r.record);
    stats.mean_rot_deg += r.record.rot_deg;
    stats.mean_trans_m += r.record.trans_m;
    stats.failures += r.solved ? 0 : 1;
  }
  const double n = static_cast<double>(results.size());
  stats.mean_rot_deg /= n;
  stats.mean_trans_m /= n;
  const Summary s = evaluate_batch(records);
  stats.add01d_pct = s.average.add01d_pct;
  stats.auc = s.average.adds_auc_mixed;
  stats.deg10cm10_pct = s.average.deg10cm10_pct;
  return stats;
}

AnchorSet centroid_anchor_set(const ObjectModel& model) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : model.points()) c += p;
  c /= static_cast<double>(model.size());
  for (int d = 0; d < 3; ++d) c[d] = snap_to_lattice(c[d]);
  AnchorSet set;
  set.object_id = model.id();
  set.anchors = {c};
  set.covering_radius = covering_radius(model.points(), set.anchors);
  return set;
}

std::vector<AnchorAblationRow> ablate_anchors(const Benchmark& bench,
                                              const AnchorAblationConfig& config, int jobs) {
  std::vector<AnchorSet> sets;
  if (config.include_baseline) sets.push_back(centroid_anchor_set(bench.model));
  for (std::size_t k : config.ks) sets.push_back(build_anchor_set(bench.model, k));

  std::vector<AnchorAblationRow> rows;
  for (const AnchorSet& anchors : sets) {
    AnchorAblationRow row;
    row.k = anchors.size();
    row.covering_radius = anchors.covering_radius;
    row.sigma = config.absolute ? config.absolute_sigma
                                : config.relative_sigma * anchors.covering_radius;
    NoiseSpec noise;
    noise.residual_sigma = row.sigma;
    noise.seed = config.seed;
    row.stats = summarize(
        run_benchmark(bench.model, anchors, bench.scenes, noise, config.mode, config.pipeline, jobs));
    rows.push_back(row);
  }
  return rows;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string anchor_ablation_csv(const std::vector<AnchorAblationRow>& rows) {
  std::string out = "K,covering_radius,add01d_pct,auc,deg10cm10_pct\n";
  for (const AnchorAblationRow& r : rows) {
    out += std::to_string(r.k) + "," + format_number(r.covering_radius) + "," +
           format_number(r.stats.add01d_pct) + "," + format_number(r.stats.auc) + "," +
           format_number(r.stats.deg10cm10_pct) + "\n";
  }
  return out;
}

namespace {

std::string stats_columns(const RowStats& s) {
  return format_number(s.add01d_pct) + "," + format_number(s.auc) + "," +
         format_number(s.deg10cm10_pct) + "," + format_number(s.mean_rot_deg) + "," +
         format_number(s.mean_trans_m);
}

}  // namespace

std::vector<CorrAblationRow> ablate_corr(const Benchmark& bench, const CorrAblationConfig& config,
                                         int jobs) {
  const AnchorSet anchors = build_anchor_set(bench.model, config.k);
  NoiseSpec noise = config.noise;
  noise.seed = config.seed;
  std::vector<CorrAblationRow> rows;
  for (SolveMode mode : {SolveMode::k2d3d, SolveMode::k3d3d, SolveMode::kFused}) {
    rows.push_back({mode, summarize(run_benchmark(bench.model, anchors, bench.scenes, noise, mode,
                                                  config.pipeline, jobs))});
  }
  return rows;
}

std::string corr_ablation_csv(const std::vector<CorrAblationRow>& rows) {
  std::string out = "mode,add01d_pct,auc,deg10cm10_pct,mean_rot_deg,mean_trans_m\n";
  for (const CorrAblationRow& r : rows) out += mode_name(r.mode) + "," + stats_columns(r.stats) + "\n";
  return out;
}

std::vector<IntrinsicsAblationRow> ablate_intrinsics(const Benchmark& bench,
                                                     const IntrinsicsAblationConfig& config,
                                                     int jobs) {
  const AnchorSet anchors = build_anchor_set(bench.model, config.k);
  NoiseSpec noise = config.noise;
  noise.seed = config.seed;
  std::vector<IntrinsicsAblationRow> rows;
  const std::pair<const char*, IntrinsicsMode> variants[] = {
      {"K_org", IntrinsicsMode::kUnadjusted}, {"K_crop", IntrinsicsMode::kCropAdjusted}};
  for (const auto& [name, mode] : variants) {
    PipelineOptions p = config.pipeline;
    p.intrinsics = mode;
    rows.push_back({name, summarize(run_benchmark(bench.model, anchors, bench.scenes, noise,
                                                  SolveMode::k2d3d, p, jobs))});
  }
  return rows;
}

std::string intrinsics_ablation_csv(const std::vector<IntrinsicsAblationRow>& rows) {
  std::string out = "intrinsics,add01d_pct,auc,deg10cm10_pct,mean_rot_deg,mean_trans_m\n";
  for (const IntrinsicsAblationRow& r : rows) out += r.name + "," + stats_columns(r.stats) + "\n";
  return out;
}

}  // namespace anchorpose
