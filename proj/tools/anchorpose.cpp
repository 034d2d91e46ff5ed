// Command-line front end: gen -> anchors -> encode -> corrupt -> solve -> eval,
// plus the three ablation sweeps.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anchorpose/codec.hpp"
#include "anchorpose/correspondence.hpp"
#include "anchorpose/error.hpp"
#include "anchorpose/experiments.hpp"
#include "anchorpose/io.hpp"
#include "anchorpose/mesh.hpp"
#include "anchorpose/metrics.hpp"
#include "anchorpose/solver.hpp"
#include "anchorpose/synth.hpp"

namespace fs = std::filesystem;
using namespace anchorpose;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 1;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create directory " + dir.string() +
                                    (ec ? ": " + ec.message() : ""));
  }
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  return g.out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad number '" + item + "' in list '" + text + "'");
    }
  }
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "empty list");
  return values;
}

// A model given as a PLY file (id = file stem) or a registry JSON entry.
ObjectModel load_model_arg(const fs::path& path) {
  if (path.extension() == ".json") return load_registered_model(path);
  return load_ply(path);
}

nlohmann::json read_manifest(const fs::path& dir, const std::string& kind) {
  const nlohmann::json j = read_json(dir / "manifest.json");
  if (j.value("kind", "") != kind) {
    throw Error(ErrorCode::kParseError,
                (dir / "manifest.json").string() + ": expected a '" + kind + "' manifest");
  }
  return j;
}

// Scene set written by `gen`.
struct SceneSet {
  ObjectModel model;
  std::vector<SceneSample> scenes;
};

SceneSet load_scene_set(const fs::path& dir) {
  const nlohmann::json m = read_manifest(dir, "scene_set");
  ObjectModel model = load_registered_model(dir / m.at("model").get<std::string>());
  std::vector<SceneSample> scenes;
  for (const auto& s : m.at("scenes")) {
    scenes.push_back(load_scene(dir / s.at("dir").get<std::string>(), model));
  }
  return {std::move(model), std::move(scenes)};
}

std::vector<std::pair<std::string, fs::path>> list_maps(const fs::path& dir) {
  const nlohmann::json m = read_manifest(dir, "maps_set");
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& s : m.at("scenes")) {
    out.emplace_back(s.at("scene_id").get<std::string>(), dir / s.at("dir").get<std::string>());
  }
  return out;
}

void write_maps_set(const fs::path& out, const std::vector<DenseMaps>& maps,
                    const nlohmann::json& extra) {
  nlohmann::json manifest = extra;
  manifest["kind"] = "maps_set";
  manifest["scenes"] = nlohmann::json::array();
  for (const DenseMaps& m : maps) {
    save_dense_maps(out / m.scene_id, m);
    manifest["scenes"].push_back({{"scene_id", m.scene_id}, {"dir", m.scene_id}});
  }
  write_json(out / "manifest.json", manifest);
}

void emit(const fs::path& path, const std::string& text) {
  write_text(path, text);
  std::cout << text;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string shape = "blob";
  std::size_t scenes = 50;
  std::size_t points = 6000;
  double scale = 0.1;
  std::string occlusion = "1.0";
  double depth_noise = 0.0;
  int min_occluders = 1;
  int max_occluders = 3;
};

void cmd_gen(const Globals& g, const GenArgs& a) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  BenchmarkSpec spec;
  spec.shape = shape_from_name(a.shape);
  spec.object_id = a.shape;
  spec.n_points = a.points;
  spec.scale = a.scale;
  spec.n_scenes = a.scenes;
  spec.occlusion_levels = parse_list(a.occlusion);
  spec.scene.seed = g.seed;
  spec.scene.depth_noise = a.depth_noise;
  spec.scene.min_occluders = a.min_occluders;
  spec.scene.max_occluders = a.max_occluders;
  const Benchmark bench = build_benchmark(spec);

  const std::string ply_name = bench.model.id() + ".ply";
  save_ply(out / ply_name, bench.model.points());
  write_registry_entry(out / "model.json",
                       {bench.model.id(), ply_name, bench.model.symmetric(), false});

  nlohmann::json manifest;
  manifest["kind"] = "scene_set";
  manifest["seed"] = g.seed;
  manifest["shape"] = a.shape;
  manifest["model"] = "model.json";
  manifest["object_id"] = bench.model.id();
  manifest["diameter"] = bench.model.diameter();
  manifest["scenes"] = nlohmann::json::array();
  for (const SceneSample& s : bench.scenes) {
    save_scene(out / "scenes" / s.scene_id, s);
    manifest["scenes"].push_back({{"scene_id", s.scene_id},
                                  {"dir", "scenes/" + s.scene_id},
                                  {"visible_fraction", s.visible_fraction}});
  }
  write_json(out / "manifest.json", manifest);
  std::cout << "wrote " << bench.scenes.size() << " scenes to " << out.string() << "\n";
}

// ---------------------------------------------------------------- anchors

void cmd_anchors(const Globals& g, const std::string& model_path, std::size_t k) {
  const fs::path out = require_out(g);
  const AnchorSet anchors = build_anchor_set(load_model_arg(model_path), k);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  save_anchor_set(out, anchors);
  std::cout << "K=" << anchors.size() << " covering_radius=" << format_number(anchors.covering_radius)
            << "\n";
}

// ---------------------------------------------------------------- encode

struct MapArgs {
  int res = kCorrespondenceRes;
  double zoom = 1.5;
  std::string intrinsics = "crop";
};

IntrinsicsMode intrinsics_mode(const std::string& name) {
  if (name == "crop") return IntrinsicsMode::kCropAdjusted;
  if (name == "org") return IntrinsicsMode::kUnadjusted;
  if (name == "warp") return IntrinsicsMode::kOriginalWarped;
  throw Error(ErrorCode::kInvalidArgument, "unknown intrinsics mode '" + name + "'");
}

void cmd_encode(const Globals& g, const std::string& scenes_dir, const std::string& anchors_path,
                const MapArgs& a) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  const SceneSet set = load_scene_set(scenes_dir);
  const AnchorSet anchors = load_anchor_set(anchors_path);
  PipelineOptions p;
  p.res = a.res;
  p.zoom = a.zoom;
  std::vector<DenseMaps> maps(set.scenes.size());
  parallel_for(set.scenes.size(), g.jobs, [&](std::size_t i) {
    maps[i] = ground_truth_maps(set.scenes[i], anchors, pipeline_roi(set.scenes[i], p),
                                intrinsics_mode(a.intrinsics));
  });
  write_maps_set(out, maps, {{"source", "ground_truth"}, {"intrinsics", a.intrinsics}});
  std::cout << "encoded " << maps.size() << " scenes to " << out.string() << "\n";
}

// ---------------------------------------------------------------- corrupt

void cmd_corrupt(const Globals& g, const std::string& maps_dir, const std::string& anchors_path,
                 const NoiseSpec& noise_flags) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  const AnchorSet anchors = load_anchor_set(anchors_path);
  const auto entries = list_maps(maps_dir);
  std::vector<DenseMaps> maps(entries.size());
  parallel_for(entries.size(), g.jobs, [&](std::size_t i) {
    NoiseSpec noise = noise_flags;
    noise.seed = derive_seed(g.seed, i);
    maps[i] = corrupt(load_dense_maps(entries[i].second), anchors, noise);
  });
  write_maps_set(out, maps,
                 {{"source", "corrupted"},
                  {"noise",
                   {{"residual_sigma", noise_flags.residual_sigma},
                    {"label_flip_prob", noise_flags.label_flip_prob},
                    {"mask_flip_prob", noise_flags.mask_flip_prob},
                    {"depth_sigma", noise_flags.depth_sigma},
                    {"pixel_sigma", noise_flags.pixel_sigma},
                    {"seed", g.seed}}}});
  std::cout << "corrupted " << maps.size() << " scenes into " << out.string() << "\n";
}

// ---------------------------------------------------------------- solve

std::string pose_csv_row(const std::string& id, const SolveReport& r, bool solved) {
  std::string row = id + "," + mode_name(r.mode) + "," + (solved ? "1" : "0");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) row += "," + format_number(r.pose.rotation(i, j));
  }
  for (int i = 0; i < 3; ++i) row += "," + format_number(r.pose.translation[i]);
  row += "," + std::to_string(r.inlier_count) + "," + format_number(r.rmse) + "," +
         std::to_string(r.iterations) + "," + (r.converged ? "1" : "0") + "\n";
  return row;
}

void cmd_solve(const Globals& g, const std::string& maps_dir, const std::string& anchors_path,
               const std::string& mode_text, const std::string& gt_maps_dir) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  const SolveMode mode = mode_from_name(mode_text);
  const AnchorSet anchors = load_anchor_set(anchors_path);
  const auto entries = list_maps(maps_dir);
  std::map<std::string, fs::path> gt_dirs;
  if (!gt_maps_dir.empty()) {
    for (const auto& [id, dir] : list_maps(gt_maps_dir)) gt_dirs[id] = dir;
  }

  struct Outcome {
    std::string scene_id;
    SolveReport report;
    bool solved = false;
    std::string failure;
    std::string loss_row;
  };
  std::vector<Outcome> outcomes(entries.size());
  PipelineOptions p;
  parallel_for(entries.size(), g.jobs, [&](std::size_t i) {
    Outcome& o = outcomes[i];
    o.scene_id = entries[i].first;
    const DenseMaps maps = load_dense_maps(entries[i].second);
    o.report.mode = mode;
    try {
      const CorrSet corr = extract_correspondences(maps, anchors, p.mask_threshold);
      o.report = solve_correspondences(corr, maps.grids.k_crop, mode, p, derive_seed(g.seed, i));
      o.solved = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoForeground && e.code() != ErrorCode::kDegenerateConfiguration &&
          e.code() != ErrorCode::kNoConsensus) {
        throw;
      }
      o.failure = error_code_name(e.code());
    }
    if (!gt_dirs.empty()) {
      const auto it = gt_dirs.find(o.scene_id);
      if (it == gt_dirs.end()) {
        throw Error(ErrorCode::kIdMismatch, "no ground-truth maps for " + o.scene_id);
      }
      const DenseMaps gt = load_dense_maps(it->second);
      const LossComponents l = compute_losses(maps, gt);
      const double total = loss_total(l, pose_loss_term(pose_error(o.report.pose, gt.gt_pose)));
      o.loss_row = o.scene_id + "," + format_number(l.mask) + "," + format_number(l.coarse) + "," +
                   format_number(l.fine) + "," + format_number(total) + "\n";
    }
  });

  nlohmann::json reports = nlohmann::json::array();
  std::string csv =
      "scene_id,mode,solved,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,inliers,rmse,iterations,"
      "converged\n";
  std::string losses = "scene_id,loss_mask,loss_coarse,loss_fine,loss_total\n";
  for (const Outcome& o : outcomes) {
    nlohmann::json j = solve_report_to_json(o.report);
    j["scene_id"] = o.scene_id;
    j["solved"] = o.solved;
    if (!o.solved) j["failure"] = o.failure;
    reports.push_back(j);
    csv += pose_csv_row(o.scene_id, o.report, o.solved);
    losses += o.loss_row;
  }
  write_json(out / "solve.json", reports);
  emit(out / "poses.csv", csv);
  if (!gt_dirs.empty()) write_text(out / "losses.csv", losses);
}

// ---------------------------------------------------------------- eval

void cmd_eval(const Globals& g, const std::string& pred_path, const std::string& scenes_dir) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  const SceneSet set = load_scene_set(scenes_dir);
  const nlohmann::json preds = read_json(pred_path);
  std::map<std::string, Pose> pred_by_id;
  try {
    for (const auto& r : preds) {
      const std::string id = r.at("scene_id").get<std::string>();
      if (!pred_by_id.emplace(id, pose_from_json(r.at("pose"))).second) {
        throw Error(ErrorCode::kIdMismatch, "duplicate prediction for " + id);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, pred_path + ": " + ex.what());
  }
  std::set<std::string> gt_ids;
  for (const SceneSample& s : set.scenes) gt_ids.insert(s.scene_id);
  for (const auto& [id, pose] : pred_by_id) {
    if (!gt_ids.count(id)) throw Error(ErrorCode::kIdMismatch, "prediction for unknown scene " + id);
  }
  std::vector<EvalRecord> records(set.scenes.size());
  parallel_for(set.scenes.size(), g.jobs, [&](std::size_t i) {
    const SceneSample& s = set.scenes[i];
    const auto it = pred_by_id.find(s.scene_id);
    if (it == pred_by_id.end()) throw Error(ErrorCode::kIdMismatch, "no prediction for " + s.scene_id);
    records[i] = make_eval_record(set.model, it->second, s.gt_pose, s.scene_id);
  });
  const Summary summary = evaluate_batch(records);
  write_text(out / "eval.csv", summary_csv(summary));
  write_text(out / "eval.json", summary_json(summary));
  std::string per_scene = "scene_id,object_id,add,add_s,rot_deg,trans_m,add01d,deg10cm10\n";
  for (const EvalRecord& r : records) {
    per_scene += r.scene_id + "," + r.object_id + "," + format_number(r.add) + "," +
                 format_number(r.add_s) + "," + format_number(r.rot_deg) + "," +
                 format_number(r.trans_m) + "," + (add_01d(r) ? "1" : "0") + "," +
                 (deg_cm(r) ? "1" : "0") + "\n";
  }
  write_text(out / "eval_scenes.csv", per_scene);
  std::cout << summary_table(summary);
}

// ---------------------------------------------------------------- ablations

Benchmark load_benchmark(const std::string& scenes_dir) {
  SceneSet set = load_scene_set(scenes_dir);
  return {std::move(set.model), std::move(set.scenes)};
}

struct AnchorSweepArgs {
  std::string ks = "4,8,16,32,64,128";
  double relative_sigma = AnchorAblationConfig{}.relative_sigma;
  double absolute_sigma = -1.0;
  std::string mode = "3d3d";
  bool no_baseline = false;
};

void cmd_ablate_anchors(const Globals& g, const std::string& scenes_dir, const AnchorSweepArgs& a) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  const Benchmark bench = load_benchmark(scenes_dir);
  AnchorAblationConfig c;
  c.ks.clear();
  for (double k : parse_list(a.ks)) {
    if (k < 1 || k != static_cast<double>(static_cast<std::size_t>(k))) {
      throw Error(ErrorCode::kInvalidArgument, "anchor counts must be positive integers");
    }
    c.ks.push_back(static_cast<std::size_t>(k));
  }
  c.include_baseline = !a.no_baseline;
  c.relative_sigma = a.relative_sigma;
  if (a.absolute_sigma >= 0.0) {
    c.absolute = true;
    c.absolute_sigma = a.absolute_sigma;
  }
  c.mode = mode_from_name(a.mode);
  c.pipeline.robust = false;
  c.seed = g.seed;
  emit(out / "ablate_anchors.csv", anchor_ablation_csv(ablate_anchors(bench, c, g.jobs)));
}

void cmd_ablate_corr(const Globals& g, const std::string& scenes_dir, std::size_t k,
                     const NoiseSpec& noise) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  const Benchmark bench = load_benchmark(scenes_dir);
  CorrAblationConfig c;
  c.k = k;
  c.noise = noise;
  c.seed = g.seed;
  emit(out / "ablate_corr.csv", corr_ablation_csv(ablate_corr(bench, c, g.jobs)));
}

void cmd_ablate_k(const Globals& g, const std::string& scenes_dir, std::size_t k,
                  const NoiseSpec& noise) {
  const fs::path out = require_out(g);
  ensure_dir(out);
  const Benchmark bench = load_benchmark(scenes_dir);
  IntrinsicsAblationConfig c;
  c.k = k;
  c.noise = noise;
  c.seed = g.seed;
  emit(out / "ablate_k.csv", intrinsics_ablation_csv(ablate_intrinsics(bench, c, g.jobs)));
}

void add_noise_flags(CLI::App* cmd, NoiseSpec& n) {
  cmd->add_option("--residual-sigma", n.residual_sigma, "residual noise (m)")->capture_default_str();
  cmd->add_option("--label-flip", n.label_flip_prob, "class resample probability")->capture_default_str();
  cmd->add_option("--mask-flip", n.mask_flip_prob, "mask flip probability")->capture_default_str();
  cmd->add_option("--depth-sigma", n.depth_sigma, "depth noise (m)")->capture_default_str();
  cmd->add_option("--pixel-sigma", n.pixel_sigma, "uv noise (crop px)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object pose geometry toolkit: synthetic scenes, residual anchor coding, solvers, metrics"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->required();
  app.add_option("--out", g.out, "output directory (a file path for `anchors`)");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "render a seeded benchmark of scenes");
  c_gen->add_option("--shape", gen.shape, "cube|cylinder|icosphere|blob")->capture_default_str();
  c_gen->add_option("--scenes", gen.scenes, "number of scenes")->capture_default_str();
  c_gen->add_option("--points", gen.points, "minimum model point count")->capture_default_str();
  c_gen->add_option("--scale", gen.scale, "object size (m)")->capture_default_str();
  c_gen->add_option("--occlusion", gen.occlusion, "target visible fractions, comma separated")
      ->capture_default_str();
  c_gen->add_option("--depth-noise", gen.depth_noise, "sensor depth noise (m)")->capture_default_str();
  c_gen->add_option("--min-occluders", gen.min_occluders)->capture_default_str();
  c_gen->add_option("--max-occluders", gen.max_occluders)->capture_default_str();

  std::string model_path;
  std::size_t k = kDefaultAnchorCount;
  auto* c_anchors = app.add_subcommand("anchors", "farthest point sampling anchors for a model");
  c_anchors->add_option("--model", model_path, "PLY file or model registry JSON")->required();
  c_anchors->add_option("--k", k, "anchor count")->capture_default_str();

  std::string scenes_dir, anchors_path, maps_dir, gt_maps_dir, pred_path, mode = "fused";
  MapArgs map_args;
  auto* c_encode = app.add_subcommand("encode", "ground-truth dense maps for every scene");
  c_encode->add_option("--scenes", scenes_dir, "directory written by gen")->required();
  c_encode->add_option("--anchors", anchors_path)->required();
  c_encode->add_option("--res", map_args.res, "output resolution")->capture_default_str();
  c_encode->add_option("--zoom", map_args.zoom, "crop side / longest box side")->capture_default_str();
  c_encode->add_option("--intrinsics", map_args.intrinsics, "crop|org|warp")->capture_default_str();

  NoiseSpec corrupt_noise = default_noise_spec(0);
  auto* c_corrupt = app.add_subcommand("corrupt", "apply seeded noise to dense maps");
  c_corrupt->add_option("--maps", maps_dir, "directory written by encode")->required();
  c_corrupt->add_option("--anchors", anchors_path)->required();
  add_noise_flags(c_corrupt, corrupt_noise);

  auto* c_solve = app.add_subcommand("solve", "recover poses from dense maps");
  c_solve->add_option("--maps", maps_dir)->required();
  c_solve->add_option("--anchors", anchors_path)->required();
  c_solve->add_option("--mode", mode, "3d3d|2d3d|fused")->capture_default_str();
  c_solve->add_option("--gt-maps", gt_maps_dir, "ground-truth maps; also writes losses.csv");

  auto* c_eval = app.add_subcommand("eval", "ADD(-S), AUC and 10deg/10cm summary");
  c_eval->add_option("--pred", pred_path, "solve.json written by solve")->required();
  c_eval->add_option("--scenes", scenes_dir)->required();

  AnchorSweepArgs sweep;
  auto* c_ab_anchors = app.add_subcommand("ablate-anchors", "anchor-count sweep");
  c_ab_anchors->add_option("--scenes", scenes_dir)->required();
  c_ab_anchors->add_option("--ks", sweep.ks, "anchor counts, comma separated")->capture_default_str();
  c_ab_anchors->add_option("--relative-sigma", sweep.relative_sigma,
                           "residual noise as a multiple of the covering radius")
      ->capture_default_str();
  c_ab_anchors->add_option("--absolute-sigma", sweep.absolute_sigma,
                           "fixed residual noise (m) instead of the relative model");
  c_ab_anchors->add_option("--mode", sweep.mode, "solver mode")->capture_default_str();
  c_ab_anchors->add_flag("--no-baseline", sweep.no_baseline, "skip the single-anchor row");

  NoiseSpec corr_noise = CorrAblationConfig{}.noise;
  auto* c_ab_corr = app.add_subcommand("ablate-corr", "2d3d vs 3d3d vs fused");
  c_ab_corr->add_option("--scenes", scenes_dir)->required();
  c_ab_corr->add_option("--k", k, "anchor count")->capture_default_str();
  add_noise_flags(c_ab_corr, corr_noise);

  NoiseSpec k_noise = IntrinsicsAblationConfig{}.noise;
  auto* c_ab_k = app.add_subcommand("ablate-k", "unadjusted K_org vs K_crop");
  c_ab_k->add_option("--scenes", scenes_dir)->required();
  c_ab_k->add_option("--k", k, "anchor count")->capture_default_str();
  add_noise_flags(c_ab_k, k_noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : error_exit_code(ErrorCode::kInvalidArgument);
  }

  try {
    if (c_gen->parsed()) cmd_gen(g, gen);
    if (c_anchors->parsed()) cmd_anchors(g, model_path, k);
    if (c_encode->parsed()) cmd_encode(g, scenes_dir, anchors_path, map_args);
    if (c_corrupt->parsed()) cmd_corrupt(g, maps_dir, anchors_path, corrupt_noise);
    if (c_solve->parsed()) cmd_solve(g, maps_dir, anchors_path, mode, gt_maps_dir);
    if (c_eval->parsed()) cmd_eval(g, pred_path, scenes_dir);
    if (c_ab_anchors->parsed()) cmd_ablate_anchors(g, scenes_dir, sweep);
    if (c_ab_corr->parsed()) cmd_ablate_corr(g, scenes_dir, k, corr_noise);
    if (c_ab_k->parsed()) cmd_ablate_k(g, scenes_dir, k, k_noise);
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return error_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
