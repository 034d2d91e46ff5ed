// Acceptance run: one PASS/FAIL line per criterion. Tolerances are pinned
// here and nowhere else.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "anchorpose/error.hpp"
#include "anchorpose/experiments.hpp"
#include "anchorpose/io.hpp"

using namespace anchorpose;
namespace fs = std::filesystem;

namespace {

const int kJobs = std::max(1u, std::thread::hardware_concurrency());

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

Pose random_pose(std::mt19937_64& rng) {
  Pose p;
  p.rotation = sample_rotation(rng);
  const double z = uniform(rng, 0.4, 2.0);
  p.translation = Vec3(uniform(rng, -0.2, 0.2) * z, uniform(rng, -0.15, 0.15) * z, z);
  return p;
}

const Intrinsics kCam = SceneConfig{}.intrinsics;

CorrSet exact_corr(std::mt19937_64& rng, const Pose& pose, std::size_t n) {
  CorrSet c;
  std::vector<Vec3> cam;
  std::vector<Vec2> img;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 o(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05));
    c.obj_pts.push_back(o);
    cam.push_back(pose.apply(o));
    img.push_back(project(o, pose, kCam));
  }
  c.cam_pts = cam;
  c.img_pts = img;
  c.weights.assign(n, 1.0);
  return c;
}

BenchmarkSpec bench_spec(std::size_t n_scenes, std::uint64_t seed) {
  BenchmarkSpec spec;
  spec.n_scenes = n_scenes;
  spec.scene.seed = seed;
  spec.scene.min_occluders = 0;
  spec.scene.max_occluders = 0;
  return spec;
}

// 1 ------------------------------------------------------------------------

Verdict codec_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t total = 0, mismatches = 0, over = 0;
  for (Shape s : {Shape::kCube, Shape::kCylinder, Shape::kIcosphere, Shape::kBlob}) {
    const ObjectModel m = make_model(s, 25000, 0.1, 1);
    const AnchorSet a = build_anchor_set(m, kDefaultAnchorCount);
    for (const Vec3& p : m.points()) {
      const ResidualCode c = encode(p, a);
      const Vec3 back = decode(c, a);
      mismatches += !(back.x() == p.x() && back.y() == p.y() && back.z() == p.z());
      over += c.residual.norm() > a.covering_radius;
      ++total;
    }
  }
  const double secs = seconds_since(t0);
  return {total >= 100000 && mismatches == 0 && over == 0 && secs < 5.0,
          fmt("%zu points, %zu round-trip mismatches, %zu residuals over the covering radius, "
              "%.2f s (limit 5 s)",
              total, mismatches, over, secs)};
}

// 2 ------------------------------------------------------------------------

double brute_covering(const std::vector<Vec3>& pts, const std::vector<Vec3>& anchors) {
  double worst = 0.0;
  for (const Vec3& p : pts) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& a : anchors) best = std::min(best, (p - a).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

Verdict covering_monotone() {
  const std::size_t ks[] = {1, 4, 8, 16, 32, 64, 128};
  bool monotone = true;
  double ico_ratio = 0.0;
  std::string trail;
  for (Shape s : {Shape::kCube, Shape::kCylinder, Shape::kIcosphere, Shape::kBlob}) {
    const ObjectModel m = make_model(s, 6000, 0.1, 1);
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t k : ks) {
      const AnchorSet a = build_anchor_set(m, k);
      monotone = monotone && a.covering_radius <= last;
      last = a.covering_radius;
      if (s == Shape::kIcosphere && k == 32) {
        double diam = 0.0;
        for (const Vec3& p : m.points())
          for (const Vec3& q : m.points()) diam = std::max(diam, (p - q).norm());
        const double oracle = brute_covering(m.points(), a.anchors);
        monotone = monotone && oracle == a.covering_radius;
        ico_ratio = oracle / diam;
      }
    }
    trail += fmt(" %s c(128)=%.4f", shape_name(s).c_str(), last);
  }
  return {monotone && ico_ratio <= 0.35,
          fmt("non-increasing over K=1..128 on all shapes: %s; icosphere c(32)/diameter = %.4f "
              "(limit 0.35);%s",
              monotone ? "yes" : "no", ico_ratio, trail.c_str())};
}

// 3 ------------------------------------------------------------------------

Verdict intrinsics_ablation() {
  const auto t0 = std::chrono::steady_clock::now();
  const Benchmark b = build_benchmark(bench_spec(200, 301));
  double worst = 0.0;
  bool non_identity = true;
  PipelineOptions p;
  for (const SceneSample& s : b.scenes) {
    const Roi roi = pipeline_roi(s, p);
    const GridMaps warp = make_grid_maps(s.depth, roi, s.intrinsics, IntrinsicsMode::kOriginalWarped);
    const GridMaps crop = make_grid_maps(s.depth, roi, s.intrinsics, IntrinsicsMode::kCropAdjusted);
    non_identity = non_identity && std::abs(crop.affine.scale_u - 1.0) > 1e-6;
    for (std::size_t i = 0; i < warp.cam_xyz.size(); ++i) {
      worst = std::max(worst, (warp.cam_xyz.data[i] - crop.cam_xyz.data[i]).cwiseAbs().maxCoeff());
    }
  }
  IntrinsicsAblationConfig c;
  c.noise.pixel_sigma = 0.5;
  c.seed = 302;
  const auto rows = ablate_intrinsics(b, c, kJobs);
  const double org = rows[0].stats.add01d_pct;
  const double crop = rows[1].stats.add01d_pct;
  const double secs = seconds_since(t0);
  return {non_identity && crop > org && worst < 1e-9 && secs < 60.0,
          fmt("ADD(-S) 0.1d K_org %.1f%% < K_crop %.1f%%; dual-path max |diff| %.2e m (limit 1e-9); "
              "%.1f s (limit 60 s)",
              org, crop, worst, secs)};
}

// 4 ------------------------------------------------------------------------

Verdict solver_exactness() {
  std::mt19937_64 rng(401);
  double worst_rot[3] = {0, 0, 0}, worst_t[3] = {0, 0, 0};
  for (int i = 0; i < 1000; ++i) {
    const Pose gt = random_pose(rng);
    CorrSet c = exact_corr(rng, gt, 50);
    Pose init = gt;
    init.rotation = axis_angle(random_unit(rng), 5.0 * std::numbers::pi / 180.0) * gt.rotation;
    init.translation += 0.05 * random_unit(rng);
    const PoseError e[3] = {pose_error(solve_3d3d(c).pose, gt),
                            pose_error(solve_2d3d(c, kCam, init).pose, gt),
                            pose_error(solve_fused(c, kCam).pose, gt)};
    for (int m = 0; m < 3; ++m) {
      worst_rot[m] = std::max(worst_rot[m], e[m].rot_deg);
      worst_t[m] = std::max(worst_t[m], e[m].trans_m);
    }
  }
  bool exact = true;
  for (int m = 0; m < 3; ++m) exact = exact && worst_rot[m] < 1e-6 && worst_t[m] < 1e-8;

  int ok = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    std::mt19937_64 r(4000 + trial);
    const Pose gt = random_pose(r);
    CorrSet c = exact_corr(r, gt, 200);
    // Gross outliers: camera points of random locations in the object's box.
    for (std::size_t i = 0; i < 60; ++i) {
      const Vec3 o(uniform(r, -0.05, 0.05), uniform(r, -0.05, 0.05), uniform(r, -0.05, 0.05));
      (*c.cam_pts)[i] = gt.apply(o);
    }
    const PoseError e = pose_error(ransac(c, SolveMode::k3d3d, {0.005, 256, trial}).pose, gt);
    ok += e.rot_deg < 0.5 && e.trans_m < 0.005;
  }
  return {exact && ok >= 99,
          fmt("worst over 1000 poses: 3d3d %.1e deg / %.1e m, 2d3d %.1e deg / %.1e m, fused %.1e "
              "deg / %.1e m (limits 1e-6 deg, 1e-8 m); RANSAC 30%% outliers %d/100 within 0.5 deg "
              "/ 5 mm (need 99)",
              worst_rot[0], worst_t[0], worst_rot[1], worst_t[1], worst_rot[2], worst_t[2], ok)};
}

// 5 ------------------------------------------------------------------------

Verdict corr_ablation() {
  const Benchmark b = build_benchmark(bench_spec(200, 501));
  CorrAblationConfig mixed;
  mixed.noise = {0.002, 0.0, 0.0, 0.005, 0.0, 0};
  mixed.seed = 502;
  const auto rows = ablate_corr(b, mixed, kJobs);
  const double two = rows[0].stats.mean_rot_deg;
  const double three = rows[1].stats.mean_rot_deg;
  const double fused = rows[2].stats.mean_rot_deg;
  const bool fused_ok = fused <= 1.05 * std::min(two, three);

  CorrAblationConfig sharp;
  sharp.noise = {0.002, 0.0, 0.0, 0.002, 1.0, 0};
  sharp.seed = 503;
  const auto rows2 = ablate_corr(b, sharp, kJobs);
  const bool order_ok = rows2[1].stats.mean_rot_deg < rows2[0].stats.mean_rot_deg;
  return {fused_ok && order_ok,
          fmt("mixed noise (residual 2 mm, depth 5 mm) mean rotation error: 2d3d %.3f, 3d3d %.3f, "
              "fused %.3f deg (fused limit %.3f); depth 2 mm + 1 px: 3d3d %.3f < 2d3d %.3f deg",
              two, three, fused, 1.05 * std::min(two, three), rows2[1].stats.mean_rot_deg,
              rows2[0].stats.mean_rot_deg)};
}

// 6 ------------------------------------------------------------------------

Verdict anchor_ablation() {
  bool all = true;
  std::string trail;
  for (std::uint64_t master = 1; master <= 10; ++master) {
    const Benchmark b = build_benchmark(bench_spec(20, 600 + master));
    AnchorAblationConfig c;
    c.ks = {32};
    c.seed = master;
    c.pipeline.robust = false;
    const auto rows = ablate_anchors(b, c, kJobs);
    const double k1 = rows[0].stats.add01d_pct;
    const double k32 = rows[1].stats.add01d_pct;
    all = all && k32 >= k1;
    trail += fmt(" %.0f/%.0f", k1, k32);
  }
  return {all, fmt("ADD(-S) 0.1d K=1/K=32 per master seed (sigma = 2 x covering radius):%s",
                   trail.c_str())};
}

// 7 ------------------------------------------------------------------------

double nearest_scan(const Vec3& q, const std::vector<Vec3>& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& c : cloud) best = std::min(best, (q - c).squaredNorm());
  return std::sqrt(best);
}

Verdict metrics_checks() {
  const ObjectModel m = make_model(Shape::kBlob, 600, 0.1, 7);
  std::mt19937_64 rng(701);
  std::size_t adds_over = 0;
  for (int i = 0; i < 10000; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    adds_over += adds_metric(m, a, b) > add_metric(m, a, b);
  }
  std::size_t translation_inexact = 0;
  for (int i = 0; i < 1000; ++i) {
    const Pose gt = random_pose(rng);
    Pose pred = gt;
    pred.translation += Vec3(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1));
    translation_inexact += add_metric(m, pred, gt) != (pred.translation - gt.translation).norm();
  }
  const double auc0 = add_auc({0.0, 0.0, 0.0, 0.0});
  const double auc5 = add_auc({0.05}, 0.10);
  const bool auc_ok = std::abs(auc0 - 1.0) <= 1e-12 && std::abs(auc5 - 0.5) <= 1e-12;

  double worst_tree = 0.0;
  const ObjectModel big = make_model(Shape::kBlob, 4000, 0.1, 8);
  for (int i = 0; i < 100; ++i) {
    const Pose gt = random_pose(rng);
    Pose pred = gt;
    pred.rotation = axis_angle(random_unit(rng), uniform(rng, 0.0, 0.5)) * gt.rotation;
    pred.translation += Vec3(uniform(rng, -0.03, 0.03), uniform(rng, -0.03, 0.03), 0.0);
    const double tree = adds_metric(big, pred, gt, NearestSearch::kTree);
    std::vector<Vec3> targets;
    for (const Vec3& p : big.points()) targets.push_back(gt.apply(p));
    double sum = 0.0;
    for (const Vec3& p : big.points()) sum += nearest_scan(pred.apply(p), targets);
    worst_tree = std::max(worst_tree, std::abs(tree - sum / big.size()));
  }
  return {adds_over == 0 && translation_inexact == 0 && auc_ok && worst_tree <= 1e-12,
          fmt("ADD-S > ADD in %zu of 10000 pose pairs; pure translation ADD inexact in %zu of 1000; "
              "AUC(all 0) = %.15g, AUC(0.05 | 0.10) = %.15g; tree vs full scan max |diff| %.1e "
              "(limit 1e-12)",
              adds_over, translation_inexact, auc0, auc5, worst_tree)};
}

// 8 ------------------------------------------------------------------------

Verdict loss_sanity() {
  const Benchmark b = build_benchmark(bench_spec(20, 801));
  const AnchorSet a = build_anchor_set(b.model, kDefaultAnchorCount);
  double worst_mask = 0.0, worst_coarse = 0.0, worst_fine = 0.0, worst_uniform = 0.0;
  for (const SceneSample& s : b.scenes) {
    PipelineOptions p;
    const DenseMaps gt = ground_truth_maps(s, a, pipeline_roi(s, p));
    const LossComponents l = compute_losses(gt, gt);
    worst_mask = std::max(worst_mask, l.mask);
    worst_coarse = std::max(worst_coarse, l.coarse);
    worst_fine = std::max(worst_fine, l.fine);
    const std::vector<double> uniform_probs(gt.region_probs.size(), 1.0 / 33.0);
    const Grid<double> ones(gt.res, gt.res, 1.0);
    const double u = loss_coarse(uniform_probs, gt.num_classes(), gt.argmax_classes(), ones);
    worst_uniform = std::max(worst_uniform, std::abs(u - std::log(33.0)));
  }
  const double total = loss_total({worst_mask, worst_coarse, worst_fine}, 0.0);
  return {worst_mask == 0.0 && worst_coarse <= 1e-11 && worst_fine == 0.0 && total <= 1e-11 &&
              worst_uniform <= 1e-9,
          fmt("at ground truth over 20 scenes: mask %.1e, coarse %.1e (limit 1e-11), fine %.1e; "
              "uniform K=32 coarse loss |L - ln 33| = %.1e (limit 1e-9)",
              worst_mask, worst_coarse, worst_fine, worst_uniform)};
}

// 9 ------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("'") + ANCHORPOSE_CLI + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

// Every file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() != ".log") {
      out[fs::relative(e.path(), dir).string()] = read_text(e.path());
    }
  }
  return out;
}

Verdict cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "anchorpose_acceptance_cli";
  fs::remove_all(root);
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  std::vector<std::string> failed;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    const std::string g = "--seed 9 --jobs 2 ";
    const std::string anchors = q(d / "anchors.json");
    const std::vector<std::pair<std::string, std::string>> steps = {
        {"gen", "--out " + q(d / "scenes") + " gen --scenes 4 --points 4000 --occlusion 1.0,0.6"},
        {"anchors", "--out " + anchors + " anchors --model " + q(d / "scenes" / "model.json")},
        {"encode", "--out " + q(d / "gt") + " encode --scenes " + q(d / "scenes") +
                       " --anchors " + anchors},
        {"corrupt", "--out " + q(d / "noisy") + " corrupt --maps " + q(d / "gt") + " --anchors " +
                        anchors + " --depth-sigma 0.003"},
        {"solve", "--out " + q(d / "solve") + " solve --maps " + q(d / "noisy") + " --anchors " +
                      anchors + " --mode fused --gt-maps " + q(d / "gt")},
        {"eval", "--out " + q(d / "eval") + " eval --pred " + q(d / "solve" / "solve.json") +
                     " --scenes " + q(d / "scenes")},
        {"ablate-anchors", "--out " + q(d / "ablate") + " ablate-anchors --scenes " +
                               q(d / "scenes") + " --ks 4,8,32"},
        {"ablate-corr", "--out " + q(d / "ablate") + " ablate-corr --scenes " + q(d / "scenes")},
        {"ablate-k", "--out " + q(d / "ablate") + " ablate-k --scenes " + q(d / "scenes")},
    };
    for (const auto& [name, args] : steps) {
      if (run_cli(g + args, d / (name + ".log")) != 0) failed.push_back(name);
    }
  }
  if (!failed.empty()) return {false, "subcommand failed: " + failed.front()};
  const auto a = snapshot(root / "a");
  const auto b = snapshot(root / "b");
  std::size_t csv = 0, differing = 0;
  for (const auto& [rel, bytes] : a) {
    csv += fs::path(rel).extension() == ".csv";
    const auto it = b.find(rel);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  return {differing == 0 && a.size() == b.size() && csv >= 7,
          fmt("9 subcommands run twice with seed 9: %zu files (%zu CSV), %zu differ", a.size(), csv,
              differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"1 codec exactness", codec_exactness},
      {"2 covering radius monotone in K", covering_monotone},
      {"3 K_crop beats unadjusted K_org", intrinsics_ablation},
      {"4 solver exactness and RANSAC", solver_exactness},
      {"5 correspondence ablation ordering", corr_ablation},
      {"6 residual vs direct coordinates", anchor_ablation},
      {"7 metrics correctness", metrics_checks},
      {"8 loss sanity", loss_sanity},
      {"9 CLI determinism", cli_determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s  %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
