#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>

#include "../support.hpp"
#include "anchorpose/correspondence.hpp"
#include "anchorpose/error.hpp"

using namespace anchorpose;
using namespace testsupport;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an anchorpose::Error");
  return ErrorCode::kInvalidArgument;
}

struct Fixture {
  ObjectModel model = make_model(Shape::kBlob, 6000, 0.1, 2, "blob");
  AnchorSet anchors = build_anchor_set(model, 32);
  SceneSample scene;
  Roi roi;

  explicit Fixture(std::uint64_t seed = 40) {
    SceneConfig cfg;
    cfg.min_occluders = cfg.max_occluders = 0;
    cfg.max_depth = 1.0;
    std::mt19937_64 rng(seed);
    scene = render(model, sample_pose(model, cfg, rng), cfg);
    scene.scene_id = "s";
    roi = square_roi(scene.bbox, 1.5, 64);
  }
};

Grid<double> filled(int n, double v) { return Grid<double>(n, n, v); }

}  // namespace

TEST_CASE("ground truth maps") {
  const Fixture f;
  const DenseMaps gt = ground_truth_maps(f.scene, f.anchors, f.roi);
  CHECK(gt.num_classes() == 33);
  std::size_t on = 0;
  const CropAffine a = crop_affine(f.roi);
  for (int r = 0; r < gt.res; ++r) {
    for (int c = 0; c < gt.res; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * gt.res + c;
      const double* p = gt.probs(cell);
      CHECK(std::accumulate(p, p + gt.num_classes(), 0.0) == 1.0);
      const double m = gt.mask.at(r, c);
      CHECK((m == 0.0 || m == 1.0));
      const std::size_t cls = gt.argmax_class(cell);
      if (m == 0.0) {
        CHECK(cls == 32);
        CHECK(gt.residual.at(r, c) == Vec3::Zero());
        continue;
      }
      ++on;
      CHECK(gt.anchor_xyz.at(r, c) == f.anchors.anchors[cls]);
      CHECK(gt.residual.at(r, c).norm() <= f.anchors.covering_radius + 1e-12);
      // Decoded point reprojects onto the render pixel the cell samples.
      const Vec3 obj = decode({cls, gt.residual.at(r, c)}, f.anchors);
      const Vec2 px = project(obj, f.scene.gt_pose, f.scene.intrinsics);
      int pr = 0, pc = 0;
      REQUIRE(nearest_pixel(a.apply_inverse(Vec2(c, r)), f.scene.depth.width,
                            f.scene.depth.height, pr, pc));
      CHECK((px - Vec2(pc, pr)).norm() <= 0.75);
      // The camera point of the cell is the depth-consistent posed model point.
      const Vec3 posed = f.scene.gt_pose.apply(obj);
      CHECK(std::abs(gt.grids.cam_xyz.at(r, c).z() - posed.z()) < 1e-6);
    }
  }
  CHECK(on > 100);

  AnchorSet other = f.anchors;
  other.object_id = "else";
  CHECK(code_of([&] { ground_truth_maps(f.scene, other, f.roi); }) == ErrorCode::kObjectMismatch);
}

TEST_CASE("fully occluded object gives an empty mask") {
  const Fixture f;
  SceneSample s = f.scene;
  for (auto& v : s.vis_mask.data) v = 0;
  const DenseMaps gt = ground_truth_maps(s, f.anchors, f.roi);
  for (double m : gt.mask.data) CHECK(m == 0.0);
}

TEST_CASE("corrupt with zero noise is the identity") {
  const Fixture f;
  const DenseMaps gt = ground_truth_maps(f.scene, f.anchors, f.roi);
  NoiseSpec zero;
  zero.seed = 9;
  const DenseMaps out = corrupt(gt, f.anchors, zero);
  CHECK(out.mask.data == gt.mask.data);
  CHECK(out.region_probs == gt.region_probs);
  CHECK(out.residual.data == gt.residual.data);
  CHECK(out.anchor_xyz.data == gt.anchor_xyz.data);
  CHECK(out.grids.cam_xyz.data == gt.grids.cam_xyz.data);
  CHECK(out.grids.uv.data == gt.grids.uv.data);
  const DenseMaps twice = corrupt(out, f.anchors, zero);
  CHECK(twice.residual.data == gt.residual.data);

  NoiseSpec bad;
  bad.label_flip_prob = 1.5;
  CHECK(code_of([&] { corrupt(gt, f.anchors, bad); }) == ErrorCode::kInvalidArgument);
  bad = NoiseSpec{};
  bad.depth_sigma = -1.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("corrupt is deterministic in the seed") {
  const Fixture f;
  const DenseMaps gt = ground_truth_maps(f.scene, f.anchors, f.roi);
  NoiseSpec n = default_noise_spec(4);
  n.depth_sigma = 0.003;
  n.pixel_sigma = 0.5;
  const DenseMaps a = corrupt(gt, f.anchors, n);
  const DenseMaps b = corrupt(gt, f.anchors, n);
  CHECK(a.residual.data == b.residual.data);
  CHECK(a.mask.data == b.mask.data);
  CHECK(a.region_probs == b.region_probs);
  CHECK(a.grids.cam_xyz.data == b.grids.cam_xyz.data);
  n.seed = 5;
  const DenseMaps c = corrupt(gt, f.anchors, n);
  CHECK(c.residual.data != a.residual.data);
}

TEST_CASE("residual noise statistics") {
  // A synthetic all-foreground map is enough: corrupt only reads the mask.
  const int n = 128;
  AnchorSet anchors{"x", {Vec3(0, 0, 0)}, 1.0};
  DenseMaps m;
  m.res = n;
  m.num_anchors = 1;
  m.mask = filled(n, 1.0);
  m.residual = Grid<Vec3>(n, n, Vec3::Zero());
  m.anchor_xyz = Grid<Vec3>(n, n, Vec3::Zero());
  m.region_probs.assign(m.cells() * 2, 0.0);
  for (std::size_t i = 0; i < m.cells(); ++i) m.region_probs[2 * i] = 1.0;
  m.grids.res = n;
  m.grids.uv = Grid<Vec2>(n, n, Vec2::Zero());
  m.grids.cam_xyz = Grid<Vec3>(n, n, Vec3::Zero());
  m.grids.valid = Grid<std::uint8_t>(n, n, 0);

  NoiseSpec noise;
  noise.residual_sigma = 0.005;
  noise.seed = 77;
  const DenseMaps out = corrupt(m, anchors, noise);
  double sum = 0.0;
  for (const auto& r : out.residual.data) sum += r.cwiseAbs().sum();
  const double mean_abs = sum / (3.0 * out.residual.size());
  const double expect = 0.005 * std::sqrt(2.0 / std::numbers::pi);
  CHECK(std::abs(mean_abs - expect) < 0.05 * expect);

  // Label flips resample over K + 1 classes; with K = 32 about 1/33 survive.
  AnchorSet many{"x", {}, 1.0};
  for (int k = 0; k < 32; ++k) many.anchors.emplace_back(k, 0, 0);
  DenseMaps lm = m;
  lm.num_anchors = 32;
  lm.region_probs.assign(lm.cells() * 33, 0.0);
  std::vector<std::size_t> orig(lm.cells());
  for (std::size_t i = 0; i < lm.cells(); ++i) {
    orig[i] = i % 32;
    lm.probs(i)[orig[i]] = 1.0;
  }
  NoiseSpec flip;
  flip.label_flip_prob = 1.0;
  flip.seed = 78;
  const DenseMaps fl = corrupt(lm, many, flip);
  std::size_t same = 0;
  for (std::size_t i = 0; i < fl.cells(); ++i) same += fl.argmax_class(i) == orig[i];
  const double frac = double(same) / fl.cells();
  CHECK(std::abs(frac - 1.0 / 33.0) < 0.01);
}

TEST_CASE("mask loss") {
  CHECK(loss_mask(filled(8, 0.3), filled(8, 0.3)) == 0.0);
  CHECK(loss_mask(filled(8, 1.0), filled(8, 0.0)) == 1.0);
  Grid<double> half = filled(8, 0.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c) half.at(r, c) = 1.0;
  CHECK(loss_mask(half, filled(8, 0.0)) == 0.5);
  CHECK(code_of([] { loss_mask(filled(8, 0.0), filled(4, 0.0)); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("coarse loss") {
  const int n = 4;
  const std::size_t classes = 33;
  std::vector<std::size_t> gt(n * n);
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = (i * 7) % classes;

  std::vector<double> onehot(gt.size() * classes, 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) onehot[i * classes + gt[i]] = 1.0;
  CHECK(loss_coarse(onehot, classes, gt, filled(n, 1.0)) <= 1e-11);

  const std::vector<double> uniform_probs(gt.size() * classes, 1.0 / 33.0);
  CHECK(std::abs(loss_coarse(uniform_probs, classes, gt, filled(n, 1.0)) - std::log(33.0)) < 1e-9);
  CHECK(std::abs(std::log(33.0) - 3.4965) < 1e-4);

  std::vector<double> half(gt.size() * classes, 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    half[i * classes + gt[i]] = 0.5;
    half[i * classes + (gt[i] + 1) % classes] = 0.5;
  }
  CHECK(std::abs(loss_coarse(half, classes, gt, filled(n, 1.0)) - std::log(2.0)) < 1e-12);

  // The mask scales the probability without renormalizing.
  CHECK(std::abs(loss_coarse(onehot, classes, gt, filled(n, 0.5)) - std::log(2.0)) < 1e-12);
  // A wrong hard prediction hits the clamp.
  std::vector<double> wrong(gt.size() * classes, 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) wrong[i * classes + (gt[i] + 1) % classes] = 1.0;
  CHECK(std::abs(loss_coarse(wrong, classes, gt, filled(n, 1.0)) + std::log(1e-12)) < 1e-9);
  CHECK(loss_coarse(wrong, classes, gt, filled(n, 0.0)) == 0.0);

  CHECK(code_of([&] { loss_coarse(onehot, 32, gt, filled(n, 1.0)); }) ==
        ErrorCode::kShapeMismatch);
  CHECK(code_of([&] { loss_coarse(onehot, classes, gt, filled(n + 1, 1.0)); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("fine loss") {
  std::mt19937_64 rng(41);
  Grid<Vec3> gt(8, 8, Vec3::Zero());
  for (auto& v : gt.data) v = random_vec(rng, -0.01, 0.01);
  Grid<double> mask = filled(8, 0.0);
  for (int c = 0; c < 8; ++c) mask.at(2, c) = 1.0;
  CHECK(loss_fine(gt, gt, mask) == 0.0);
  Grid<Vec3> shifted = gt;
  for (auto& v : shifted.data) v += Vec3(0.01, 0, 0);
  CHECK(std::abs(loss_fine(shifted, gt, mask) - 0.01) < 1e-15);
  CHECK(loss_fine(shifted, gt, filled(8, 0.0)) == 0.0);
  CHECK(code_of([&] { loss_fine(gt, gt, filled(4, 1.0)); }) == ErrorCode::kShapeMismatch);

  // Shifting by c raises the loss by at most |c|_1.
  for (int t = 0; t < 100; ++t) {
    Grid<Vec3> pred = gt;
    for (auto& v : pred.data) v += random_vec(rng, -0.005, 0.005);
    const Vec3 c = random_vec(rng, -0.01, 0.01);
    Grid<Vec3> moved = pred;
    for (auto& v : moved.data) v += c;
    CHECK(loss_fine(moved, gt, mask) <= loss_fine(pred, gt, mask) + c.lpNorm<1>() + 1e-15);
  }
}

TEST_CASE("total loss") {
  CHECK(loss_total({}, 0.0) == 0.0);
  CHECK(loss_total({1.0, 2.0, 3.0}, 4.0) == 10.0);
  CHECK(code_of([] { loss_total({std::nan(""), 0, 0}, 0.0); }) == ErrorCode::kNonFinite);
  CHECK(code_of([] { loss_total({}, INFINITY); }) == ErrorCode::kNonFinite);
}

TEST_CASE("losses vanish at ground truth and grow under noise") {
  const Fixture f;
  const DenseMaps gt = ground_truth_maps(f.scene, f.anchors, f.roi);
  const LossComponents zero = compute_losses(gt, gt);
  CHECK(zero.mask == 0.0);
  CHECK(zero.coarse <= 1e-11);
  CHECK(zero.fine == 0.0);
  const LossComponents noisy = compute_losses(corrupt(gt, f.anchors, default_noise_spec(3)), gt);
  CHECK(noisy.mask > 0.0);
  CHECK(noisy.coarse > 0.0);
  CHECK(noisy.fine > 0.0);
}

TEST_CASE("dense maps directory round trip") {
  const Fixture f;
  const DenseMaps gt = ground_truth_maps(f.scene, f.anchors, f.roi);
  const auto dir = std::filesystem::temp_directory_path() / "anchorpose_test_maps";
  std::filesystem::remove_all(dir);
  save_dense_maps(dir, gt);
  const DenseMaps back = load_dense_maps(dir);
  CHECK(back.res == gt.res);
  CHECK(back.num_anchors == gt.num_anchors);
  CHECK(back.scene_id == "s");
  CHECK(back.object_id == "blob");
  CHECK(back.mask.data == gt.mask.data);
  CHECK(back.region_probs == gt.region_probs);
  CHECK(back.grids.valid.data == gt.grids.valid.data);
  for (std::size_t i = 0; i < gt.residual.size(); ++i) {
    CHECK((back.residual.data[i] - gt.residual.data[i]).norm() < 1e-7);
    CHECK((back.grids.uv.data[i] - gt.grids.uv.data[i]).norm() < 1e-3);
  }
  CHECK(back.grids.k_crop.fx == gt.grids.k_crop.fx);
  CHECK(max_abs(back.gt_pose.rotation - gt.gt_pose.rotation) == 0.0);
}
