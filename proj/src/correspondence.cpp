#include "anchorpose/correspondence.hpp"

#include <cmath>
#include <random>

#include "anchorpose/error.hpp"
#include "anchorpose/io.hpp"

namespace anchorpose {

std::size_t DenseMaps::argmax_class(std::size_t cell) const {
  const double* p = probs(cell);
  std::size_t best = 0;
  for (std::size_t k = 1; k < num_classes(); ++k) {
    if (p[k] > p[best]) best = k;
  }
  return best;
}

std::vector<std::size_t> DenseMaps::argmax_classes() const {
  std::vector<std::size_t> out(cells());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_class(i);
  return out;
}

void NoiseSpec::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(label_flip_prob) || !prob_ok(mask_flip_prob)) {
    throw Error(ErrorCode::kInvalidArgument, "noise probabilities must lie in [0, 1]");
  }
  if (!(residual_sigma >= 0.0) || !(depth_sigma >= 0.0) || !(pixel_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigmas must be >= 0");
  }
}

NoiseSpec default_noise_spec(std::uint64_t seed) {
  NoiseSpec n;
  n.residual_sigma = 0.005;
  n.label_flip_prob = 0.02;
  n.mask_flip_prob = 0.02;
  n.seed = seed;
  return n;
}

DenseMaps ground_truth_maps(const SceneSample& scene, const AnchorSet& anchors, const Roi& roi,
                            IntrinsicsMode mode) {
  if (scene.object_id != anchors.object_id) {
    throw Error(ErrorCode::kObjectMismatch, "scene object '" + scene.object_id +
                                                "' but anchors for '" + anchors.object_id + "'");
  }
  DenseMaps m;
  m.res = roi.out_res;
  m.num_anchors = anchors.size();
  m.grids = make_grid_maps(scene.depth, roi, scene.intrinsics, mode);
  m.mask = Grid<double>(m.res, m.res, 0.0);
  m.anchor_xyz = Grid<Vec3>(m.res, m.res, Vec3::Zero());
  m.residual = Grid<Vec3>(m.res, m.res, Vec3::Zero());
  m.region_probs.assign(m.cells() * m.num_classes(), 0.0);
  m.scene_id = scene.scene_id;
  m.object_id = scene.object_id;
  m.gt_pose = scene.gt_pose;

  const CropAffine a = crop_affine(roi);
  for (int r = 0; r < m.res; ++r) {
    for (int c = 0; c < m.res; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * m.res + c;
      std::size_t cls = anchors.background_index();
      int pr = 0, pc = 0;
      const Vec2 uv = a.apply_inverse(Vec2(c, r));
      if (m.grids.valid.at(r, c) &&
          nearest_pixel(uv, scene.depth.width, scene.depth.height, pr, pc) &&
          scene.vis_mask.at(pr, pc)) {
        const ResidualCode code = encode(scene.obj_xyz.at(pr, pc), anchors);
        cls = code.anchor_index;
        m.mask.at(r, c) = 1.0;
        m.anchor_xyz.at(r, c) = anchors.anchors[cls];
        m.residual.at(r, c) = code.residual;
      }
      m.probs(cell)[cls] = 1.0;
    }
  }
  return m;
}

DenseMaps corrupt(const DenseMaps& maps, const AnchorSet& anchors, const NoiseSpec& noise) {
  noise.validate();
  if (maps.num_anchors != anchors.size()) {
    throw Error(ErrorCode::kShapeMismatch, "maps were built for a different anchor count");
  }
  DenseMaps out = maps;
  std::mt19937_64 rng(noise.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_class(0, maps.num_anchors);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t background = anchors.background_index();

  for (int r = 0; r < out.res; ++r) {
    for (int c = 0; c < out.res; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * out.res + c;
      const bool masked = maps.mask.at(r, c) > 0.5;
      if (masked && noise.residual_sigma > 0.0) {
        Vec3& res = out.residual.at(r, c);
        for (int d = 0; d < 3; ++d) res[d] += noise.residual_sigma * gauss(rng);
      }
      if (masked && noise.label_flip_prob > 0.0 && unit(rng) < noise.label_flip_prob) {
        const std::size_t cls = any_class(rng);
        double* p = out.probs(cell);
        std::fill(p, p + out.num_classes(), 0.0);
        p[cls] = 1.0;
      }
      const std::size_t cls = out.argmax_class(cell);
      out.anchor_xyz.at(r, c) = cls == background ? Vec3::Zero() : anchors.anchors[cls];

      if (noise.mask_flip_prob > 0.0 && unit(rng) < noise.mask_flip_prob) {
        out.mask.at(r, c) = 1.0 - out.mask.at(r, c);
      }
      if (!out.grids.valid.at(r, c)) continue;
      if (noise.depth_sigma > 0.0) {
        Vec3& xyz = out.grids.cam_xyz.at(r, c);
        const double z = std::max(1e-6, xyz.z() + noise.depth_sigma * gauss(rng));
        xyz *= z / xyz.z();
      }
      if (noise.pixel_sigma > 0.0) {
        Vec2& uv = out.grids.uv.at(r, c);
        uv.x() += noise.pixel_sigma * gauss(rng) / out.grids.affine.scale_u;
        uv.y() += noise.pixel_sigma * gauss(rng) / out.grids.affine.scale_v;
      }
    }
  }
  return out;
}

double loss_mask(const Grid<double>& pred, const Grid<double>& gt) {
  if (!pred.same_shape(gt)) throw Error(ErrorCode::kShapeMismatch, "mask shapes differ");
  if (pred.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred.data[i] - gt.data[i]);
  return sum / static_cast<double>(pred.size());
}

double loss_coarse(const std::vector<double>& pred_probs, std::size_t num_classes,
                   const std::vector<std::size_t>& gt_classes, const Grid<double>& pred_mask) {
  if (num_classes == 0 || pred_probs.size() != gt_classes.size() * num_classes ||
      pred_mask.size() != gt_classes.size()) {
    throw Error(ErrorCode::kShapeMismatch, "coarse loss inputs disagree in size");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < gt_classes.size(); ++i) {
    if (gt_classes[i] >= num_classes) {
      throw Error(ErrorCode::kShapeMismatch, "ground-truth class outside the class range");
    }
    // A cell the mask switches off entirely carries no class prediction.
    if (!(pred_mask.data[i] > 0.0)) continue;
    const double p = pred_mask.data[i] * pred_probs[i * num_classes + gt_classes[i]];
    sum += -std::log(std::max(p, 1e-12));
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double loss_fine(const Grid<Vec3>& pred, const Grid<Vec3>& gt, const Grid<double>& mask) {
  if (!pred.same_shape(gt) || !pred.same_shape(mask)) {
    throw Error(ErrorCode::kShapeMismatch, "residual or mask shapes differ");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(mask.data[i] > 0.5)) continue;
    sum += (pred.data[i] - gt.data[i]).lpNorm<1>();
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double loss_total(const LossComponents& components, double pose_error_term) {
  const double parts[] = {components.coarse, components.fine, components.mask, pose_error_term};
  double total = 0.0;
  for (double p : parts) {
    if (!std::isfinite(p)) throw Error(ErrorCode::kNonFinite, "loss component is not finite");
    total += p;
  }
  return total;
}

LossComponents compute_losses(const DenseMaps& pred, const DenseMaps& gt) {
  if (pred.res != gt.res || pred.num_anchors != gt.num_anchors) {
    throw Error(ErrorCode::kShapeMismatch, "predicted and ground-truth maps differ in shape");
  }
  LossComponents l;
  l.mask = loss_mask(pred.mask, gt.mask);
  l.coarse = loss_coarse(pred.region_probs, pred.num_classes(), gt.argmax_classes(), pred.mask);
  l.fine = loss_fine(pred.residual, gt.residual, pred.mask);
  return l;
}

namespace {

FloatImage plane_from(const Grid<double>& g) {
  FloatImage img{g.width, g.height, 1, {}};
  for (double v : g.data) img.data.push_back(static_cast<float>(v));
  return img;
}

FloatImage plane_from(const Grid<Vec3>& g) {
  FloatImage img{g.width, g.height, 3, {}};
  for (const Vec3& v : g.data) {
    for (int d = 0; d < 3; ++d) img.data.push_back(static_cast<float>(v[d]));
  }
  return img;
}

void expect_plane(const FloatImage& img, int w, int h, int channels, const std::string& name) {
  if (img.width != w || img.height != h || img.channels != channels) {
    throw Error(ErrorCode::kShapeMismatch, "plane " + name + " has unexpected shape");
  }
}

Grid<Vec3> vec3_grid(const FloatImage& img) {
  Grid<Vec3> g(img.width, img.height, Vec3::Zero());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.data[i] = Vec3(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
  }
  return g;
}

}  // namespace

void save_dense_maps(const std::filesystem::path& dir, const DenseMaps& maps) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  const int n = maps.res;
  write_pfm(dir / "mask.pfm", plane_from(maps.mask));
  FloatImage probs{n, n * static_cast<int>(maps.num_classes()), 1, {}};
  probs.data.resize(maps.region_probs.size());
  for (std::size_t k = 0; k < maps.num_classes(); ++k) {
    for (std::size_t cell = 0; cell < maps.cells(); ++cell) {
      probs.data[k * maps.cells() + cell] = static_cast<float>(maps.probs(cell)[k]);
    }
  }
  write_pfm(dir / "region_probs.pfm", probs);
  write_pfm(dir / "anchor_xyz.pfm", plane_from(maps.anchor_xyz));
  write_pfm(dir / "residual.pfm", plane_from(maps.residual));
  write_pfm(dir / "cam_xyz.pfm", plane_from(maps.grids.cam_xyz));
  FloatImage uv{n, n, 3, {}};
  for (const Vec2& p : maps.grids.uv.data) {
    uv.data.push_back(static_cast<float>(p.x()));
    uv.data.push_back(static_cast<float>(p.y()));
    uv.data.push_back(0.0f);
  }
  write_pfm(dir / "uv.pfm", uv);
  FloatImage valid{n, n, 1, {}};
  for (std::uint8_t v : maps.grids.valid.data) valid.data.push_back(v ? 1.0f : 0.0f);
  write_pfm(dir / "valid.pfm", valid);

  nlohmann::ordered_json j;
  j["kind"] = "dense_maps";
  j["scene_id"] = maps.scene_id;
  j["object_id"] = maps.object_id;
  j["res"] = maps.res;
  j["num_anchors"] = maps.num_anchors;
  j["gt_pose"] = pose_to_json(maps.gt_pose);
  j["affine"] = crop_affine_to_json(maps.grids.affine);
  j["k_crop"] = intrinsics_to_json(maps.grids.k_crop);
  j["planes"] = {{"mask", "mask.pfm"},
                 {"region_probs", "region_probs.pfm"},
                 {"anchor_xyz", "anchor_xyz.pfm"},
                 {"residual", "residual.pfm"},
                 {"cam_xyz", "cam_xyz.pfm"},
                 {"uv", "uv.pfm"},
                 {"valid", "valid.pfm"}};
  write_json(dir / "manifest.json", j);
}

DenseMaps load_dense_maps(const std::filesystem::path& dir) {
  const nlohmann::json j = read_json(dir / "manifest.json");
  DenseMaps m;
  try {
    if (j.value("kind", "") != "dense_maps") {
      throw Error(ErrorCode::kParseError, dir.string() + ": manifest is not a dense_maps manifest");
    }
    m.scene_id = j.at("scene_id").get<std::string>();
    m.object_id = j.at("object_id").get<std::string>();
    m.res = j.at("res").get<int>();
    m.num_anchors = j.at("num_anchors").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, (dir / "manifest.json").string() + ": " + ex.what());
  }
  m.gt_pose = pose_from_json(j.at("gt_pose"));
  m.grids.affine = crop_affine_from_json(j.at("affine"));
  m.grids.k_crop = intrinsics_from_json(j.at("k_crop"));
  m.grids.res = m.res;
  const int n = m.res;

  const FloatImage mask = read_pfm(dir / "mask.pfm");
  expect_plane(mask, n, n, 1, "mask");
  m.mask = Grid<double>(n, n, 0.0);
  for (std::size_t i = 0; i < m.mask.size(); ++i) m.mask.data[i] = mask.data[i];

  const FloatImage probs = read_pfm(dir / "region_probs.pfm");
  expect_plane(probs, n, n * static_cast<int>(m.num_classes()), 1, "region_probs");
  m.region_probs.assign(m.cells() * m.num_classes(), 0.0);
  for (std::size_t k = 0; k < m.num_classes(); ++k) {
    for (std::size_t cell = 0; cell < m.cells(); ++cell) {
      m.probs(cell)[k] = probs.data[k * m.cells() + cell];
    }
  }

  const FloatImage anchor_xyz = read_pfm(dir / "anchor_xyz.pfm");
  expect_plane(anchor_xyz, n, n, 3, "anchor_xyz");
  m.anchor_xyz = vec3_grid(anchor_xyz);
  const FloatImage residual = read_pfm(dir / "residual.pfm");
  expect_plane(residual, n, n, 3, "residual");
  m.residual = vec3_grid(residual);
  const FloatImage cam = read_pfm(dir / "cam_xyz.pfm");
  expect_plane(cam, n, n, 3, "cam_xyz");
  m.grids.cam_xyz = vec3_grid(cam);
  const FloatImage uv = read_pfm(dir / "uv.pfm");
  expect_plane(uv, n, n, 3, "uv");
  m.grids.uv = Grid<Vec2>(n, n, Vec2::Zero());
  for (std::size_t i = 0; i < m.grids.uv.size(); ++i) {
    m.grids.uv.data[i] = Vec2(uv.data[3 * i], uv.data[3 * i + 1]);
  }
  const FloatImage valid = read_pfm(dir / "valid.pfm");
  expect_plane(valid, n, n, 1, "valid");
  m.grids.valid = Grid<std::uint8_t>(n, n, 0);
  for (std::size_t i = 0; i < m.grids.valid.size(); ++i) m.grids.valid.data[i] = valid.data[i] > 0.5f;
  return m;
}

}  // namespace anchorpose
