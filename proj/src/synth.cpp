#include "anchorpose/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>

#include "anchorpose/error.hpp"
#include "anchorpose/io.hpp"

namespace anchorpose {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec3> cube_points(std::size_t n, double side) {
  int g = 1;
  auto count = [](long long s) { return (s + 1) * (s + 1) * (s + 1) - (s - 1) * (s - 1) * (s - 1); };
  while (static_cast<std::size_t>(count(g)) < n) ++g;
  std::vector<Vec3> pts;
  const double step = side / g;
  for (int i = 0; i <= g; ++i) {
    for (int j = 0; j <= g; ++j) {
      for (int k = 0; k <= g; ++k) {
        const bool on_surface = i == 0 || i == g || j == 0 || j == g || k == 0 || k == g;
        if (!on_surface) continue;
        pts.emplace_back(-0.5 * side + i * step, -0.5 * side + j * step, -0.5 * side + k * step);
      }
    }
  }
  return pts;
}

// Unit-sphere vertices of a subdivided icosahedron with at least n vertices.
std::vector<Vec3> icosphere_directions(std::size_t n) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                             {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                             {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (Vec3& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  while (verts.size() < n) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return verts;
}

std::vector<Vec3> cylinder_points(std::size_t n, double radius, double height) {
  const double area = 2.0 * kPi * radius * (height + radius);
  double h = std::sqrt(area / std::max<std::size_t>(n, 1));
  for (;;) {
    std::vector<Vec3> pts;
    const int rings = std::max(2, static_cast<int>(std::ceil(height / h)) + 1);
    const int segments = std::max(3, static_cast<int>(std::ceil(2.0 * kPi * radius / h)));
    for (int i = 0; i < rings; ++i) {
      const double z = -0.5 * height + height * i / (rings - 1);
      for (int s = 0; s < segments; ++s) {
        const double a = 2.0 * kPi * s / segments;
        pts.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
      }
    }
    const int cap_rings = std::max(1, static_cast<int>(std::ceil(radius / h)));
    for (double z : {-0.5 * height, 0.5 * height}) {
      pts.emplace_back(0.0, 0.0, z);
      // The outermost ring coincides with the side rim.
      for (int j = 1; j < cap_rings; ++j) {
        const double rj = radius * j / cap_rings;
        const int m = std::max(3, static_cast<int>(std::ceil(2.0 * kPi * rj / h)));
        for (int s = 0; s < m; ++s) {
          const double a = 2.0 * kPi * s / m;
          pts.emplace_back(rj * std::cos(a), rj * std::sin(a), z);
        }
      }
    }
    if (pts.size() >= n) return pts;
    h *= 0.98;
  }
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace

Shape shape_from_name(const std::string& name) {
  if (name == "cube") return Shape::kCube;
  if (name == "cylinder") return Shape::kCylinder;
  if (name == "icosphere") return Shape::kIcosphere;
  if (name == "blob") return Shape::kBlob;
  throw Error(ErrorCode::kInvalidArgument, "unknown shape '" + name + "'");
}

std::string shape_name(Shape shape) {
  switch (shape) {
    case Shape::kCube: return "cube";
    case Shape::kCylinder: return "cylinder";
    case Shape::kIcosphere: return "icosphere";
    case Shape::kBlob: return "blob";
  }
  return "unknown";
}

ObjectModel make_model(Shape shape, std::size_t n_points, double scale, std::uint64_t seed,
                       const std::string& id) {
  if (n_points < 4) throw Error(ErrorCode::kInvalidArgument, "make_model needs n_points >= 4");
  if (!(scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "make_model needs scale > 0");
  const std::string name = id.empty() ? shape_name(shape) : id;
  switch (shape) {
    case Shape::kCube:
      return ObjectModel(name, cube_points(n_points, scale), true);
    case Shape::kCylinder:
      return ObjectModel(name, cylinder_points(n_points, 0.5 * scale, scale), true);
    case Shape::kIcosphere: {
      std::vector<Vec3> pts = icosphere_directions(n_points);
      for (Vec3& p : pts) p *= 0.5 * scale;
      return ObjectModel(name, std::move(pts), true);
    }
    case Shape::kBlob: {
      std::mt19937_64 rng(seed);
      const Vec3 d1 = random_unit(rng);
      const Vec3 d2 = random_unit(rng);
      const Vec3 d3 = random_unit(rng);
      std::vector<Vec3> pts = icosphere_directions(n_points);
      for (Vec3& p : pts) {
        const double a = d1.dot(p);
        const double b = d2.dot(p);
        const double c = d3.dot(p);
        const double radial = 1.0 + 0.25 * a + 0.15 * b * b + 0.1 * c * c * c;
        p *= 0.5 * scale * radial / 1.25;
      }
      return ObjectModel(name, std::move(pts), false);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown shape");
}

std::size_t min_points_for_density(double surface_area, const Intrinsics& k, double depth) {
  return static_cast<std::size_t>(std::ceil(3.0 * surface_area * k.fx * k.fy / (depth * depth)));
}

Mat3 sample_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u1 = unit(rng);
  const double u2 = unit(rng);
  const double u3 = unit(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const Eigen::Quaterniond q(b * std::cos(2.0 * kPi * u3), a * std::sin(2.0 * kPi * u2),
                             a * std::cos(2.0 * kPi * u2), b * std::sin(2.0 * kPi * u3));
  return q.normalized().toRotationMatrix();
}

Pose sample_pose(const ObjectModel& model, const SceneConfig& config, std::mt19937_64& rng) {
  if (!(config.min_depth > 0.0 && config.max_depth >= config.min_depth)) {
    throw Error(ErrorCode::kInvalidArgument, "depth range must be positive");
  }
  std::uniform_real_distribution<double> depth_dist(config.min_depth, config.max_depth);
  Pose pose;
  pose.rotation = sample_rotation(rng);
  const double z = depth_dist(rng);
  const Intrinsics& k = config.intrinsics;
  const double margin_u = std::min(0.5 * config.width - 1.0, k.fx * 0.5 * model.diameter() / z + 2.0);
  const double margin_v = std::min(0.5 * config.height - 1.0, k.fy * 0.5 * model.diameter() / z + 2.0);
  std::uniform_real_distribution<double> u_dist(margin_u, config.width - 1.0 - margin_u);
  std::uniform_real_distribution<double> v_dist(margin_v, config.height - 1.0 - margin_v);
  const double u = u_dist(rng);
  const double v = v_dist(rng);
  pose.translation = backproject(u, v, z, k);
  return pose;
}

namespace {

struct ObjectBuffer {
  Grid<double> depth;
  Grid<std::int32_t> owner;
  std::size_t pixels = 0;
};

ObjectBuffer splat_object(const ObjectModel& model, const Pose& pose, int width, int height,
                          const Intrinsics& k) {
  ObjectBuffer buf{Grid<double>(width, height, std::numeric_limits<double>::infinity()),
                   Grid<std::int32_t>(width, height, -1), 0};
  const auto& pts = model.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 pc = pose.apply(pts[i]);
    if (!(pc.z() > kNearPlane)) continue;
    const Vec2 uv(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
    int row = 0, col = 0;
    if (!nearest_pixel(uv, width, height, row, col)) continue;
    if (pc.z() < buf.depth.at(row, col)) {
      if (buf.owner.at(row, col) < 0) ++buf.pixels;
      buf.depth.at(row, col) = pc.z();
      buf.owner.at(row, col) = static_cast<std::int32_t>(i);
    }
  }
  return buf;
}

Roi tight_box(const Grid<std::int32_t>& owner) {
  int c0 = owner.width, c1 = -1, r0 = owner.height, r1 = -1;
  for (int r = 0; r < owner.height; ++r) {
    for (int c = 0; c < owner.width; ++c) {
      if (owner.at(r, c) < 0) continue;
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
    }
  }
  return {0.5 * (c0 + c1), 0.5 * (r0 + r1), double(c1 - c0 + 1), double(r1 - r0 + 1),
          kCorrespondenceRes};
}

}  // namespace

SceneSample render(const ObjectModel& model, const Pose& pose, const SceneConfig& config,
                   const std::vector<Occluder>& occluders) {
  const int w = config.width;
  const int h = config.height;
  const ObjectBuffer obj = splat_object(model, pose, w, h, config.intrinsics);
  if (obj.pixels == 0) {
    throw Error(ErrorCode::kObjectOutOfView, "object '" + model.id() + "' covers no pixel");
  }

  Grid<double> occ_depth(w, h, std::numeric_limits<double>::infinity());
  for (const Occluder& o : occluders) {
    if (!(o.depth > 0.0)) throw Error(ErrorCode::kInvalidArgument, "occluder depth must be positive");
    for (int r = std::max(0, o.row0); r < std::min(h, o.row1); ++r) {
      for (int c = std::max(0, o.col0); c < std::min(w, o.col1); ++c) {
        occ_depth.at(r, c) = std::min(occ_depth.at(r, c), o.depth);
      }
    }
  }

  SceneSample s;
  s.object_id = model.id();
  s.gt_pose = pose;
  s.intrinsics = config.intrinsics;
  s.depth = DepthImage(w, h);
  s.vis_mask = Grid<std::uint8_t>(w, h, 0);
  s.point_index = Grid<std::int32_t>(w, h, -1);
  s.obj_xyz = Grid<Vec3>(w, h, Vec3::Zero());
  s.occluders = occluders;
  s.bbox = tight_box(obj.owner);

  std::size_t visible = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double oz = obj.depth.at(r, c);
      const double qz = occ_depth.at(r, c);
      if (obj.owner.at(r, c) >= 0 && oz < qz) {
        s.depth.at(r, c) = static_cast<float>(oz);
        s.vis_mask.at(r, c) = 1;
        s.point_index.at(r, c) = obj.owner.at(r, c);
        s.obj_xyz.at(r, c) = model.points()[obj.owner.at(r, c)];
        ++visible;
      } else if (std::isfinite(qz)) {
        s.depth.at(r, c) = static_cast<float>(qz);
      }
    }
  }
  s.visible_fraction = static_cast<double>(visible) / static_cast<double>(obj.pixels);

  if (config.depth_noise > 0.0) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, config.depth_noise);
    for (float& d : s.depth.data) {
      if (d > 0.0f) d = static_cast<float>(std::max(1e-6, d + noise(rng)));
    }
  }
  return s;
}

namespace {

std::vector<Occluder> sample_occluders(const SceneSample& clean, const SceneConfig& config,
                                       double target, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count_dist(std::max(1, config.min_occluders),
                                                std::max(1, config.max_occluders));
  const int count = count_dist(rng);
  const Roi& b = clean.bbox;
  const double per = (1.0 - target) / count;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double nearest = std::numeric_limits<double>::infinity();
  for (float d : clean.depth.data) {
    if (d > 0.0f) nearest = std::min<double>(nearest, d);
  }
  std::vector<Occluder> out;
  for (int i = 0; i < count; ++i) {
    const double frac = std::clamp(per * (0.6 + 0.8 * unit(rng)), 0.0, 1.0);
    const int side = std::uniform_int_distribution<int>(0, 3)(rng);
    const int left = static_cast<int>(std::floor(b.center_u - 0.5 * b.size_u));
    const int top = static_cast<int>(std::floor(b.center_v - 0.5 * b.size_v));
    const int right = left + static_cast<int>(std::ceil(b.size_u)) + 1;
    const int bottom = top + static_cast<int>(std::ceil(b.size_v)) + 1;
    Occluder o{left - 2, top - 2, right + 2, bottom + 2, 0.0};
    const int du = static_cast<int>(std::round(frac * b.size_u));
    const int dv = static_cast<int>(std::round(frac * b.size_v));
    switch (side) {
      case 0: o.col1 = left + du; break;
      case 1: o.col0 = right - du; break;
      case 2: o.row1 = top + dv; break;
      default: o.row0 = bottom - dv; break;
    }
    const double lo = std::max(0.05, 0.5 * nearest);
    const double hi = std::max(lo, nearest - 0.02);
    o.depth = lo + (hi - lo) * unit(rng);
    out.push_back(o);
  }
  return out;
}

}  // namespace

std::vector<SceneSample> make_benchmark(const ObjectModel& model, const SceneConfig& config,
                                        std::size_t n_scenes,
                                        const std::vector<double>& occlusion_levels) {
  if (n_scenes == 0) throw Error(ErrorCode::kInvalidArgument, "n_scenes must be >= 1");
  if (occlusion_levels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one occlusion level");
  }
  std::vector<SceneSample> scenes;
  scenes.reserve(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) {
    const double target = occlusion_levels[i % occlusion_levels.size()];
    // seed_seq keeps only 32 bits per entry, so both words go in as halves.
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32), static_cast<std::uint32_t>(i),
                      static_cast<std::uint32_t>(std::uint64_t{i} >> 32)};
    std::mt19937_64 rng(seq);
    const bool wants_occluders = target < 0.95 && config.max_occluders > 0;
    bool filled = false;
    for (int attempt = 0; attempt < 100 && !filled; ++attempt) {
      const Pose pose = sample_pose(model, config, rng);
      SceneConfig scene_config = config;
      scene_config.seed = rng();
      SceneSample clean;
      try {
        SceneConfig noiseless = scene_config;
        noiseless.depth_noise = 0.0;
        clean = render(model, pose, noiseless);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kObjectOutOfView) continue;
        throw;
      }
      std::vector<Occluder> occluders;
      if (wants_occluders) occluders = sample_occluders(clean, config, target, rng);
      SceneSample s = render(model, pose, scene_config, occluders);
      if (std::abs(s.visible_fraction - target) > 0.1) continue;
      char id[32];
      std::snprintf(id, sizeof(id), "scene_%04zu", i);
      s.scene_id = id;
      scenes.push_back(std::move(s));
      filled = true;
    }
    if (!filled) {
      throw Error(ErrorCode::kBinUnfillable,
                  "could not reach visible fraction " + std::to_string(target) + " for scene " +
                      std::to_string(i) + " in 100 attempts");
    }
  }
  return scenes;
}

void save_scene(const std::filesystem::path& dir, const SceneSample& scene) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_depth_pfm(dir / "depth.pfm", scene.depth);
  write_mask_pgm(dir / "vis_mask.pgm", scene.vis_mask);
  nlohmann::ordered_json j;
  j["scene_id"] = scene.scene_id;
  j["object_id"] = scene.object_id;
  j["pose"] = pose_to_json(scene.gt_pose);
  j["intrinsics"] = intrinsics_to_json(scene.intrinsics);
  j["width"] = scene.depth.width;
  j["height"] = scene.depth.height;
  j["visible_fraction"] = scene.visible_fraction;
  j["bbox"] = roi_to_json(scene.bbox);
  auto occ = nlohmann::ordered_json::array();
  for (const Occluder& o : scene.occluders) {
    occ.push_back({{"col0", o.col0}, {"row0", o.row0}, {"col1", o.col1}, {"row1", o.row1},
                   {"depth", o.depth}});
  }
  j["occluders"] = occ;
  write_json(dir / "scene.json", j);
}

SceneSample load_scene(const std::filesystem::path& dir, const ObjectModel& model) {
  const nlohmann::json j = read_json(dir / "scene.json");
  SceneSample s;
  try {
    s.scene_id = j.at("scene_id").get<std::string>();
    s.object_id = j.at("object_id").get<std::string>();
    s.visible_fraction = j.at("visible_fraction").get<double>();
    for (const auto& o : j.at("occluders")) {
      s.occluders.push_back({o.at("col0").get<int>(), o.at("row0").get<int>(),
                             o.at("col1").get<int>(), o.at("row1").get<int>(),
                             o.at("depth").get<double>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, (dir / "scene.json").string() + ": " + ex.what());
  }
  if (s.object_id != model.id()) {
    throw Error(ErrorCode::kObjectMismatch,
                "scene object '" + s.object_id + "' but model '" + model.id() + "'");
  }
  s.gt_pose = pose_from_json(j.at("pose"));
  s.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  s.bbox = roi_from_json(j.at("bbox"));
  s.depth = read_depth_pfm(dir / "depth.pfm");
  s.vis_mask = read_mask_pgm(dir / "vis_mask.pgm");
  if (!s.vis_mask.same_shape(s.depth.width, s.depth.height)) {
    throw Error(ErrorCode::kShapeMismatch, dir.string() + ": mask and depth sizes differ");
  }
  const ObjectBuffer obj = splat_object(model, s.gt_pose, s.depth.width, s.depth.height,
                                        s.intrinsics);
  s.point_index = Grid<std::int32_t>(s.depth.width, s.depth.height, -1);
  s.obj_xyz = Grid<Vec3>(s.depth.width, s.depth.height, Vec3::Zero());
  for (int r = 0; r < s.depth.height; ++r) {
    for (int c = 0; c < s.depth.width; ++c) {
      if (!s.vis_mask.at(r, c)) continue;
      const std::int32_t owner = obj.owner.at(r, c);
      if (owner < 0) {
        throw Error(ErrorCode::kObjectMismatch,
                    dir.string() + ": visible pixel not covered by the model at the stored pose");
      }
      s.point_index.at(r, c) = owner;
      s.obj_xyz.at(r, c) = model.points()[owner];
    }
  }
  return s;
}

}  // namespace anchorpose
