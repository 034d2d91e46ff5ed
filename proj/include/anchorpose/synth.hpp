#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "anchorpose/camera_crop.hpp"
#include "anchorpose/geom.hpp"
#include "anchorpose/grid.hpp"
#include "anchorpose/mesh.hpp"

namespace anchorpose {

enum class Shape { kCube, kCylinder, kIcosphere, kBlob };

Shape shape_from_name(const std::string& name);
std::string shape_name(Shape shape);

// Procedural surface point cloud centered at the origin. `scale` is the side
// of the cube, and the diameter of the sphere and of the cylinder (whose
// height also equals `scale`). The point count is the smallest the shape's
// lattice allows that is >= n_points. Only the blob consumes `seed`; it gets
// a seeded low-frequency radial perturbation with no rotational symmetry.
ObjectModel make_model(Shape shape, std::size_t n_points, double scale, std::uint64_t seed,
                       const std::string& id = "");

// Points needed for about three splats per pixel when `surface_area` m^2
// faces the camera at `depth`.
std::size_t min_points_for_density(double surface_area, const Intrinsics& k, double depth);

// Fronto-parallel occluding plane covering pixel columns [col0, col1) and
// rows [row0, row1) at a fixed depth.
struct Occluder {
  int col0 = 0;
  int row0 = 0;
  int col1 = 0;
  int row1 = 0;
  double depth = 0.5;
};

struct SceneConfig {
  int width = 640;
  int height = 480;
  Intrinsics intrinsics{572.4114, 573.57043, 325.2611, 242.04899};
  double min_depth = 0.4;
  double max_depth = 2.0;
  int min_occluders = 1;
  int max_occluders = 3;
  double depth_noise = 0.0;  // meters
  std::uint64_t seed = 0;
};

struct SceneSample {
  std::string scene_id;
  std::string object_id;
  Pose gt_pose;
  DepthImage depth;
  Grid<std::uint8_t> vis_mask;
  Intrinsics intrinsics;
  double visible_fraction = 0.0;
  // Tight box around every object pixel ignoring occluders.
  Roi bbox;
  // Model point that owns each visible pixel, -1 elsewhere.
  Grid<std::int32_t> point_index;
  // Object-frame coordinate of the owning point at visible pixels.
  Grid<Vec3> obj_xyz;
  std::vector<Occluder> occluders;
};

// Point-splat z-buffer render. Occluders go into the buffer first; each model
// point then claims the pixel it rounds to when nearer than what is stored
// (lowest index wins ties). Gaussian noise of config.depth_noise is added to
// every valid pixel afterwards, seeded by config.seed and clamped positive.
// Throws ObjectOutOfView when no model point lands in the image.
SceneSample render(const ObjectModel& model, const Pose& pose, const SceneConfig& config,
                   const std::vector<Occluder>& occluders = {});

Mat3 sample_rotation(std::mt19937_64& rng);
Pose sample_pose(const ObjectModel& model, const SceneConfig& config, std::mt19937_64& rng);

// Scene i aims at occlusion_levels[i % L] (target visible fraction) and is
// rejection sampled until it lands within 0.1 of it; throws BinUnfillable
// after 100 attempts. Scene i draws from an RNG seeded by (config.seed, i).
std::vector<SceneSample> make_benchmark(const ObjectModel& model, const SceneConfig& config,
                                        std::size_t n_scenes,
                                        const std::vector<double>& occlusion_levels);

// Scene directory: depth.pfm, vis_mask.pgm and scene.json.
void save_scene(const std::filesystem::path& dir, const SceneSample& scene);
// Rebuilds point_index and obj_xyz by re-splatting `model` at the stored pose.
SceneSample load_scene(const std::filesystem::path& dir, const ObjectModel& model);

}  // namespace anchorpose
