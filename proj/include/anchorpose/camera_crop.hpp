#pragma once

#include <cstdint>
#include <vector>

#include "anchorpose/geom.hpp"
#include "anchorpose/grid.hpp"

namespace anchorpose {

inline constexpr int kCorrespondenceRes = 64;
inline constexpr int kFusionRes = 32;

// Crop window in the original image: center and side lengths in pixels, and
// the square output resolution it is resampled to.
struct Roi {
  double center_u = 0.0;
  double center_v = 0.0;
  double size_u = 1.0;
  double size_v = 1.0;
  int out_res = kCorrespondenceRes;

  double left() const { return center_u - 0.5 * size_u; }
  double top() const { return center_v - 0.5 * size_v; }
  bool is_valid() const { return size_u > 0.0 && size_v > 0.0 && out_res >= 2; }
};

// Depth in meters, row-major; 0 marks an invalid measurement.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f) {}
  float& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
};

// How the camera xyz map of a crop is computed.
enum class IntrinsicsMode {
  // Backproject the warped-back original pixel with K_org.
  kOriginalWarped,
  // Backproject the crop cell with K_crop = A * K_org. Agrees with
  // kOriginalWarped to rounding.
  kCropAdjusted,
  // Backproject the crop cell with the unadjusted K_org, as if the crop were
  // the full image. Geometrically wrong; kept to measure the damage.
  kUnadjusted,
};

// Per-cell maps of a crop. uv holds original-image pixel coordinates and
// cam_xyz the backprojected camera-frame point (zero where invalid).
// `affine` and `k_crop` describe the frame in which crop cells (col, row)
// must be interpreted.
struct GridMaps {
  int res = 0;
  Grid<Vec2> uv;
  Grid<Vec3> cam_xyz;
  Grid<std::uint8_t> valid;
  CropAffine affine;
  Intrinsics k_crop;

  // Crop-frame pixel coordinate of a cell: A applied to its uv.
  Vec2 crop_uv(int row, int col) const { return affine.apply(uv.at(row, col)); }
};

CropAffine crop_affine(const Roi& roi);

Intrinsics adjust_intrinsics(const Intrinsics& k_org, const CropAffine& a);

// Square window of side zoom * max(size) around the box center.
Roi square_roi(const Roi& box, double zoom, int out_res);

// Dynamic zoom-in jitter: shift the center by U(-r, r) * size per axis, scale
// each side by U(1 - r, 1 + r), then take a square window of side
// zoom * max(side). Deterministic in `seed`.
Roi dzi_jitter(const Roi& gt_box, std::uint64_t seed, double shift_ratio = 0.25,
               double zoom = 1.5);

// Nearest-neighbor depth sampling. Cells whose source pixel falls outside
// the image or has zero depth are invalid. Throws EmptyIntersection when the
// crop window misses the image.
GridMaps make_grid_maps(const DepthImage& depth, const Roi& roi, const Intrinsics& k_org,
                        IntrinsicsMode mode = IntrinsicsMode::kOriginalWarped);

// Source pixel (row, col) for an original-image coordinate; false if outside.
bool nearest_pixel(const Vec2& uv, int width, int height, int& row, int& col);

}  // namespace anchorpose
