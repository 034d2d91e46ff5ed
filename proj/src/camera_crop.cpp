#include "anchorpose/camera_crop.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "anchorpose/error.hpp"

namespace anchorpose {

CropAffine crop_affine(const Roi& roi) {
  if (!roi.is_valid()) throw Error(ErrorCode::kInvalidArgument, "invalid RoI");
  CropAffine a;
  a.scale_u = roi.out_res / roi.size_u;
  a.scale_v = roi.out_res / roi.size_v;
  a.offset_u = -a.scale_u * roi.left();
  a.offset_v = -a.scale_v * roi.top();
  return a;
}

Intrinsics adjust_intrinsics(const Intrinsics& k_org, const CropAffine& a) {
  // Rows of A * K: [s_u*fx, 0, s_u*cx + o_u], [0, s_v*fy, s_v*cy + o_v].
  return {a.scale_u * k_org.fx, a.scale_v * k_org.fy, a.scale_u * k_org.cx + a.offset_u,
          a.scale_v * k_org.cy + a.offset_v};
}

Roi square_roi(const Roi& box, double zoom, int out_res) {
  const double side = zoom * std::max(box.size_u, box.size_v);
  return {box.center_u, box.center_v, side, side, out_res};
}

Roi dzi_jitter(const Roi& gt_box, std::uint64_t seed, double shift_ratio, double zoom) {
  if (!gt_box.is_valid()) throw Error(ErrorCode::kInvalidArgument, "invalid RoI");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Roi jittered = gt_box;
  jittered.center_u += shift_ratio * unit(rng) * gt_box.size_u;
  jittered.center_v += shift_ratio * unit(rng) * gt_box.size_v;
  jittered.size_u *= 1.0 + shift_ratio * unit(rng);
  jittered.size_v *= 1.0 + shift_ratio * unit(rng);
  return square_roi(jittered, zoom, gt_box.out_res);
}

bool nearest_pixel(const Vec2& uv, int width, int height, int& row, int& col) {
  const double cu = std::floor(uv.x() + 0.5);
  const double rv = std::floor(uv.y() + 0.5);
  if (!(cu >= 0.0 && cu < width && rv >= 0.0 && rv < height)) return false;
  col = static_cast<int>(cu);
  row = static_cast<int>(rv);
  return true;
}

GridMaps make_grid_maps(const DepthImage& depth, const Roi& roi, const Intrinsics& k_org,
                        IntrinsicsMode mode) {
  if (!roi.is_valid()) throw Error(ErrorCode::kInvalidArgument, "invalid RoI");
  const double right = roi.left() + roi.size_u;
  const double bottom = roi.top() + roi.size_v;
  if (right < -0.5 || roi.left() > depth.width - 0.5 || bottom < -0.5 ||
      roi.top() > depth.height - 0.5) {
    throw Error(ErrorCode::kEmptyIntersection, "crop window does not intersect the image");
  }

  const int n = roi.out_res;
  const CropAffine a = crop_affine(roi);
  const Intrinsics k_crop = adjust_intrinsics(k_org, a);

  GridMaps maps;
  maps.res = n;
  maps.uv = Grid<Vec2>(n, n, Vec2::Zero());
  maps.cam_xyz = Grid<Vec3>(n, n, Vec3::Zero());
  maps.valid = Grid<std::uint8_t>(n, n, 0);
  if (mode == IntrinsicsMode::kUnadjusted) {
    maps.affine = CropAffine{};
    maps.k_crop = k_org;
  } else {
    maps.affine = a;
    maps.k_crop = k_crop;
  }

  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Vec2 cell(c, r);
      const Vec2 uv = a.apply_inverse(cell);
      maps.uv.at(r, c) = mode == IntrinsicsMode::kUnadjusted ? cell : uv;
      int pr = 0, pc = 0;
      if (!nearest_pixel(uv, depth.width, depth.height, pr, pc)) continue;
      const double d = depth.at(pr, pc);
      if (!(d > 0.0)) continue;
      switch (mode) {
        case IntrinsicsMode::kOriginalWarped:
          maps.cam_xyz.at(r, c) = backproject(uv.x(), uv.y(), d, k_org);
          break;
        case IntrinsicsMode::kCropAdjusted:
          maps.cam_xyz.at(r, c) = backproject(cell.x(), cell.y(), d, k_crop);
          break;
        case IntrinsicsMode::kUnadjusted:
          maps.cam_xyz.at(r, c) = backproject(cell.x(), cell.y(), d, k_org);
          break;
      }
      maps.valid.at(r, c) = 1;
    }
  }
  return maps;
}

}  // namespace anchorpose
