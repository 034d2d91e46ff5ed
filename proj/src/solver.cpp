#include "anchorpose/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "anchorpose/error.hpp"
#include "anchorpose/io.hpp"

namespace anchorpose {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void degenerate(const std::string& what) {
  throw Error(ErrorCode::kDegenerateConfiguration, what);
}

double weight_sum(const CorrSet& corr) {
  double s = 0.0;
  for (double w : corr.weights) s += w;
  return s;
}

// d(R o + t) / d(alpha, beta, gamma, t) for the rotation update
// a1 = b1 + alpha b2 + beta b3, a2 = b2 + gamma b3.
Mat36 point_jacobian(const Mat3& r, const Vec3& o) {
  const Vec3 b1 = r.col(0), b2 = r.col(1), b3 = r.col(2);
  Mat36 d;
  d.col(0) = o.x() * b2 - o.y() * b1;
  d.col(1) = o.x() * b3 - o.z() * b1;
  d.col(2) = o.y() * b3 - o.z() * b2;
  d.block<3, 3>(0, 3).setIdentity();
  return d;
}

Pose apply_update(const Pose& pose, const Vec6& delta) {
  const Vec3 b1 = pose.rotation.col(0), b2 = pose.rotation.col(1), b3 = pose.rotation.col(2);
  Rot6D r6;
  r6.a1 = b1 + delta[0] * b2 + delta[1] * b3;
  r6.a2 = b2 + delta[2] * b3;
  return {rot6d_to_matrix(r6), pose.translation + delta.tail<3>()};
}

// Accumulates whitened reprojection terms; returns +inf when a point falls
// behind the camera.
double accumulate_2d(const CorrSet& corr, const Intrinsics& k, const Pose& pose, double scale,
                     Mat6* h, Vec6* g) {
  const auto& img = *corr.img_pts;
  double f = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double w = corr.weights[i];
    if (w == 0.0) continue;
    const Vec3 pc = pose.apply(corr.obj_pts[i]);
    if (!(pc.z() > kNearPlane)) return kInf;
    const double iz = 1.0 / pc.z();
    const Vec2 proj(k.fx * pc.x() * iz + k.cx, k.fy * pc.y() * iz + k.cy);
    const double s = std::sqrt(w) / scale;
    const Vec2 e = s * (proj - img[i]);
    f += e.squaredNorm();
    if (h != nullptr) {
      Eigen::Matrix<double, 2, 3> jp;
      jp << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      const Eigen::Matrix<double, 2, 6> j = s * jp * point_jacobian(pose.rotation, corr.obj_pts[i]);
      *h += j.transpose() * j;
      *g += j.transpose() * e;
    }
  }
  return f;
}

double accumulate_3d(const CorrSet& corr, const Pose& pose, double scale, Mat6* h, Vec6* g) {
  const auto& cam = *corr.cam_pts;
  double f = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double w = corr.weights[i];
    if (w == 0.0) continue;
    const double s = std::sqrt(w) / scale;
    const Vec3 e = s * (pose.apply(corr.obj_pts[i]) - cam[i]);
    f += e.squaredNorm();
    if (h != nullptr) {
      const Mat36 j = s * point_jacobian(pose.rotation, corr.obj_pts[i]);
      *h += j.transpose() * j;
      *g += j.transpose() * e;
    }
  }
  return f;
}

struct GaussNewtonResult {
  Pose pose;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

template <typename Objective>
GaussNewtonResult gauss_newton(const Pose& init, Objective&& objective,
                               const GaussNewtonOptions& options) {
  GaussNewtonResult res;
  res.pose = init;
  double f = objective(res.pose, nullptr, nullptr);
  if (!std::isfinite(f)) degenerate("initial pose puts correspondences behind the camera");
  res.trace.push_back(f);
  for (int it = 0; it < options.max_iterations; ++it) {
    res.iterations = it + 1;
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    objective(res.pose, &h, &g);
    Eigen::SelfAdjointEigenSolver<Mat6> eig(h);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0.0) || !(eig.eigenvalues().minCoeff() > 1e-14 * top)) {
      degenerate("normal equations are rank deficient");
    }
    Vec6 delta = -h.ldlt().solve(g);
    if (delta.norm() < options.step_tolerance) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      const Pose candidate = apply_update(res.pose, delta);
      const double fc = objective(candidate, nullptr, nullptr);
      if (fc <= f) {
        res.pose = candidate;
        f = fc;
        res.trace.push_back(f);
        accepted = true;
        break;
      }
      delta *= 0.5;
    }
    if (!accepted || delta.norm() < options.step_tolerance) {
      // No representable decrease left: stationary at working precision.
      res.converged = true;
      break;
    }
  }
  return res;
}

double rmse_3d(const CorrSet& corr, const Pose& pose) {
  const double ws = weight_sum(corr);
  return std::sqrt(accumulate_3d(corr, pose, 1.0, nullptr, nullptr) / ws);
}

double rmse_2d(const CorrSet& corr, const Intrinsics& k, const Pose& pose) {
  const double ws = weight_sum(corr);
  return std::sqrt(accumulate_2d(corr, k, pose, 1.0, nullptr, nullptr) / ws);
}

// Sorted eigenvalues (descending) of the weighted scatter of the object points.
Vec3 object_spread(const CorrSet& corr) {
  const double ws = weight_sum(corr);
  Vec3 mean = Vec3::Zero();
  for (std::size_t i = 0; i < corr.size(); ++i) mean += corr.weights[i] * corr.obj_pts[i];
  mean /= ws;
  Mat3 c = Mat3::Zero();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 d = corr.obj_pts[i] - mean;
    c += corr.weights[i] * d * d.transpose();
  }
  c /= ws;
  Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(c).eigenvalues();
  return {ev[2], ev[1], ev[0]};
}

std::size_t positive_weights(const CorrSet& corr) {
  return static_cast<std::size_t>(
      std::count_if(corr.weights.begin(), corr.weights.end(), [](double w) { return w > 0.0; }));
}

}  // namespace

std::string mode_name(SolveMode mode) {
  switch (mode) {
    case SolveMode::k3d3d: return "3d3d";
    case SolveMode::k2d3d: return "2d3d";
    case SolveMode::kFused: return "fused";
  }
  return "unknown";
}

SolveMode mode_from_name(const std::string& name) {
  if (name == "3d3d") return SolveMode::k3d3d;
  if (name == "2d3d") return SolveMode::k2d3d;
  if (name == "fused") return SolveMode::kFused;
  throw Error(ErrorCode::kInvalidArgument, "unknown solve mode '" + name + "'");
}

void CorrSet::validate() const {
  if (!cam_pts && !img_pts) {
    throw Error(ErrorCode::kPrecondition, "correspondences need camera or image points");
  }
  if ((cam_pts && cam_pts->size() != obj_pts.size()) ||
      (img_pts && img_pts->size() != obj_pts.size()) || weights.size() != obj_pts.size()) {
    throw Error(ErrorCode::kPrecondition, "correspondence lists differ in length");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kPrecondition, "weights must be finite and >= 0");
    }
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kPrecondition, "all weights are zero");
}

CorrSet CorrSet::subset(const std::vector<std::size_t>& indices) const {
  CorrSet out;
  if (cam_pts) out.cam_pts.emplace();
  if (img_pts) out.img_pts.emplace();
  for (std::size_t i : indices) {
    out.obj_pts.push_back(obj_pts[i]);
    out.weights.push_back(weights[i]);
    if (cam_pts) out.cam_pts->push_back((*cam_pts)[i]);
    if (img_pts) out.img_pts->push_back((*img_pts)[i]);
  }
  return out;
}

nlohmann::json solve_report_to_json(const SolveReport& report) {
  nlohmann::json j;
  j["mode"] = mode_name(report.mode);
  j["pose"] = pose_to_json(report.pose);
  j["inlier_count"] = report.inlier_count;
  j["rmse"] = report.rmse;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  return j;
}

CorrSet extract_correspondences(const DenseMaps& maps, const AnchorSet& anchors,
                                double mask_threshold) {
  if (maps.num_anchors != anchors.size()) {
    throw Error(ErrorCode::kShapeMismatch, "maps were built for a different anchor count");
  }
  CorrSet corr;
  corr.cam_pts.emplace();
  corr.img_pts.emplace();
  for (int r = 0; r < maps.res; ++r) {
    for (int c = 0; c < maps.res; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * maps.res + c;
      const double m = maps.mask.at(r, c);
      if (!(m > mask_threshold) || !maps.grids.valid.at(r, c)) continue;
      const std::size_t cls = maps.argmax_class(cell);
      if (cls == anchors.background_index()) continue;
      corr.obj_pts.push_back(decode({cls, maps.residual.at(r, c)}, anchors));
      corr.cam_pts->push_back(maps.grids.cam_xyz.at(r, c));
      corr.img_pts->push_back(maps.grids.crop_uv(r, c));
      corr.weights.push_back(m);
    }
  }
  if (corr.obj_pts.empty()) throw Error(ErrorCode::kNoForeground, "no foreground cell survived");
  return corr;
}

SolveReport solve_3d3d(const CorrSet& corr) {
  corr.validate();
  if (!corr.cam_pts) throw Error(ErrorCode::kPrecondition, "3d3d solving needs camera points");
  if (positive_weights(corr) < 3) degenerate("3d3d solving needs at least 3 weighted points");
  const auto& cam = *corr.cam_pts;
  const double ws = weight_sum(corr);

  Vec3 mu_o = Vec3::Zero(), mu_c = Vec3::Zero();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    mu_o += corr.weights[i] * corr.obj_pts[i];
    mu_c += corr.weights[i] * cam[i];
  }
  mu_o /= ws;
  mu_c /= ws;
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    cov += corr.weights[i] * (cam[i] - mu_c) * (corr.obj_pts[i] - mu_o).transpose();
  }
  const Vec3 spread = object_spread(corr);
  if (!(spread[0] > 0.0) || !(spread[1] > 1e-12 * spread[0])) {
    degenerate("object points are collinear");
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[1] > 1e-12 * sv[0])) degenerate("cross-covariance has rank < 2");
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  SolveReport report;
  report.mode = SolveMode::k3d3d;
  report.pose.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  report.pose.translation = mu_c - report.pose.rotation * mu_o;
  report.inlier_count = corr.size();
  report.rmse = rmse_3d(corr, report.pose);
  report.iterations = 1;
  return report;
}

std::optional<Pose> dlt_pose(const CorrSet& corr, const Intrinsics& k) {
  if (!corr.img_pts || corr.size() < 6) return std::nullopt;
  const Vec3 spread = object_spread(corr);
  if (!(spread[0] > 0.0) || !(spread[2] > 1e-10 * spread[0])) return std::nullopt;

  const double ws = weight_sum(corr);
  Vec3 mean = Vec3::Zero();
  for (std::size_t i = 0; i < corr.size(); ++i) mean += corr.weights[i] * corr.obj_pts[i];
  mean /= ws;
  const double scale = std::sqrt(spread.sum());

  Eigen::MatrixXd a(2 * corr.size(), 12);
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 x = (corr.obj_pts[i] - mean) / scale;
    const Vec2& uv = (*corr.img_pts)[i];
    const double xn = (uv.x() - k.cx) / k.fx;
    const double yn = (uv.y() - k.cy) / k.fy;
    const double w = std::sqrt(corr.weights[i]);
    Eigen::Matrix<double, 1, 4> xh(x.x(), x.y(), x.z(), 1.0);
    a.row(2 * i) << w * xh, Eigen::RowVector4d::Zero(), -w * xn * xh;
    a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), w * xh, -w * yn * xh;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> pm;
  pm << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();
  // Undo the object normalization: P_orig = P_norm * [I/s, -mean/s; 0 1].
  Mat3 m = pm.leftCols<3>() / scale;
  Vec3 t = pm.col(3) - m * mean;
  if (m.determinant() < 0.0) {
    m = -m;
    t = -t;
  }
  Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double lambda = msvd.singularValues().mean();
  if (!(lambda > 0.0)) return std::nullopt;
  Pose pose;
  pose.rotation = msvd.matrixU() * msvd.matrixV().transpose();
  pose.translation = t / lambda;
  for (const Vec3& o : corr.obj_pts) {
    if (!(pose.apply(o).z() > kNearPlane)) return std::nullopt;
  }
  return pose;
}

SolveReport solve_2d3d(const CorrSet& corr, const Intrinsics& k, const std::optional<Pose>& init,
                       const GaussNewtonOptions& options) {
  corr.validate();
  if (!corr.img_pts) throw Error(ErrorCode::kPrecondition, "2d3d solving needs image points");
  if (positive_weights(corr) < 6) degenerate("2d3d solving needs at least 6 weighted points");
  const Vec3 spread = object_spread(corr);
  if (!(spread[0] > 0.0) || !(spread[1] > 1e-12 * spread[0])) {
    degenerate("object points are collinear");
  }

  Pose start;
  if (init) {
    start = *init;
  } else if (corr.cam_pts) {
    start = solve_3d3d(corr).pose;
  } else if (auto dlt = dlt_pose(corr, k)) {
    start = *dlt;
  } else {
    start.translation = Vec3(0.0, 0.0, 1.0);
  }

  auto objective = [&](const Pose& p, Mat6* h, Vec6* g) {
    return accumulate_2d(corr, k, p, 1.0, h, g);
  };
  const GaussNewtonResult gn = gauss_newton(start, objective, options);
  SolveReport report;
  report.mode = SolveMode::k2d3d;
  report.pose = gn.pose;
  report.iterations = gn.iterations;
  report.converged = gn.converged;
  report.objective_trace = gn.trace;
  report.inlier_count = corr.size();
  report.rmse = rmse_2d(corr, k, gn.pose);
  return report;
}

SolveReport ransac(const CorrSet& corr, SolveMode mode, const RansacOptions& options,
                   const Intrinsics* k) {
  corr.validate();
  if (mode == SolveMode::kFused) {
    throw Error(ErrorCode::kInvalidArgument, "ransac runs in 3d3d or 2d3d mode");
  }
  const bool is3d = mode == SolveMode::k3d3d;
  if (is3d && !corr.cam_pts) throw Error(ErrorCode::kPrecondition, "3d3d ransac needs camera points");
  if (!is3d && (!corr.img_pts || k == nullptr)) {
    throw Error(ErrorCode::kPrecondition, "2d3d ransac needs image points and intrinsics");
  }
  const std::size_t minimal = is3d ? 3 : 6;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (corr.weights[i] > 0.0) usable.push_back(i);
  }
  if (usable.size() < minimal) {
    degenerate("need at least " + std::to_string(minimal) + " weighted correspondences");
  }

  auto residual = [&](const Pose& pose, std::size_t i) {
    if (is3d) return (pose.apply(corr.obj_pts[i]) - (*corr.cam_pts)[i]).norm();
    const Vec3 pc = pose.apply(corr.obj_pts[i]);
    if (!(pc.z() > kNearPlane)) return kInf;
    const Vec2 proj(k->fx * pc.x() / pc.z() + k->cx, k->fy * pc.y() / pc.z() + k->cy);
    return (proj - (*corr.img_pts)[i]).norm();
  };

  std::mt19937_64 rng(options.seed);
  std::size_t best_inliers = 0;
  double best_rmse = kInf;
  std::optional<Pose> best_pose;
  std::vector<std::size_t> sample(minimal);
  for (int it = 0; it < options.max_iters; ++it) {
    // Partial Fisher-Yates over the usable indices.
    std::vector<std::size_t> pool = usable;
    for (std::size_t s = 0; s < minimal; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, pool.size() - 1);
      std::swap(pool[s], pool[pick(rng)]);
      sample[s] = pool[s];
    }
    const CorrSet minimal_set = corr.subset(sample);
    Pose hypothesis;
    try {
      if (is3d) {
        hypothesis = solve_3d3d(minimal_set).pose;
      } else {
        auto dlt = dlt_pose(minimal_set, *k);
        if (!dlt) continue;
        GaussNewtonOptions quick;
        quick.max_iterations = 10;
        hypothesis = solve_2d3d(minimal_set, *k, *dlt, quick).pose;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateConfiguration) continue;
      throw;
    }
    std::size_t inliers = 0;
    double sq = 0.0;
    for (std::size_t i : usable) {
      const double r = residual(hypothesis, i);
      if (r < options.inlier_tol) {
        ++inliers;
        sq += r * r;
      }
    }
    const double rmse = inliers > 0 ? std::sqrt(sq / inliers) : kInf;
    if (inliers > best_inliers || (inliers == best_inliers && inliers > 0 && rmse < best_rmse)) {
      best_inliers = inliers;
      best_rmse = rmse;
      best_pose = hypothesis;
    }
  }
  if (!best_pose || best_inliers < minimal ||
      static_cast<double>(best_inliers) < 0.1 * static_cast<double>(usable.size())) {
    throw Error(ErrorCode::kNoConsensus, "best hypothesis has " + std::to_string(best_inliers) +
                                             " of " + std::to_string(usable.size()) + " inliers");
  }

  std::vector<std::size_t> consensus;
  for (std::size_t i : usable) {
    if (residual(*best_pose, i) < options.inlier_tol) consensus.push_back(i);
  }
  const CorrSet refit_set = corr.subset(consensus);
  SolveReport report;
  try {
    report = is3d ? solve_3d3d(refit_set) : solve_2d3d(refit_set, *k, *best_pose);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
    report.pose = *best_pose;
    report.rmse = best_rmse;
  }
  report.mode = mode;
  report.inlier_count = consensus.size();
  return report;
}

SolveReport solve_fused(const CorrSet& corr, const Intrinsics& k, const FusedOptions& options) {
  corr.validate();
  if (!corr.cam_pts || !corr.img_pts) {
    throw Error(ErrorCode::kPrecondition, "fused solving needs camera and image points");
  }
  if (!(options.sigma_m > 0.0) || !(options.sigma_px > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fused sigmas must be positive");
  }
  const SolveReport init = ransac(corr, SolveMode::k3d3d, options.init_ransac);
  std::vector<std::size_t> consensus;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (corr.weights[i] > 0.0 &&
        (init.pose.apply(corr.obj_pts[i]) - (*corr.cam_pts)[i]).norm() < options.init_ransac.inlier_tol) {
      consensus.push_back(i);
    }
  }
  const CorrSet set = corr.subset(consensus);
  if (positive_weights(set) < 6) degenerate("fused solving needs at least 6 consensus points");
  const double ws = weight_sum(set);

  double sigma_m = options.sigma_m;
  double sigma_px = options.sigma_px;
  Pose pose = init.pose;
  GaussNewtonResult gn;
  int total_iterations = 0;
  const int rounds = options.adaptive_balance ? 10 : 1;
  for (int round = 0; round < rounds; ++round) {
    auto objective = [&](const Pose& p, Mat6* h, Vec6* g) {
      const double f2 = accumulate_2d(set, k, p, sigma_px, h, g);
      if (!std::isfinite(f2)) return f2;
      return f2 + accumulate_3d(set, p, sigma_m, h, g);
    };
    gn = gauss_newton(pose, objective, options.gauss_newton);
    pose = gn.pose;
    total_iterations += gn.iterations;
    if (!options.adaptive_balance) break;
    const double new_m = std::max(1e-7, std::sqrt(accumulate_3d(set, pose, 1.0, nullptr, nullptr) / (3.0 * ws)));
    const double new_px =
        std::max(1e-5, std::sqrt(accumulate_2d(set, k, pose, 1.0, nullptr, nullptr) / (2.0 * ws)));
    const bool settled = std::abs(new_m / sigma_m - 1.0) < 0.01 && std::abs(new_px / sigma_px - 1.0) < 0.01;
    sigma_m = new_m;
    sigma_px = new_px;
    if (settled) break;
  }

  SolveReport report;
  report.mode = SolveMode::kFused;
  report.pose = pose;
  report.inlier_count = consensus.size();
  report.iterations = total_iterations;
  report.converged = gn.converged;
  report.objective_trace = gn.trace;
  report.rmse = std::sqrt(gn.trace.back() / ws);
  return report;
}

PoseError pose_error(const Pose& pred, const Pose& gt) {
  // atan2 of the sine and cosine parts equals arccos((tr - 1) / 2) for proper
  // rotations and keeps precision near zero and 180 degrees.
  const Mat3 d = pred.rotation.transpose() * gt.rotation;
  const double c = std::clamp((d.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  const double s = 0.5 * axis.norm();
  const double angle = std::atan2(s, c);
  return {angle * 180.0 / std::numbers::pi, (pred.translation - gt.translation).norm()};
}

double pose_loss_term(const PoseError& error) {
  return error.rot_deg * std::numbers::pi / 180.0 + error.trans_m;
}

}  // namespace anchorpose
