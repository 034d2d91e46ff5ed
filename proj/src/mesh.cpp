#include "anchorpose/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anchorpose/error.hpp"

namespace anchorpose {

namespace {

constexpr double kLatticeScale = 4294967296.0;  // 2^32

}  // namespace

double snap_to_lattice(double x) {
  return std::nearbyint(x * kLatticeScale) / kLatticeScale;
}

ObjectModel::ObjectModel(std::string id, std::vector<Vec3> points, bool symmetric)
    : id_(std::move(id)), points_(std::move(points)), symmetric_(symmetric) {
  if (points_.empty()) {
    throw Error(ErrorCode::kEmptyModel, "object model '" + id_ + "' has no points");
  }
  for (Vec3& p : points_) {
    if (!p.allFinite()) {
      throw Error(ErrorCode::kNonFinite, "object model '" + id_ + "' has a non-finite point");
    }
    p = p.unaryExpr([](double v) { return snap_to_lattice(v); });
  }
  diameter_ = anchorpose::diameter(points_);
}

std::vector<std::size_t> fps_indices(const std::vector<Vec3>& points, std::size_t k) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "fps needs k >= 1");
  }
  if (k > points.size()) {
    throw Error(ErrorCode::kKTooLarge, "k=" + std::to_string(k) + " exceeds " +
                                           std::to_string(points.size()) + " points");
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  std::size_t seed = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - centroid).squaredNorm();
    if (d > best) {
      best = d;
      seed = i;
    }
  }

  std::vector<std::size_t> chosen{seed};
  chosen.reserve(k);
  std::vector<double> min_dist(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    min_dist[i] = (points[i] - points[seed]).squaredNorm();
  }
  while (chosen.size() < k) {
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (min_dist[i] > far) {
        far = min_dist[i];
        next = i;
      }
    }
    if (!(far > 0.0)) {
      throw Error(ErrorCode::kKTooLarge, "k=" + std::to_string(k) + " exceeds the " +
                                             std::to_string(chosen.size()) +
                                             " distinct points");
    }
    chosen.push_back(next);
    for (std::size_t i = 0; i < points.size(); ++i) {
      min_dist[i] = std::min(min_dist[i], (points[i] - points[next]).squaredNorm());
    }
  }
  return chosen;
}

std::vector<Vec3> fps(const ObjectModel& model, std::size_t k) {
  std::vector<Vec3> out;
  for (std::size_t i : fps_indices(model.points(), k)) out.push_back(model.points()[i]);
  return out;
}

double diameter(const std::vector<Vec3>& all_points, std::size_t subsample_cap) {
  if (all_points.empty()) {
    throw Error(ErrorCode::kEmptyModel, "diameter of an empty point set");
  }
  std::vector<Vec3> strided;
  const std::vector<Vec3>* pts = &all_points;
  if (subsample_cap > 0 && all_points.size() > subsample_cap) {
    const double step = static_cast<double>(all_points.size()) / subsample_cap;
    for (std::size_t i = 0; i < subsample_cap; ++i) {
      strided.push_back(all_points[static_cast<std::size_t>(i * step)]);
    }
    pts = &strided;
  }
  const std::vector<Vec3>& points = *pts;

  // Pairs are visited by decreasing distance-from-centroid; r_i + r_j bounds
  // their separation, so the scan stops once no remaining pair can win.
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  std::vector<double> radius(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) radius[i] = (points[i] - centroid).norm();
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return radius[a] > radius[b]; });

  double best = 0.0;
  const double slack = 1.0 - 1e-12;
  for (std::size_t a = 0; a < order.size(); ++a) {
    const std::size_t i = order[a];
    if (radius[i] + radius[order[0]] < best * slack) break;
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const std::size_t j = order[b];
      if (radius[i] + radius[j] < best * slack) break;
      best = std::max(best, (points[i] - points[j]).norm());
    }
  }
  return best;
}

double diameter(const ObjectModel& model) { return model.diameter(); }

std::pair<Vec3, Vec3> bbox(const std::vector<Vec3>& points) {
  if (points.empty()) {
    throw Error(ErrorCode::kEmptyModel, "bbox of an empty point set");
  }
  Vec3 lo = points.front();
  Vec3 hi = points.front();
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

std::pair<Vec3, Vec3> bbox(const ObjectModel& model) { return bbox(model.points()); }

ModelRegistryEntry read_registry_entry(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + json_path.string());
  nlohmann::json j;
  try {
    in >> j;
    ModelRegistryEntry e;
    e.id = j.at("id").get<std::string>();
    e.path = j.at("path").get<std::string>();
    e.symmetric = j.value("symmetric", false);
    e.mm_to_m = j.value("mm_to_m", false);
    if (e.path.is_relative()) e.path = json_path.parent_path() / e.path;
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, json_path.string() + ": " + ex.what());
  }
}

void write_registry_entry(const std::filesystem::path& json_path, const ModelRegistryEntry& entry) {
  nlohmann::ordered_json j;
  j["id"] = entry.id;
  j["path"] = entry.path.generic_string();
  j["symmetric"] = entry.symmetric;
  j["mm_to_m"] = entry.mm_to_m;
  std::ofstream out(json_path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + json_path.string());
  out << j.dump(2) << "\n";
}

ObjectModel load_registered_model(const std::filesystem::path& json_path) {
  const ModelRegistryEntry e = read_registry_entry(json_path);
  PlyLoadOptions options;
  options.id = e.id;
  options.symmetric = e.symmetric;
  options.mm_to_m = e.mm_to_m;
  return load_ply(e.path, options);
}

}  // namespace anchorpose
