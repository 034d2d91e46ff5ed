#include "anchorpose/codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "anchorpose/error.hpp"

namespace anchorpose {

std::vector<double> RegionLabel::one_hot() const {
  std::vector<double> v(num_classes, 0.0);
  v.at(index) = 1.0;
  return v;
}

double covering_radius(const std::vector<Vec3>& points, const std::vector<Vec3>& anchors) {
  double radius = 0.0;
  for (const Vec3& p : points) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const double d = (p - anchors[k]).squaredNorm();
      if (d < best) {
        best = d;
        best_index = k;
      }
    }
    // Same arithmetic as encode's residual, so the bound holds bit-for-bit.
    radius = std::max(radius, (p - anchors[best_index]).norm());
  }
  return radius;
}

AnchorSet build_anchor_set(const ObjectModel& model, std::size_t k) {
  AnchorSet set;
  set.object_id = model.id();
  set.anchors = fps(model, k);
  set.covering_radius = covering_radius(model.points(), set.anchors);
  return set;
}

std::size_t nearest_anchor(const Vec3& point, const AnchorSet& anchors) {
  if (anchors.anchors.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "anchor set is empty");
  }
  std::size_t best_index = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < anchors.anchors.size(); ++k) {
    const double d = (point - anchors.anchors[k]).squaredNorm();
    if (d < best) {
      best = d;
      best_index = k;
    }
  }
  return best_index;
}

ResidualCode encode(const Vec3& point, const AnchorSet& anchors) {
  const std::size_t k = nearest_anchor(point, anchors);
  return {k, point - anchors.anchors[k]};
}

Vec3 decode(const ResidualCode& code, const AnchorSet& anchors) {
  if (code.anchor_index >= anchors.anchors.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "anchor index " + std::to_string(code.anchor_index) + " outside [0, " +
                    std::to_string(anchors.anchors.size()) + ")");
  }
  return anchors.anchors[code.anchor_index] + code.residual;
}

RegionLabel region_label(const Vec3& point, const AnchorSet& anchors) {
  return {nearest_anchor(point, anchors), anchors.size() + 1};
}

RegionLabel background_label(const AnchorSet& anchors) {
  return {anchors.background_index(), anchors.size() + 1};
}

nlohmann::json anchor_set_to_json(const AnchorSet& anchors) {
  nlohmann::ordered_json j;
  j["object_id"] = anchors.object_id;
  auto arr = nlohmann::ordered_json::array();
  for (const Vec3& a : anchors.anchors) arr.push_back({a.x(), a.y(), a.z()});
  j["anchors"] = arr;
  if (std::isfinite(anchors.covering_radius)) j["covering_radius"] = anchors.covering_radius;
  return j;
}

AnchorSet anchor_set_from_json(const nlohmann::json& j) {
  try {
    AnchorSet set;
    set.object_id = j.at("object_id").get<std::string>();
    for (const auto& a : j.at("anchors")) {
      if (a.size() != 3) throw Error(ErrorCode::kParseError, "anchor must have 3 coordinates");
      set.anchors.emplace_back(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    }
    if (set.anchors.empty()) throw Error(ErrorCode::kParseError, "anchor set is empty");
    if (j.contains("covering_radius")) set.covering_radius = j["covering_radius"].get<double>();
    return set;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("anchor set JSON: ") + ex.what());
  }
}

void save_anchor_set(const std::filesystem::path& path, const AnchorSet& anchors) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << anchor_set_to_json(anchors).dump(2) << "\n";
}

AnchorSet load_anchor_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + ex.what());
  }
  return anchor_set_from_json(j);
}

}  // namespace anchorpose
