#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorpose/geom.hpp"
#include "anchorpose/mesh.hpp"

namespace anchorpose {

inline constexpr std::size_t kDefaultAnchorCount = 32;

// FPS anchors of one object plus the covering radius: the largest distance
// from any model point to its nearest anchor, which bounds every residual.
struct AnchorSet {
  std::string object_id;
  std::vector<Vec3> anchors;
  // Infinity when loaded from JSON that did not record it.
  double covering_radius = std::numeric_limits<double>::infinity();

  std::size_t size() const { return anchors.size(); }
  // Index reserved for background in region labels.
  std::size_t background_index() const { return anchors.size(); }
};

struct ResidualCode {
  std::size_t anchor_index = 0;
  Vec3 residual = Vec3::Zero();
};

// One-hot target over K anchors plus background at index K.
struct RegionLabel {
  std::size_t index = 0;
  std::size_t num_classes = 1;

  std::vector<double> one_hot() const;
};

AnchorSet build_anchor_set(const ObjectModel& model, std::size_t k = kDefaultAnchorCount);

// Max over `points` of distance to the nearest anchor.
double covering_radius(const std::vector<Vec3>& points, const std::vector<Vec3>& anchors);

// Nearest anchor by squared distance, lowest index on ties.
std::size_t nearest_anchor(const Vec3& point, const AnchorSet& anchors);

ResidualCode encode(const Vec3& point, const AnchorSet& anchors);

// Throws IndexOutOfRange for indices >= K (including background).
Vec3 decode(const ResidualCode& code, const AnchorSet& anchors);

RegionLabel region_label(const Vec3& point, const AnchorSet& anchors);
RegionLabel background_label(const AnchorSet& anchors);

nlohmann::json anchor_set_to_json(const AnchorSet& anchors);
AnchorSet anchor_set_from_json(const nlohmann::json& j);
void save_anchor_set(const std::filesystem::path& path, const AnchorSet& anchors);
AnchorSet load_anchor_set(const std::filesystem::path& path);

}  // namespace anchorpose
