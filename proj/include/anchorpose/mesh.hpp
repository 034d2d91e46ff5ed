#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "anchorpose/geom.hpp"

namespace anchorpose {

// Object point coordinates are snapped to a 2^-32 m lattice on construction.
// On that lattice differences and sums of model points are exact in double
// precision, which is what makes the residual codec round trip bit-exact.
// The displacement is below 1.2e-10 m.
double snap_to_lattice(double x);

class ObjectModel {
 public:
  // Throws EmptyModel when `points` is empty.
  ObjectModel(std::string id, std::vector<Vec3> points, bool symmetric);

  const std::string& id() const { return id_; }
  const std::vector<Vec3>& points() const { return points_; }
  bool symmetric() const { return symmetric_; }
  double diameter() const { return diameter_; }
  std::size_t size() const { return points_.size(); }

 private:
  std::string id_;
  std::vector<Vec3> points_;
  bool symmetric_ = false;
  double diameter_ = 0.0;
};

struct PlyLoadOptions {
  bool mm_to_m = false;
  std::string id;  // defaults to the file stem
  bool symmetric = false;
};

// Reads vertex x/y/z from an ascii or binary_little_endian PLY.
ObjectModel load_ply(const std::filesystem::path& path, const PlyLoadOptions& options = {});

// Parses PLY bytes already in memory; `origin` only labels error messages.
std::vector<Vec3> parse_ply_vertices(const std::string& bytes, const std::string& origin);

enum class PlyFormat { kAscii, kBinaryLittleEndian };

// Writes vertices only, as float64 properties.
void save_ply(const std::filesystem::path& path, const std::vector<Vec3>& points,
              PlyFormat format = PlyFormat::kBinaryLittleEndian);

// Registry entry: {"id", "path", "symmetric", "mm_to_m"}. Relative paths are
// resolved against the registry file's directory.
struct ModelRegistryEntry {
  std::string id;
  std::filesystem::path path;
  bool symmetric = false;
  bool mm_to_m = false;
};

ModelRegistryEntry read_registry_entry(const std::filesystem::path& json_path);
void write_registry_entry(const std::filesystem::path& json_path, const ModelRegistryEntry& entry);
ObjectModel load_registered_model(const std::filesystem::path& json_path);

// Greedy farthest point sampling. Seeded at the point farthest from the
// centroid; ties go to the lowest index at every step. Throws KTooLarge when
// k exceeds the number of distinct points.
std::vector<Vec3> fps(const ObjectModel& model, std::size_t k);
std::vector<std::size_t> fps_indices(const std::vector<Vec3>& points, std::size_t k);

// Exact maximum pairwise distance. When `subsample_cap` is nonzero and the
// cloud is larger, an evenly strided subset of that size is used instead
// (a lower bound on the true diameter).
double diameter(const std::vector<Vec3>& points, std::size_t subsample_cap = 0);
double diameter(const ObjectModel& model);

std::pair<Vec3, Vec3> bbox(const std::vector<Vec3>& points);
std::pair<Vec3, Vec3> bbox(const ObjectModel& model);

}  // namespace anchorpose
