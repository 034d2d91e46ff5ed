#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorpose/camera_crop.hpp"
#include "anchorpose/geom.hpp"
#include "anchorpose/grid.hpp"

namespace anchorpose {

// {"R": [9 floats, row-major], "t": [3 floats]}
nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

// {"fx", "fy", "cx", "cy"}
nlohmann::json intrinsics_to_json(const Intrinsics& k);
Intrinsics intrinsics_from_json(const nlohmann::json& j);

// {"su", "sv", "ou", "ov"}
nlohmann::json crop_affine_to_json(const CropAffine& a);
CropAffine crop_affine_from_json(const nlohmann::json& j);

// {"cu", "cv", "su", "sv", "res"}
nlohmann::json roi_to_json(const Roi& roi);
Roi roi_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Portable float map: little-endian (scale -1.0), rows stored bottom-up on
// disk; in memory `data` is row-major top-down with `channels` interleaved.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 ("Pf") or 3 ("PF")
  std::vector<float> data;
};

void write_pfm(const std::filesystem::path& path, const FloatImage& image);
FloatImage read_pfm(const std::filesystem::path& path);

void write_depth_pfm(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_depth_pfm(const std::filesystem::path& path);

// Binary 8-bit PGM (P5); nonzero bytes are written as 255.
void write_mask_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& mask);
Grid<std::uint8_t> read_mask_pgm(const std::filesystem::path& path);

}  // namespace anchorpose
