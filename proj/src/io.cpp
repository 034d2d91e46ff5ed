#include "anchorpose/io.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "anchorpose/error.hpp"

namespace anchorpose {

namespace {

template <typename F>
auto parse_guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string(what) + ": " + ex.what());
  }
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads whitespace-separated header tokens of a netpbm-style file.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::string token() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail(start, "truncated header");
    return bytes_.substr(start, pos_ - start);
  }

  // Consumes the single whitespace byte that terminates the header.
  std::size_t body_start() {
    if (pos_ >= bytes_.size()) fail(pos_, "missing data");
    return pos_ + 1;
  }

  [[noreturn]] void fail(std::size_t offset, const std::string& what) const {
    throw Error(ErrorCode::kParseError,
                path_.string() + " at byte " + std::to_string(offset) + ": " + what);
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json pose_to_json(const Pose& pose) {
  nlohmann::ordered_json j;
  std::vector<double> r;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(pose.rotation(i, k));
  j["R"] = r;
  j["t"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
  return j;
}

Pose pose_from_json(const nlohmann::json& j) {
  return parse_guard("pose", [&] {
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) {
      throw Error(ErrorCode::kParseError, "pose needs 9 rotation and 3 translation entries");
    }
    Pose p;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) p.rotation(i, k) = r[3 * i + k];
    p.translation = Vec3(t[0], t[1], t[2]);
    return p;
  });
}

nlohmann::json intrinsics_to_json(const Intrinsics& k) {
  nlohmann::ordered_json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  return j;
}

Intrinsics intrinsics_from_json(const nlohmann::json& j) {
  return parse_guard("intrinsics", [&] {
    Intrinsics k{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                 j.at("cy").get<double>()};
    if (!(k.fx > 0.0 && k.fy > 0.0)) {
      throw Error(ErrorCode::kParseError, "focal lengths must be positive");
    }
    return k;
  });
}

nlohmann::json crop_affine_to_json(const CropAffine& a) {
  nlohmann::ordered_json j;
  j["su"] = a.scale_u;
  j["sv"] = a.scale_v;
  j["ou"] = a.offset_u;
  j["ov"] = a.offset_v;
  return j;
}

CropAffine crop_affine_from_json(const nlohmann::json& j) {
  return parse_guard("crop affine", [&] {
    return CropAffine{j.at("su").get<double>(), j.at("sv").get<double>(),
                      j.at("ou").get<double>(), j.at("ov").get<double>()};
  });
}

nlohmann::json roi_to_json(const Roi& roi) {
  nlohmann::ordered_json j;
  j["cu"] = roi.center_u;
  j["cv"] = roi.center_v;
  j["su"] = roi.size_u;
  j["sv"] = roi.size_v;
  j["res"] = roi.out_res;
  return j;
}

Roi roi_from_json(const nlohmann::json& j) {
  return parse_guard("roi", [&] {
    Roi roi{j.at("cu").get<double>(), j.at("cv").get<double>(), j.at("su").get<double>(),
            j.at("sv").get<double>(), j.at("res").get<int>()};
    if (!roi.is_valid()) throw Error(ErrorCode::kParseError, "roi sizes must be positive");
    return roi;
  });
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + ex.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path, false);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, true);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) { return slurp(path); }

void write_pfm(const std::filesystem::path& path, const FloatImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "PFM supports 1 or 3 channels");
  }
  auto out = open_out(path, true);
  out << (image.channels == 3 ? "PF" : "Pf") << "\n"
      << image.width << " " << image.height << "\n-1.0\n";
  const std::size_t row_floats = static_cast<std::size_t>(image.width) * image.channels;
  for (int r = image.height - 1; r >= 0; --r) {
    out.write(reinterpret_cast<const char*>(image.data.data() + r * row_floats),
              static_cast<std::streamsize>(row_floats * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

FloatImage read_pfm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  HeaderReader header(bytes, path);
  FloatImage image;
  const std::string magic = header.token();
  if (magic == "Pf") {
    image.channels = 1;
  } else if (magic == "PF") {
    image.channels = 3;
  } else {
    header.fail(0, "not a PFM file");
  }
  try {
    image.width = std::stoi(header.token());
    image.height = std::stoi(header.token());
  } catch (const std::exception&) {
    header.fail(header.pos(), "bad dimensions");
  }
  double scale = 0.0;
  try {
    scale = std::stod(header.token());
  } catch (const std::exception&) {
    header.fail(header.pos(), "bad scale");
  }
  if (!(scale < 0.0)) {
    throw Error(ErrorCode::kParseError, path.string() + ": big-endian PFM is not supported");
  }
  const std::size_t start = header.body_start();
  const std::size_t row_floats = static_cast<std::size_t>(image.width) * image.channels;
  const std::size_t need = row_floats * image.height * sizeof(float);
  if (image.width <= 0 || image.height <= 0 || bytes.size() < start + need) {
    header.fail(start, "truncated pixel data");
  }
  image.data.resize(row_floats * image.height);
  for (int r = 0; r < image.height; ++r) {
    const std::size_t disk_row = static_cast<std::size_t>(image.height - 1 - r);
    std::memcpy(image.data.data() + r * row_floats,
                bytes.data() + start + disk_row * row_floats * sizeof(float),
                row_floats * sizeof(float));
  }
  return image;
}

void write_depth_pfm(const std::filesystem::path& path, const DepthImage& depth) {
  write_pfm(path, FloatImage{depth.width, depth.height, 1, depth.data});
}

DepthImage read_depth_pfm(const std::filesystem::path& path) {
  FloatImage image = read_pfm(path);
  if (image.channels != 1) {
    throw Error(ErrorCode::kParseError, path.string() + ": depth must be single-channel");
  }
  DepthImage depth;
  depth.width = image.width;
  depth.height = image.height;
  depth.data = std::move(image.data);
  for (float d : depth.data) {
    if (!std::isfinite(d) || d < 0.0f) {
      throw Error(ErrorCode::kParseError, path.string() + ": depth must be finite and >= 0");
    }
  }
  return depth;
}

void write_mask_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& mask) {
  auto out = open_out(path, true);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<char> bytes(mask.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? char(255) : char(0);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

Grid<std::uint8_t> read_mask_pgm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  HeaderReader header(bytes, path);
  if (header.token() != "P5") header.fail(0, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(header.token());
    h = std::stoi(header.token());
    maxval = std::stoi(header.token());
  } catch (const std::exception&) {
    header.fail(header.pos(), "bad header values");
  }
  if (maxval <= 0 || maxval > 255) header.fail(header.pos(), "only 8-bit PGM is supported");
  const std::size_t start = header.body_start();
  if (w <= 0 || h <= 0 || bytes.size() < start + static_cast<std::size_t>(w) * h) {
    header.fail(start, "truncated pixel data");
  }
  Grid<std::uint8_t> mask(w, h, 0);
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = bytes[start + i] != 0;
  return mask;
}

}  // namespace anchorpose
