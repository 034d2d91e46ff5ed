#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "anchorpose/error.hpp"
#include "anchorpose/mesh.hpp"

namespace anchorpose {

namespace {

enum class Scalar { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<Scalar> scalar_from_name(const std::string& name) {
  if (name == "char" || name == "int8") return Scalar::kInt8;
  if (name == "uchar" || name == "uint8") return Scalar::kUint8;
  if (name == "short" || name == "int16") return Scalar::kInt16;
  if (name == "ushort" || name == "uint16") return Scalar::kUint16;
  if (name == "int" || name == "int32") return Scalar::kInt32;
  if (name == "uint" || name == "uint32") return Scalar::kUint32;
  if (name == "float" || name == "float32") return Scalar::kFloat32;
  if (name == "double" || name == "float64") return Scalar::kFloat64;
  return std::nullopt;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::kInt8:
    case Scalar::kUint8: return 1;
    case Scalar::kInt16:
    case Scalar::kUint16: return 2;
    case Scalar::kInt32:
    case Scalar::kUint32:
    case Scalar::kFloat32: return 4;
    case Scalar::kFloat64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::kFloat32;
  bool is_list = false;
  Scalar count_type = Scalar::kUint8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

[[noreturn]] void parse_fail(const std::string& origin, std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::kParseError, origin + " at byte " + std::to_string(offset) + ": " + what);
}

// Host is assumed little-endian, which covers every platform this builds on.
double read_binary(const char* p, Scalar s) {
  switch (s) {
    case Scalar::kInt8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case Scalar::kUint8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case Scalar::kInt16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case Scalar::kUint16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case Scalar::kInt32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case Scalar::kUint32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case Scalar::kFloat32: { float v; std::memcpy(&v, p, 4); return v; }
    case Scalar::kFloat64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

class AsciiCursor {
 public:
  AsciiCursor(const std::string& bytes, std::size_t pos, const std::string& origin)
      : bytes_(bytes), pos_(pos), origin_(origin) {}

  double next_number() {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ >= bytes_.size()) parse_fail(origin_, pos_, "unexpected end of vertex data");
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    const std::string token = bytes_.substr(start, pos_ - start);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      parse_fail(origin_, start, "bad number '" + token + "'");
    }
    if (used != token.size()) parse_fail(origin_, start, "bad number '" + token + "'");
    return value;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_;
  const std::string& origin_;
};

}  // namespace

std::vector<Vec3> parse_ply_vertices(const std::string& bytes, const std::string& origin) {
  std::size_t pos = 0;
  auto next_line = [&](std::size_t& line_start) -> std::optional<std::string> {
    if (pos >= bytes.size()) return std::nullopt;
    line_start = pos;
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    return line;
  };

  std::size_t line_start = 0;
  auto magic = next_line(line_start);
  if (!magic || *magic != "ply") parse_fail(origin, 0, "missing 'ply' magic");

  bool ascii = false;
  bool have_format = false;
  std::vector<Element> elements;
  bool header_done = false;
  while (auto line = next_line(line_start)) {
    std::istringstream ls(*line);
    std::string keyword;
    ls >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        ascii = true;
      } else if (fmt == "binary_little_endian") {
        ascii = false;
      } else if (fmt == "binary_big_endian") {
        throw Error(ErrorCode::kUnsupportedPlyVariant, origin + ": binary_big_endian PLY");
      } else {
        parse_fail(origin, line_start, "unknown format '" + fmt + "'");
      }
      have_format = true;
    } else if (keyword == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || count < 0) parse_fail(origin, line_start, "malformed element line");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) parse_fail(origin, line_start, "property before any element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        auto ct = scalar_from_name(count_type);
        auto it = scalar_from_name(item_type);
        if (!ct || !it) parse_fail(origin, line_start, "unknown list property type");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
      } else {
        auto t = scalar_from_name(type);
        if (!t) parse_fail(origin, line_start, "unknown property type '" + type + "'");
        p.type = *t;
        ls >> p.name;
      }
      if (p.name.empty()) parse_fail(origin, line_start, "property without a name");
      elements.back().properties.push_back(p);
    } else if (keyword == "end_header") {
      header_done = true;
      break;
    } else {
      parse_fail(origin, line_start, "unexpected header keyword '" + keyword + "'");
    }
  }
  if (!header_done) parse_fail(origin, pos, "header is not terminated by end_header");
  if (!have_format) parse_fail(origin, pos, "header has no format line");

  std::size_t body = pos;
  std::vector<Vec3> points;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      // Only elements preceding the vertex block need to be stepped over.
      if (ascii) {
        // Ascii elements occupy one line per entry.
        for (std::size_t i = 0; i < e.count; ++i) {
          std::size_t end = bytes.find('\n', body);
          if (end == std::string::npos) parse_fail(origin, body, "truncated element '" + e.name + "'");
          body = end + 1;
        }
      } else {
        for (std::size_t i = 0; i < e.count; ++i) {
          for (const Property& p : e.properties) {
            if (p.is_list) {
              if (body + scalar_size(p.count_type) > bytes.size()) {
                parse_fail(origin, body, "truncated element '" + e.name + "'");
              }
              const auto n = static_cast<std::size_t>(read_binary(bytes.data() + body, p.count_type));
              body += scalar_size(p.count_type) + n * scalar_size(p.type);
            } else {
              body += scalar_size(p.type);
            }
            if (body > bytes.size()) parse_fail(origin, body, "truncated element '" + e.name + "'");
          }
        }
      }
      continue;
    }

    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < e.properties.size(); ++i) {
      const Property& p = e.properties[i];
      int* slot = p.name == "x" ? &ix : p.name == "y" ? &iy : p.name == "z" ? &iz : nullptr;
      if (slot == nullptr) continue;
      if (p.is_list) {
        throw Error(ErrorCode::kUnsupportedPlyVariant, origin + ": list-typed vertex coordinate");
      }
      *slot = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) {
      throw Error(ErrorCode::kUnsupportedPlyVariant, origin + ": vertex lacks x/y/z properties");
    }
    if (e.count == 0) parse_fail(origin, body, "vertex list is empty");

    points.reserve(e.count);
    std::vector<double> values(e.properties.size());
    if (ascii) {
      AsciiCursor cursor(bytes, body, origin);
      for (std::size_t v = 0; v < e.count; ++v) {
        for (std::size_t i = 0; i < e.properties.size(); ++i) {
          const Property& p = e.properties[i];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(cursor.next_number());
            for (std::size_t k = 0; k < n; ++k) cursor.next_number();
          } else {
            values[i] = cursor.next_number();
          }
        }
        points.emplace_back(values[ix], values[iy], values[iz]);
      }
    } else {
      for (std::size_t v = 0; v < e.count; ++v) {
        for (std::size_t i = 0; i < e.properties.size(); ++i) {
          const Property& p = e.properties[i];
          if (p.is_list) {
            if (body + scalar_size(p.count_type) > bytes.size()) {
              parse_fail(origin, body, "truncated vertex data");
            }
            const auto n = static_cast<std::size_t>(read_binary(bytes.data() + body, p.count_type));
            body += scalar_size(p.count_type) + n * scalar_size(p.type);
            continue;
          }
          if (body + scalar_size(p.type) > bytes.size()) parse_fail(origin, body, "truncated vertex data");
          values[i] = read_binary(bytes.data() + body, p.type);
          body += scalar_size(p.type);
        }
        points.emplace_back(values[ix], values[iy], values[iz]);
      }
    }
    return points;
  }
  parse_fail(origin, body, "no vertex element");
}

ObjectModel load_ply(const std::filesystem::path& path, const PlyLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<Vec3> points = parse_ply_vertices(bytes, path.string());
  if (options.mm_to_m) {
    for (Vec3& p : points) p *= 0.001;
  }
  return ObjectModel(options.id.empty() ? path.stem().string() : options.id, std::move(points),
                     options.symmetric);
}

void save_ply(const std::filesystem::path& path, const std::vector<Vec3>& points, PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "ply\n"
      << (format == PlyFormat::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << points.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\nend_header\n";
  if (format == PlyFormat::kAscii) {
    out.precision(17);
    for (const Vec3& p : points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  } else {
    for (const Vec3& p : points) {
      const double xyz[3] = {p.x(), p.y(), p.z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace anchorpose
