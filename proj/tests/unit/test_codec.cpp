#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "../support.hpp"
#include "anchorpose/codec.hpp"
#include "anchorpose/error.hpp"
#include "anchorpose/synth.hpp"

using namespace anchorpose;
using namespace testsupport;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an anchorpose::Error");
  return ErrorCode::kInvalidArgument;
}

ObjectModel unit_cube() { return ObjectModel("cube", cube_corners(), true); }

std::size_t brute_nearest(const Vec3& p, const std::vector<Vec3>& anchors) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < anchors.size(); ++k) {
    if ((p - anchors[k]).norm() < (p - anchors[best]).norm()) best = k;
  }
  return best;
}

}  // namespace

TEST_CASE("anchor set on cube corners") {
  const ObjectModel cube = unit_cube();
  CHECK(build_anchor_set(cube, 8).covering_radius == 0.0);
  const AnchorSet one = build_anchor_set(cube, 1);
  double brute = 0.0;
  for (const auto& p : cube.points()) brute = std::max(brute, (p - one.anchors[0]).norm());
  CHECK(one.covering_radius == brute);
  CHECK(std::abs(one.covering_radius - std::sqrt(3.0)) < 1e-15);
  CHECK(kDefaultAnchorCount == 32);
  CHECK(one.object_id == "cube");
}

TEST_CASE("encode examples") {
  const ObjectModel cube = unit_cube();
  const AnchorSet set = build_anchor_set(cube, 8);
  for (std::size_t j = 0; j < set.size(); ++j) {
    const ResidualCode c = encode(set.anchors[j], set);
    CHECK(c.anchor_index == j);
    CHECK(c.residual == Vec3::Zero());
    CHECK(decode({j, Vec3::Zero()}, set) == set.anchors[j]);
  }
  const ResidualCode c = encode(Vec3(0.1, 0, 0), set);
  CHECK(set.anchors[c.anchor_index] == Vec3(0, 0, 0));
  CHECK(c.residual == Vec3(0.1, 0, 0));

  AnchorSet tie;
  tie.object_id = "t";
  tie.anchors = {Vec3(5, 5, 5), Vec3(6, 6, 6), Vec3(1, 0, 0), Vec3(7, 7, 7), Vec3(8, 8, 8),
                 Vec3(-1, 0, 0)};
  CHECK(encode(Vec3(0, 0, 0), tie).anchor_index == 2);

  CHECK(code_of([&] { decode({set.size(), Vec3::Zero()}, set); }) ==
        ErrorCode::kIndexOutOfRange);
  CHECK(code_of([&] { decode({set.background_index() + 3, Vec3::Zero()}, set); }) ==
        ErrorCode::kIndexOutOfRange);
}

TEST_CASE("region labels") {
  const ObjectModel m = make_model(Shape::kBlob, 2000, 0.1, 3);
  const AnchorSet set = build_anchor_set(m, 32);
  const RegionLabel bg = background_label(set);
  const auto hot = bg.one_hot();
  REQUIRE(hot.size() == 33);
  CHECK(hot[32] == 1.0);
  CHECK(std::accumulate(hot.begin(), hot.end(), 0.0) == 1.0);

  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto v = region_label(set.anchors[j], set).one_hot();
    CHECK(v[j] == 1.0);
    CHECK(std::accumulate(v.begin(), v.end(), 0.0) == 1.0);
  }

  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3& p = m.points()[pick(rng)];
    const std::size_t idx = region_label(p, set).index;
    CHECK(idx == encode(p, set).anchor_index);
    CHECK(idx == brute_nearest(p, set.anchors));
  }
}

TEST_CASE("exact round trip, boundedness and partition on every shape") {
  for (Shape s : {Shape::kCube, Shape::kCylinder, Shape::kIcosphere, Shape::kBlob}) {
    const ObjectModel m = make_model(s, 3000, 0.1, 5);
    CAPTURE(shape_name(s));
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t k : {4, 16, 32}) {
      const AnchorSet set = build_anchor_set(m, k);
      CHECK(set.covering_radius <= last);
      last = set.covering_radius;
      std::vector<std::size_t> counts(k, 0);
      for (const auto& p : m.points()) {
        const ResidualCode c = encode(p, set);
        const Vec3 back = decode(c, set);
        CHECK(back.x() == p.x());
        CHECK(back.y() == p.y());
        CHECK(back.z() == p.z());
        CHECK(c.residual.norm() <= set.covering_radius);
        ++counts[c.anchor_index];
      }
      CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == m.size());
      // Each anchor at least owns itself.
      for (auto n : counts) CHECK(n >= 1);
    }
  }
}

TEST_CASE("anchor set json") {
  const ObjectModel m = make_model(Shape::kIcosphere, 500, 0.1, 0, "ico");
  const AnchorSet set = build_anchor_set(m, 8);
  const AnchorSet back = anchor_set_from_json(anchor_set_to_json(set));
  CHECK(back.object_id == "ico");
  REQUIRE(back.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(back.anchors[i] == set.anchors[i]);
  CHECK(back.covering_radius == set.covering_radius);

  const auto dir = std::filesystem::temp_directory_path() / "anchorpose_test_codec";
  std::filesystem::create_directories(dir);
  save_anchor_set(dir / "a.json", set);
  CHECK(load_anchor_set(dir / "a.json").anchors == set.anchors);

  nlohmann::json bare = {{"object_id", "x"}, {"anchors", {{0.0, 0.0, 1.0}}}};
  CHECK(std::isinf(anchor_set_from_json(bare).covering_radius));
  CHECK(code_of([] { anchor_set_from_json(nlohmann::json{{"object_id", "x"}}); }) ==
        ErrorCode::kParseError);
  CHECK(code_of([] {
          anchor_set_from_json(nlohmann::json{{"object_id", "x"}, {"anchors", {{1.0, 2.0}}}});
        }) == ErrorCode::kParseError);
}
