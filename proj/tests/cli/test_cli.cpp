#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "anchorpose/io.hpp"

namespace fs = std::filesystem;
using anchorpose::read_text;
using anchorpose::write_text;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "anchorpose_test_cli";

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args) {
  static int counter = 0;
  const fs::path so = kRoot / ("stdout_" + std::to_string(counter) + ".txt");
  const fs::path se = kRoot / ("stderr_" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string("'") + ANCHORPOSE_CLI + "' " + args + " > '" + so.string() +
                          "' 2> '" + se.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_text(so);
  r.err = read_text(se);
  return r;
}

std::string p(const fs::path& path) { return "'" + path.string() + "'"; }

// Runs the whole chain into `dir` and returns nothing; every step must succeed.
void pipeline(const fs::path& dir, int jobs) {
  const std::string g = "--seed 7 --jobs " + std::to_string(jobs) + " ";
  REQUIRE(run(g + "--out " + p(dir / "scenes") +
              " gen --shape blob --scenes 4 --points 4000 --occlusion 1.0,0.7")
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "anchors.json") + " anchors --model " +
              p(dir / "scenes" / "model.json") + " --k 16")
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "gt") + " encode --scenes " + p(dir / "scenes") +
              " --anchors " + p(dir / "anchors.json"))
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "noisy") + " corrupt --maps " + p(dir / "gt") +
              " --anchors " + p(dir / "anchors.json") + " --depth-sigma 0.002")
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "solve") + " solve --maps " + p(dir / "noisy") +
              " --anchors " + p(dir / "anchors.json") + " --mode fused --gt-maps " + p(dir / "gt"))
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "eval") + " eval --pred " + p(dir / "solve" / "solve.json") +
              " --scenes " + p(dir / "scenes"))
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "ab") + " ablate-anchors --scenes " + p(dir / "scenes") +
              " --ks 4,16")
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "ab") + " ablate-corr --scenes " + p(dir / "scenes") +
              " --k 16")
              .status == 0);
  REQUIRE(run(g + "--out " + p(dir / "ab") + " ablate-k --scenes " + p(dir / "scenes") +
              " --k 16")
              .status == 0);
}

const char* kOutputs[] = {
    "scenes/manifest.json",      "scenes/model.json",     "scenes/scenes/scene_0001/scene.json",
    "scenes/scenes/scene_0001/depth.pfm", "anchors.json",        "gt/manifest.json",
    "gt/scene_0000/residual.pfm", "noisy/scene_0002/cam_xyz.pfm",
    "solve/poses.csv",           "solve/solve.json",      "solve/losses.csv",
    "eval/eval.csv",             "eval/eval_scenes.csv",  "eval/eval.json",
    "ab/ablate_anchors.csv",     "ab/ablate_corr.csv",    "ab/ablate_k.csv",
};

}  // namespace

TEST_CASE("every subcommand is byte-identical on rerun and across thread counts") {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);
  pipeline(kRoot / "a", 1);
  pipeline(kRoot / "b", 1);
  pipeline(kRoot / "c", 4);
  for (const char* rel : kOutputs) {
    CAPTURE(rel);
    const std::string a = read_text(kRoot / "a" / rel);
    CHECK(!a.empty());
    CHECK(a == read_text(kRoot / "b" / rel));
    CHECK(a == read_text(kRoot / "c" / rel));
  }
  const std::string header = read_text(kRoot / "a" / "ab" / "ablate_anchors.csv");
  CHECK(header.rfind("K,covering_radius,add01d_pct,auc,deg10cm10_pct\n1,", 0) == 0);
  CHECK(read_text(kRoot / "a" / "ab" / "ablate_corr.csv").find("\n2d3d,") != std::string::npos);
  CHECK(read_text(kRoot / "a" / "solve" / "losses.csv")
            .rfind("scene_id,loss_mask,loss_coarse,loss_fine,loss_total\n", 0) == 0);
}

TEST_CASE("a different seed changes the scenes") {
  const fs::path dir = kRoot / "seed";
  REQUIRE(run("--seed 8 --out " + p(dir) + " gen --scenes 2 --points 4000").status == 0);
  REQUIRE(fs::exists(kRoot / "a"));
  CHECK(read_text(dir / "scenes" / "scene_0000" / "depth.pfm") !=
        read_text(kRoot / "a" / "scenes" / "scenes" / "scene_0000" / "depth.pfm"));
}

TEST_CASE("ground-truth poses evaluate to a perfect table") {
  const fs::path scenes = kRoot / "a" / "scenes";
  nlohmann::json preds = nlohmann::json::array();
  const auto manifest = nlohmann::json::parse(read_text(scenes / "manifest.json"));
  for (const auto& s : manifest.at("scenes")) {
    const auto scene =
        nlohmann::json::parse(read_text(scenes / s.at("dir").get<std::string>() / "scene.json"));
    preds.push_back({{"scene_id", scene.at("scene_id")}, {"pose", scene.at("pose")}});
  }
  write_text(kRoot / "gt_preds.json", preds.dump());
  const Run r = run("--seed 1 --out " + p(kRoot / "perfect") + " eval --pred " +
                    p(kRoot / "gt_preds.json") + " --scenes " + p(scenes));
  REQUIRE(r.status == 0);
  const std::string csv = read_text(kRoot / "perfect" / "eval.csv");
  CHECK(csv.find("\nblob,1,1,100,100\n") != std::string::npos);
  CHECK(csv.find("\navg,1,1,100,100\n") != std::string::npos);
  CHECK(r.out.find("Avg (1)") != std::string::npos);

  // A renamed id is a mismatch, not a silent skip.
  preds[0]["scene_id"] = "scene_9999";
  write_text(kRoot / "bad_preds.json", preds.dump());
  const Run bad = run("--seed 1 --out " + p(kRoot / "bad") + " eval --pred " +
                      p(kRoot / "bad_preds.json") + " --scenes " + p(scenes));
  CHECK(bad.status == 5);
  CHECK(bad.err.find("IdMismatch") != std::string::npos);

  preds[0]["scene_id"] = preds[1]["scene_id"];
  write_text(kRoot / "dup_preds.json", preds.dump());
  CHECK(run("--seed 1 --out " + p(kRoot / "bad") + " eval --pred " + p(kRoot / "dup_preds.json") +
            " --scenes " + p(scenes))
            .status == 5);
}

TEST_CASE("error exits") {
  // A regular file in the way of the output directory.
  write_text(kRoot / "blocker", "x");
  const Run io = run("--seed 1 --out " + p(kRoot / "blocker" / "sub") + " gen --scenes 1");
  CHECK(io.status == 3);
  CHECK(io.err.find((kRoot / "blocker").string()) != std::string::npos);

  CHECK(run("gen --scenes 1").status == 2);
  CHECK(run("--seed 1 --out " + p(kRoot / "x") + " frobnicate").status == 2);
  CHECK(run("--seed 1 --out " + p(kRoot / "x") + " gen --shape torus --scenes 1").status == 2);
  CHECK(run("--seed 1 --out " + p(kRoot / "x") + " anchors --model " + p(kRoot / "none.ply"))
            .status == 3);
  CHECK(run("--seed 1 --out " + p(kRoot / "x.json") + " anchors --model " +
            p(kRoot / "a" / "scenes" / "model.json") + " --k 100000")
            .status != 0);
  CHECK(run("--seed 1 --out " + p(kRoot / "x") + " solve --maps " + p(kRoot / "a" / "scenes") +
            " --anchors " + p(kRoot / "a" / "anchors.json"))
            .status == 4);
}
