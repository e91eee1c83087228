#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "monstereo/io.hpp"

using namespace monstereo;
using Catch::Approx;

namespace {
std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("rig json round trip", "[io]") {
  StereoRig rig;
  rig.baseline_m = 0.32;
  rig.focal_px = 640.0;
  StereoRig back = rig_from_json(rig_to_json(rig));
  REQUIRE(back.baseline_m == rig.baseline_m);
  REQUIRE(back.focal_px == rig.focal_px);
  REQUIRE(back.width == rig.width);

  json bad = rig_to_json(rig);
  bad.erase("focal_px");
  REQUIRE_THROWS_AS(rig_from_json(bad), DataError);
}

TEST_CASE("frame jsonl round trip preserves every field", "[io]") {
  SceneConfig cfg;
  cfg.people_min = cfg.people_max = 4;
  StereoRig rig;
  std::vector<FrameAnnotation> frames;
  for (int f = 0; f < 5; ++f) frames.push_back(generate_scene(cfg, rig, f, f));

  std::string path = tmp_path("frames_roundtrip.jsonl");
  write_frames_jsonl(path, frames);
  auto back = read_frames_jsonl(path);
  REQUIRE(back.size() == frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    REQUIRE(back[f].frame_id == frames[f].frame_id);
    REQUIRE(back[f].instances.size() == frames[f].instances.size());
    for (std::size_t i = 0; i < frames[f].instances.size(); ++i) {
      const auto& a = frames[f].instances[i];
      const auto& b = back[f].instances[i];
      REQUIRE(a.center3d.z == b.center3d.z);
      REQUIRE(a.height_m == b.height_m);
      REQUIRE(a.visible_left == b.visible_left);
      REQUIRE(a.visible_right == b.visible_right);
      REQUIRE(frames[f].left_keypoints[i].has_value() ==
              back[f].left_keypoints[i].has_value());
      if (frames[f].left_keypoints[i]) {
        for (int j = 0; j < kNumJoints; ++j) {
          REQUIRE(frames[f].left_keypoints[i]->x[j] ==
                  back[f].left_keypoints[i]->x[j]);
          REQUIRE(frames[f].left_keypoints[i]->visible[j] ==
                  back[f].left_keypoints[i]->visible[j]);
        }
      }
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("pair jsonl round trip preserves features bit-exactly", "[io]") {
  SceneConfig cfg;
  cfg.people_min = cfg.people_max = 3;
  StereoRig rig;
  std::vector<PairSample> pairs;
  for (int f = 0; f < 4; ++f) {
    auto fp = pairs_from_frame(generate_scene(cfg, rig, 40 + f, f), rig);
    pairs.insert(pairs.end(), fp.begin(), fp.end());
  }
  REQUIRE_FALSE(pairs.empty());

  std::string path = tmp_path("pairs_roundtrip.jsonl");
  write_pairs_jsonl(path, pairs);
  auto back = read_pairs_jsonl(path);
  REQUIRE(back.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (int k = 0; k < feat::kSize; ++k)
      REQUIRE(back[i].features[k] == pairs[i].features[k]);
    REQUIRE(back[i].ism_label == pairs[i].ism_label);
    REQUIRE(back[i].gt->r == pairs[i].gt->r);
    REQUIRE(back[i].left_person_id == pairs[i].left_person_id);
    REQUIRE(back[i].is_null_pair == pairs[i].is_null_pair);
  }
  std::remove(path.c_str());
}

TEST_CASE("jsonl errors carry the line number", "[io]") {
  std::string path = tmp_path("broken.jsonl");
  {
    std::ofstream out(path);
    out << R"({"frame_id":0,"instances":[]})" << "\n";
    out << "{not json}\n";
  }
  try {
    read_frames_jsonl(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint round trip reproduces eval outputs bit-exactly",
          "[io]") {
  NetworkSpec spec;
  spec.hidden = 24;
  spec.num_blocks = 1;
  Network net(spec, 9);
  // move the running statistics off their defaults
  Rng rng(10);
  Matrix x(16, 68);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = rng.uniform(-1, 1);
  net.forward_train(x);

  std::string path = tmp_path("ckpt_roundtrip.json");
  save_checkpoint(path, net, "cfg123");
  Network back = load_checkpoint(path);
  REQUIRE(back.spec().hidden == 24);

  Matrix a = net.predict(x);
  Matrix b = back.predict(x);
  REQUIRE((a - b).cwiseAbs().maxCoeff() == 0.0);

  json j = load_json_file(path);
  REQUIRE(j.at("config_hash") == "cfg123");
  std::remove(path.c_str());
}
