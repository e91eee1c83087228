#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "monstereo/scene.hpp"

using namespace monstereo;
using Catch::Approx;

namespace {
const StereoRig kRig{};

SceneConfig noise_free_config() {
  SceneConfig cfg;
  cfg.pixel_noise_sigma = 0.0;
  cfg.mono_only_fraction = 0.0;
  cfg.occluded_fraction = 0.0;
  return cfg;
}
}  // namespace

TEST_CASE("noise-free pairs have constant disparity baseline*focal/z",
          "[scene]") {
  SceneConfig cfg = noise_free_config();
  cfg.people_min = cfg.people_max = 3;
  FrameAnnotation frame = generate_scene(cfg, kRig, 7);
  REQUIRE(frame.instances.size() == 3);
  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    const auto& inst = frame.instances[i];
    REQUIRE(frame.left_keypoints[i].has_value());
    REQUIRE(frame.right_keypoints[i].has_value());
    const auto& l = *frame.left_keypoints[i];
    const auto& r = *frame.right_keypoints[i];
    const double expected = kRig.baseline_m * kRig.focal_px / inst.center3d.z;
    for (int j = 0; j < kNumJoints; ++j) {
      if (!l.visible[j] || !r.visible[j]) continue;
      REQUIRE(l.x[j] - r.x[j] == Approx(expected).epsilon(1e-10));
      // rectified rig: identical rows in both eyes
      REQUIRE(l.y[j] == Approx(r.y[j]).margin(1e-12));
    }
  }
}

TEST_CASE("mono_only_fraction = 1 removes every right view", "[scene]") {
  SceneConfig cfg = noise_free_config();
  cfg.mono_only_fraction = 1.0;
  cfg.people_min = cfg.people_max = 4;
  FrameAnnotation frame = generate_scene(cfg, kRig, 3);
  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    REQUIRE_FALSE(frame.instances[i].visible_right);
    REQUIRE_FALSE(frame.right_keypoints[i].has_value());
  }
}

TEST_CASE("a crowded frame yields one keypoint set per person", "[scene]") {
  SceneConfig cfg = noise_free_config();
  cfg.people_min = cfg.people_max = 28;
  cfg.dist_min = 8.0;
  FrameAnnotation frame = generate_scene(cfg, kRig, 11);
  REQUIRE(frame.instances.size() == 28);
  int with_left = 0;
  for (const auto& k : frame.left_keypoints) with_left += k.has_value();
  REQUIRE(with_left == 28);
}

TEST_CASE("generation is pure in (config, seed)", "[scene]") {
  SceneConfig cfg;
  FrameAnnotation a = generate_scene(cfg, kRig, 21, 5);
  FrameAnnotation b = generate_scene(cfg, kRig, 21, 5);
  REQUIRE(a.instances.size() == b.instances.size());
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    REQUIRE(a.instances[i].center3d.x == b.instances[i].center3d.x);
    REQUIRE(a.instances[i].height_m == b.instances[i].height_m);
  }
  FrameAnnotation c = generate_scene(cfg, kRig, 22, 5);
  bool differs = c.instances.size() != a.instances.size();
  if (!differs)
    differs = c.instances[0].center3d.z != a.instances[0].center3d.z;
  REQUIRE(differs);
}

TEST_CASE("prior heights stay within mean +- 6 sigma and legal bounds",
          "[scene]") {
  SceneConfig cfg = noise_free_config();
  cfg.people_min = cfg.people_max = 5;
  for (int f = 0; f < 60; ++f) {
    FrameAnnotation frame = generate_scene(cfg, kRig, 100 + f, f);
    for (const auto& inst : frame.instances) {
      REQUIRE(inst.height_m >= 1.0);
      REQUIRE(inst.height_m <= 2.2);
      REQUIRE(std::abs(inst.height_m - 1.71) <= 6.0 * 0.09);
    }
  }
}

TEST_CASE("uniform height tail covers the 1.2-2.0 range", "[scene]") {
  SceneConfig cfg = noise_free_config();
  cfg.height_tail.kind = HeightTail::Kind::uniform;
  cfg.people_min = cfg.people_max = 6;
  double lo = 3.0, hi = 0.0;
  for (int f = 0; f < 80; ++f) {
    FrameAnnotation frame = generate_scene(cfg, kRig, 500 + f, f);
    for (const auto& inst : frame.instances) {
      REQUIRE(inst.height_m >= 1.2);
      REQUIRE(inst.height_m <= 2.0);
      lo = std::min(lo, inst.height_m);
      hi = std::max(hi, inst.height_m);
    }
  }
  REQUIRE(lo < 1.3);
  REQUIRE(hi > 1.9);
}

TEST_CASE("visible keypoints always lie inside the image", "[scene]") {
  SceneConfig cfg;  // default noise/occlusion active
  for (int f = 0; f < 30; ++f) {
    FrameAnnotation frame = generate_scene(cfg, kRig, 900 + f, f);
    for (const auto& opt : frame.left_keypoints) {
      if (!opt) continue;
      for (int j = 0; j < kNumJoints; ++j) {
        if (!opt->visible[j]) continue;
        REQUIRE(kRig.in_bounds({opt->x[j], opt->y[j]}));
      }
    }
  }
}

TEST_CASE("an unplaceable field of view errors after bounded retries",
          "[scene]") {
  StereoRig tiny;
  tiny.width = 4;
  tiny.height = 4;
  tiny.u0 = 1.0;
  tiny.v0 = 1.0;
  SceneConfig cfg = noise_free_config();
  REQUIRE_THROWS_AS(generate_scene(cfg, tiny, 1), DataError);
}

TEST_CASE("dataset_split honors ratios, determinism and disjointness",
          "[scene]") {
  std::vector<FrameAnnotation> frames(10);
  for (int i = 0; i < 10; ++i) frames[i].frame_id = i;

  auto splits = dataset_split(frames, {0.8, 0.2}, 3);
  REQUIRE(splits.size() == 2);
  REQUIRE(splits[0].size() == 8);
  REQUIRE(splits[1].size() == 2);

  auto again = dataset_split(frames, {0.8, 0.2}, 3);
  for (int s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < splits[s].size(); ++i)
      REQUIRE(splits[s][i].frame_id == again[s][i].frame_id);

  std::set<int> seen;
  for (const auto& split : splits)
    for (const auto& f : split) REQUIRE(seen.insert(f.frame_id).second);
  REQUIRE(seen.size() == 10);

  REQUIRE_THROWS_AS(dataset_split(frames, {0.5, 0.4}, 3), DataError);
  std::vector<FrameAnnotation> one(1);
  REQUIRE_THROWS_AS(dataset_split(one, {0.5, 0.5}, 3), DataError);
}
