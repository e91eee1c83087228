#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "monstereo/pairs.hpp"

using namespace monstereo;
using Catch::Approx;

namespace {
const StereoRig kRig{};

SceneConfig clean_config(int people) {
  SceneConfig cfg;
  cfg.pixel_noise_sigma = 0.0;
  cfg.mono_only_fraction = 0.0;
  cfg.occluded_fraction = 0.0;
  cfg.people_min = cfg.people_max = people;
  return cfg;
}

KeypointSet person_keypoints(const Point3& center, double height, Eye eye,
                             const StereoRig& rig) {
  const PersonTemplate& tmpl = PersonTemplate::standing();
  KeypointSet kps;
  kps.eye = eye;
  for (int j = 0; j < kNumJoints; ++j) {
    Point3 p{center.x + tmpl.dx[j] * height,
             center.y + (tmpl.dy[j] - tmpl.mid_hip_dy()) * height, center.z};
    Pixel px = project(p, rig, eye);
    kps.set(j, px.u, px.v);
  }
  return kps;
}
}  // namespace

TEST_CASE("build_pairs enumerates all-vs-all, left index major", "[pairs]") {
  FrameAnnotation f = generate_scene(clean_config(3), kRig, 1);
  std::vector<KeypointSet> left, right;
  for (std::size_t i = 0; i < 3; ++i)
    left.push_back(normalize_keypoints(*f.left_keypoints[i], kRig));
  for (std::size_t i = 0; i < 2; ++i)
    right.push_back(normalize_keypoints(*f.right_keypoints[i], kRig));

  auto pairs = build_pairs(left, right);
  REQUIRE(pairs.size() == 6);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    REQUIRE(pairs[k].left_index == static_cast<int>(k / 2));
    REQUIRE(pairs[k].right_index == static_cast<int>(k % 2));
  }
  REQUIRE(build_pairs({}, right).empty());
}

TEST_CASE("identical keypoint sets produce an all-zero delta half",
          "[pairs]") {
  KeypointSet k =
      person_keypoints({0.3, 0.0, 12.0}, 1.71, Eye::left, kRig);
  auto pairs = build_pairs({normalize_keypoints(k, kRig)},
                           {normalize_keypoints(k, kRig)});
  REQUIRE(pairs.size() == 1);
  for (int j = 0; j < kNumJoints; ++j) {
    REQUIRE(pairs[0].features[feat::kDeltaX + j] == 0.0);
    REQUIRE(pairs[0].features[feat::kDeltaY + j] == 0.0);
  }
}

TEST_CASE("no right detections yields one null pair per left instance",
          "[pairs]") {
  KeypointSet k = person_keypoints({0, 0, 9}, 1.7, Eye::left, kRig);
  auto pairs = build_pairs({normalize_keypoints(k, kRig)}, {});
  REQUIRE(pairs.size() == 1);
  REQUIRE(pairs[0].is_null_pair);
  REQUIRE(pairs[0].right_index == -1);
  for (int j = 0; j < kNumJoints; ++j) {
    REQUIRE(pairs[0].features[feat::kDeltaX + j] == 0.0);
    REQUIRE(pairs[0].features[feat::kDeltaY + j] == 0.0);
  }
  // the left half is intact
  REQUIRE(pairs[0].features[feat::kLeftY + 0] != 0.0);
}

TEST_CASE("labels: identity match, mismatch keeps left gt, null is false",
          "[pairs]") {
  FrameAnnotation f = generate_scene(clean_config(2), kRig, 5);
  auto pairs = pairs_from_frame(f, kRig);
  REQUIRE(pairs.size() == 4);
  SphericalCoord gt0 = cartesian_to_spherical(f.instances[0].center3d);
  for (const auto& p : pairs) {
    REQUIRE(p.ism_label == (p.left_person_id == p.right_person_id ? 1 : 0));
    if (p.left_index == 0) {
      REQUIRE(p.gt->r == Approx(gt0.r));
      REQUIRE(p.gt->beta == Approx(gt0.beta));
    }
  }

  // dropped when the left instance has no ground truth
  std::vector<InstanceLabel> no_gt{{4, std::nullopt, 1.7}};
  std::vector<InstanceLabel> with_id{{4, std::nullopt, 1.7}};
  KeypointSet k = person_keypoints({0, 0, 8}, 1.7, Eye::left, kRig);
  auto built = build_pairs({normalize_keypoints(k, kRig)},
                           {normalize_keypoints(k, kRig)});
  REQUIRE(label_pairs(built, no_gt, with_id).empty());
}

TEST_CASE("noise-free true pairs carry the normalized disparity in every "
          "delta x-slot",
          "[pairs]") {
  FrameAnnotation f = generate_scene(clean_config(3), kRig, 9);
  auto pairs = pairs_from_frame(f, kRig);
  int true_pairs = 0;
  for (const auto& p : pairs) {
    if (p.ism_label != 1) continue;
    ++true_pairs;
    const auto& inst = f.instances[static_cast<std::size_t>(p.left_person_id)];
    const double expected = kRig.baseline_m / inst.center3d.z;
    for (int j = 0; j < kNumJoints; ++j) {
      REQUIRE(p.features[feat::kDeltaX + j] == Approx(expected).epsilon(1e-9));
      REQUIRE(p.features[feat::kDeltaY + j] == Approx(0.0).margin(1e-12));
    }
  }
  REQUIRE(true_pairs == 3);
}

TEST_CASE("null-pair injection adds the configured fraction", "[pairs]") {
  FrameAnnotation f = generate_scene(clean_config(4), kRig, 13);
  Rng rng(3);
  auto pairs = pairs_from_frame(f, kRig, 1.0, &rng);
  int nulls = 0;
  for (const auto& p : pairs) nulls += p.is_null_pair;
  REQUIRE(nulls == 4);        // every left instance got one
  REQUIRE(pairs.size() == 20);  // 4x4 + 4 nulls
}

TEST_CASE("balance_pairs equalizes counts deterministically", "[pairs]") {
  auto make = [](int ism) {
    PairSample p;
    p.ism_label = ism;
    p.gt = SphericalCoord{10, 0, 0};
    return p;
  };
  std::vector<PairSample> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back(make(1));
  for (int i = 0; i < 40; ++i) pairs.push_back(make(0));

  auto balanced = balance_pairs(pairs, 7);
  int t = 0, fcount = 0;
  for (const auto& p : balanced) (p.ism_label ? t : fcount)++;
  REQUIRE(t == 10);
  REQUIRE(fcount == 10);

  auto again = balance_pairs(pairs, 7);
  REQUIRE(balanced.size() == again.size());

  // already balanced input is unchanged
  std::vector<PairSample> even;
  for (int i = 0; i < 10; ++i) even.push_back(make(i % 2));
  REQUIRE(balance_pairs(even, 3).size() == 10);

  // replication fills in scarce false pairs
  std::vector<PairSample> scarce;
  for (int i = 0; i < 8; ++i) scarce.push_back(make(1));
  scarce.push_back(make(0));
  auto replicated = balance_pairs(scarce, 5, true);
  t = fcount = 0;
  for (const auto& p : replicated) (p.ism_label ? t : fcount)++;
  REQUIRE(t == 8);
  REQUIRE(fcount == 8);

  std::vector<PairSample> no_true{make(0)};
  REQUIRE_THROWS_AS(balance_pairs(no_true, 1), DataError);
}

TEST_CASE("knowledge injection rescales distance and disparity by the "
          "height ratio",
          "[pairs]") {
  // one true pair at exactly 20 m on-axis
  Point3 center{0.0, 0.0, 0.0};
  SphericalCoord gt{20.0, 0.0, 0.0};
  center = spherical_to_cartesian(gt);
  KeypointSet l = person_keypoints(center, 1.71, Eye::left, kRig);
  KeypointSet r = person_keypoints(center, 1.71, Eye::right, kRig);
  auto pairs = build_pairs({normalize_keypoints(l, kRig)},
                           {normalize_keypoints(r, kRig)});
  PairSample p = pairs[0];
  p.ism_label = 1;
  p.gt = gt;
  p.source_height_m = 1.71;

  SECTION("identity at the source height") {
    PairSample same = knowledge_injection(p, 1.71, 1.71, kRig);
    REQUIRE(same.gt->r == Approx(20.0));
    for (int j = 0; j < feat::kSize; ++j)
      REQUIRE(same.features[j] == Approx(p.features[j]).margin(1e-15));
    REQUIRE(same.is_augmented);
  }

  SECTION("shrinking to 1.2 m pulls the person to 14.04 m") {
    PairSample ki = knowledge_injection(p, 1.71, 1.2, kRig);
    REQUIRE(ki.gt->r == Approx(20.0 * 1.2 / 1.71));  // 14.0351
    REQUIRE(ki.gt->beta == p.gt->beta);
    REQUIRE(ki.gt->psi == p.gt->psi);
    // implied disparity matches the rescaled depth
    const double z_new = 20.0 * 1.2 / 1.71;  // on-axis: z == r
    for (int j = 0; j < kNumJoints; ++j)
      REQUIRE(ki.features[feat::kDeltaX + j] ==
              Approx(kRig.baseline_m / z_new).epsilon(1e-9));
    // the left half is preserved bit-exactly
    for (int j = 0; j < 2 * kNumJoints; ++j)
      REQUIRE(ki.features[j] == p.features[j]);
  }

  SECTION("growing to 2.0 m pushes the person to 23.39 m") {
    PairSample ki = knowledge_injection(p, 1.71, 2.0, kRig);
    REQUIRE(ki.gt->r == Approx(20.0 * 2.0 / 1.71).epsilon(1e-9));  // 23.392
  }

  SECTION("heights outside (1.0, 2.2) are rejected") {
    REQUIRE_THROWS_AS(knowledge_injection(p, 1.71, 0.9, kRig),
                      std::domain_error);
    REQUIRE_THROWS_AS(knowledge_injection(p, 1.71, 2.3, kRig),
                      std::domain_error);
  }

  SECTION("augmented distances span the triangle-similarity range") {
    Rng rng(17);
    double lo = 1e9, hi = 0.0;
    for (int i = 0; i < 500; ++i) {
      double h = rng.uniform(1.2, 2.0);
      PairSample ki = knowledge_injection(p, 1.71, h, kRig);
      lo = std::min(lo, ki.gt->r);
      hi = std::max(hi, ki.gt->r);
      REQUIRE(ki.gt->r >= 20.0 * 1.2 / 1.71 - 1e-12);
      REQUIRE(ki.gt->r <= 20.0 * 2.0 / 1.71 + 1e-12);
    }
    REQUIRE(lo < 20.0 * 1.25 / 1.71);
    REQUIRE(hi > 20.0 * 1.95 / 1.71);
  }
}

TEST_CASE("flip_augment is an involution that negates azimuth", "[pairs]") {
  FrameAnnotation f = generate_scene(clean_config(2), kRig, 31);
  auto pairs = pairs_from_frame(f, kRig);
  for (const auto& p : pairs) {
    PairSample flipped = flip_augment(p);
    REQUIRE(flipped.gt->beta == Approx(-p.gt->beta));
    REQUIRE(flipped.gt->r == p.gt->r);
    REQUIRE(flipped.gt->psi == p.gt->psi);
    REQUIRE(flipped.ism_label == p.ism_label);
    REQUIRE(flipped.left_person_id == p.right_person_id);

    PairSample twice = flip_augment(flipped);
    for (int j = 0; j < feat::kSize; ++j)
      REQUIRE(twice.features[j] == Approx(p.features[j]).margin(1e-14));
    REQUIRE(twice.gt->beta == Approx(p.gt->beta));
  }
}

TEST_CASE("flipping a symmetric on-axis pose relabels left/right joints",
          "[pairs]") {
  // person centered midway between the cameras: mirroring about that plane
  // maps the pose onto itself with left/right joints exchanged
  Point3 center{kRig.baseline_m / 2.0, 0.0, 10.0};
  KeypointSet l = person_keypoints(center, 1.71, Eye::left, kRig);
  KeypointSet r = person_keypoints(center, 1.71, Eye::right, kRig);
  auto pairs = build_pairs({normalize_keypoints(l, kRig)},
                           {normalize_keypoints(r, kRig)});
  PairSample flipped = flip_augment(pairs[0]);

  auto mirror_joint = [](int j) {
    // COCO: index 0 is the nose, then (left, right) alternating
    if (j == 0) return 0;
    return (j % 2 == 1) ? j + 1 : j - 1;
  };
  for (int j = 0; j < kNumJoints; ++j) {
    int m = mirror_joint(j);
    REQUIRE(flipped.features[feat::kLeftX + j] ==
            Approx(pairs[0].features[feat::kLeftX + m]).margin(1e-12));
    REQUIRE(flipped.features[feat::kLeftY + j] ==
            Approx(pairs[0].features[feat::kLeftY + m]).margin(1e-12));
  }
}

TEST_CASE("frame-level flip keeps geometry exact for every pair", "[pairs]") {
  SceneConfig cfg = clean_config(3);
  cfg.mono_only_fraction = 0.3;
  FrameAnnotation f = generate_scene(cfg, kRig, 77);
  FrameAnnotation g = flip_frame(f, kRig);

  for (std::size_t i = 0; i < f.instances.size(); ++i) {
    REQUIRE(g.instances[i].center3d.x ==
            Approx(kRig.baseline_m - f.instances[i].center3d.x));
    REQUIRE(g.instances[i].visible_left == f.instances[i].visible_right);
  }

  auto pairs = pairs_from_frame(g, kRig);
  for (const auto& p : pairs) {
    if (p.ism_label != 1) continue;
    const auto& inst = g.instances[static_cast<std::size_t>(p.left_person_id)];
    SphericalCoord gt = cartesian_to_spherical(inst.center3d);
    REQUIRE(p.gt->r == Approx(gt.r));
    const double expected = kRig.baseline_m / inst.center3d.z;
    for (int j = 0; j < kNumJoints; ++j)
      REQUIRE(p.features[feat::kDeltaX + j] ==
              Approx(expected).epsilon(1e-9));
  }
}
