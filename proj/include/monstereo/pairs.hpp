#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "monstereo/common.hpp"
#include "monstereo/geometry.hpp"
#include "monstereo/rng.hpp"
#include "monstereo/scene.hpp"
#include "monstereo/skeleton.hpp"

namespace monstereo {

// Feature layout of one left/right pair:
//   [ x*_l[0..16]  y*_l[0..16] | dx[0..16]  dy[0..16] ]
// where dx, dy are left-minus-right normalized coordinates, zeroed for
// joints invisible in either eye. A null pair (no right detection) zeroes
// the whole delta half.
namespace feat {
inline constexpr int kLeftX = 0;
inline constexpr int kLeftY = kNumJoints;
inline constexpr int kDeltaX = 2 * kNumJoints;
inline constexpr int kDeltaY = 3 * kNumJoints;
inline constexpr int kSize = 4 * kNumJoints;  // 68
}  // namespace feat

struct PairSample {
  std::array<double, feat::kSize> features{};
  int ism_label = 0;  // 1 iff both halves depict the same person
  std::optional<SphericalCoord> gt;  // always the LEFT instance's position
  int left_index = -1;   // detection positions within the frame
  int right_index = -1;  // -1 for a null pair
  int left_person_id = -1;
  int right_person_id = -1;
  bool is_null_pair = false;
  bool is_augmented = false;
  double source_height_m = 0.0;  // left person's height, for augmentation
  int frame_id = -1;
};

inline PairSample make_pair_features(const KeypointSet& left,
                                     const KeypointSet& right) {
  PairSample p;
  for (int j = 0; j < kNumJoints; ++j) {
    if (left.visible[j]) {
      p.features[feat::kLeftX + j] = left.x[j];
      p.features[feat::kLeftY + j] = left.y[j];
    }
    if (left.visible[j] && right.visible[j]) {
      p.features[feat::kDeltaX + j] = left.x[j] - right.x[j];
      p.features[feat::kDeltaY + j] = left.y[j] - right.y[j];
    }
  }
  return p;
}

inline PairSample make_null_pair(const KeypointSet& left, int left_index) {
  KeypointSet empty;
  PairSample p = make_pair_features(left, empty);
  p.left_index = left_index;
  p.right_index = -1;
  p.is_null_pair = true;
  return p;
}

// All-vs-all association, left index major. Keypoints must already be
// normalized. With no right detections, each left instance gets one null
// pair so that inference always has an input to run on.
inline std::vector<PairSample> build_pairs(
    const std::vector<KeypointSet>& left,
    const std::vector<KeypointSet>& right) {
  std::vector<PairSample> pairs;
  if (left.empty()) return pairs;
  if (right.empty()) {
    for (std::size_t l = 0; l < left.size(); ++l)
      pairs.push_back(make_null_pair(left[l], static_cast<int>(l)));
    return pairs;
  }
  pairs.reserve(left.size() * right.size());
  for (std::size_t l = 0; l < left.size(); ++l) {
    for (std::size_t r = 0; r < right.size(); ++r) {
      PairSample p = make_pair_features(left[l], right[r]);
      p.left_index = static_cast<int>(l);
      p.right_index = static_cast<int>(r);
      pairs.push_back(p);
    }
  }
  return pairs;
}

struct InstanceLabel {
  int person_id = -1;
  std::optional<SphericalCoord> gt;
  double height_m = 0.0;
};

// Attaches person ids, the ISM label (same person on both sides) and the
// LEFT instance's ground truth — false and null pairs still supervise
// monocular localization of the left instance. Pairs whose left instance
// has no ground truth are dropped.
inline std::vector<PairSample> label_pairs(
    std::vector<PairSample> pairs, const std::vector<InstanceLabel>& left,
    const std::vector<InstanceLabel>& right) {
  std::vector<PairSample> out;
  out.reserve(pairs.size());
  for (PairSample& p : pairs) {
    const auto& l = left.at(static_cast<std::size_t>(p.left_index));
    if (!l.gt) continue;
    p.left_person_id = l.person_id;
    p.gt = l.gt;
    p.source_height_m = l.height_m;
    if (!p.is_null_pair) {
      const auto& r = right.at(static_cast<std::size_t>(p.right_index));
      p.right_person_id = r.person_id;
      p.ism_label = (l.person_id == r.person_id) ? 1 : 0;
    } else {
      p.ism_label = 0;
    }
    out.push_back(std::move(p));
  }
  return out;
}

// Build + label + optional null-pair injection for one annotated frame.
// null_fraction > 0 adds a null pair for that share of left instances even
// when right detections exist, keeping the zero-delta pattern
// in-distribution for training.
inline std::vector<PairSample> pairs_from_frame(const FrameAnnotation& frame,
                                                const StereoRig& rig,
                                                double null_fraction = 0.0,
                                                Rng* null_rng = nullptr) {
  std::vector<KeypointSet> left, right;
  std::vector<InstanceLabel> left_labels, right_labels;
  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    const auto& inst = frame.instances[i];
    if (inst.visible_left && frame.left_keypoints[i]) {
      left.push_back(normalize_keypoints(*frame.left_keypoints[i], rig));
      left_labels.push_back({inst.person_id,
                             cartesian_to_spherical(inst.center3d),
                             inst.height_m});
    }
    if (inst.visible_right && frame.right_keypoints[i]) {
      right.push_back(normalize_keypoints(*frame.right_keypoints[i], rig));
      right_labels.push_back({inst.person_id, std::nullopt, inst.height_m});
    }
  }
  std::vector<PairSample> pairs =
      label_pairs(build_pairs(left, right), left_labels, right_labels);
  if (!right.empty() && null_fraction > 0.0 && null_rng != nullptr) {
    for (std::size_t l = 0; l < left.size(); ++l) {
      if (null_rng->uniform() >= null_fraction) continue;
      PairSample p = make_null_pair(left[l], static_cast<int>(l));
      p.left_person_id = left_labels[l].person_id;
      p.gt = left_labels[l].gt;
      p.source_height_m = left_labels[l].height_m;
      pairs.push_back(std::move(p));
    }
  }
  for (PairSample& p : pairs) p.frame_id = frame.frame_id;
  return pairs;
}

// Equalizes true/false counts by adjusting the false side: subsample when
// over-represented, replicate (if allowed) when under-represented. Output
// preserves the input's relative order of kept pairs; deterministic in
// the seed.
inline std::vector<PairSample> balance_pairs(std::vector<PairSample> pairs,
                                             std::uint64_t seed,
                                             bool allow_replicate = true) {
  std::vector<std::size_t> true_idx, false_idx;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    (pairs[i].ism_label == 1 ? true_idx : false_idx).push_back(i);
  if (true_idx.empty())
    throw DataError("balance_pairs: no true pairs to balance against");

  Rng rng = Rng::substream(seed, "balance");
  std::vector<PairSample> out;
  if (false_idx.size() >= true_idx.size()) {
    std::vector<std::size_t> keep = false_idx;
    rng.shuffle(keep);
    keep.resize(true_idx.size());
    std::vector<bool> kept(pairs.size(), false);
    for (std::size_t i : true_idx) kept[i] = true;
    for (std::size_t i : keep) kept[i] = true;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (kept[i]) out.push_back(std::move(pairs[i]));
  } else {
    out = std::move(pairs);
    if (allow_replicate) {
      std::size_t need = true_idx.size() - false_idx.size();
      for (std::size_t k = 0; k < need; ++k)
        out.push_back(out[false_idx[rng.uniform_int(false_idx.size())]]);
    }
  }
  return out;
}

// Rescales a pair to a hypothetical person height. The pixel evidence for
// the left instance is unchanged (same apparent size), so the ground-truth
// distance scales with the height ratio, r' = r * h / h_source, and the
// delta x-components are rescaled so the implied disparity matches the
// depth consistent with r' at unchanged angles.
inline PairSample knowledge_injection(const PairSample& pair,
                                      double source_height_m,
                                      double new_height_m,
                                      const StereoRig& rig) {
  (void)rig;  // disparity rescale is rig-free: b/z' = (b/z) * (z/z')
  if (!pair.gt)
    throw std::domain_error("knowledge_injection: pair has no ground truth");
  if (!(source_height_m > 0.0))
    throw std::domain_error("knowledge_injection: source height must be > 0");
  if (!(new_height_m > 1.0 && new_height_m < 2.2))
    throw std::domain_error(
        "knowledge_injection: height outside (1.0, 2.2) meters");

  PairSample out = pair;
  const double scale = new_height_m / source_height_m;  // r'/r = z'/z
  out.gt->r = pair.gt->r * scale;
  for (int j = 0; j < kNumJoints; ++j)
    out.features[feat::kDeltaX + j] = pair.features[feat::kDeltaX + j] / scale;
  out.source_height_m = new_height_m;
  out.is_augmented = true;
  return out;
}

// Mirrors the pair about the principal axis and swaps eyes: the new left
// half is the mirrored former right instance. Works on the normalized
// features alone; the azimuth of the ground truth flips sign.
inline PairSample flip_augment(const PairSample& pair) {
  PairSample out = pair;
  for (int j = 0; j < kNumJoints; ++j) {
    const double lx = pair.features[feat::kLeftX + j];
    const double ly = pair.features[feat::kLeftY + j];
    const double dx = pair.features[feat::kDeltaX + j];
    const double dy = pair.features[feat::kDeltaY + j];
    out.features[feat::kLeftX + j] = -(lx - dx);  // mirrored former right
    out.features[feat::kLeftY + j] = ly - dy;
    out.features[feat::kDeltaX + j] = dx;
    out.features[feat::kDeltaY + j] = -dy;
  }
  if (out.gt) out.gt->beta = -out.gt->beta;
  std::swap(out.left_person_id, out.right_person_id);
  std::swap(out.left_index, out.right_index);
  return out;
}

// Frame-level horizontal flip: mirrors every keypoint about the principal
// column, swaps the two eyes and mirrors the 3D ground truth. Used at
// dataset-build time so that flipped FALSE pairs also carry a correct
// left-instance ground truth.
inline FrameAnnotation flip_frame(const FrameAnnotation& frame,
                                  const StereoRig& rig) {
  FrameAnnotation out = frame;
  auto mirror = [&rig](KeypointSet k, Eye new_eye) {
    k.eye = new_eye;
    for (int j = 0; j < kNumJoints; ++j) {
      if (!k.visible[j]) continue;
      double u = 2.0 * rig.u0 - k.x[j];
      if (rig.in_bounds({u, k.y[j]}))
        k.x[j] = u;
      else
        k.set_invisible(j);
    }
    return k;
  };
  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    // mirror(right image) viewed from the left camera places the person
    // at x' = baseline - x (reflection through the plane midway between
    // the two camera centers)
    out.instances[i].center3d.x =
        rig.baseline_m - frame.instances[i].center3d.x;
    bool vl = frame.instances[i].visible_right;
    bool vr = frame.instances[i].visible_left;
    out.instances[i].visible_left = vl;
    out.instances[i].visible_right = vr;
    out.left_keypoints[i] =
        frame.right_keypoints[i]
            ? std::optional<KeypointSet>(
                  mirror(*frame.right_keypoints[i], Eye::left))
            : std::nullopt;
    out.right_keypoints[i] =
        frame.left_keypoints[i]
            ? std::optional<KeypointSet>(
                  mirror(*frame.left_keypoints[i], Eye::right))
            : std::nullopt;
  }
  return out;
}

}  // namespace monstereo
