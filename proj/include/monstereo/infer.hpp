#pragma once

#include <optional>
#include <string>
#include <vector>

#include "monstereo/losses.hpp"
#include "monstereo/nn.hpp"
#include "monstereo/pairs.hpp"
#include "monstereo/scene.hpp"

namespace monstereo {

enum class LocalizationMode { stereo, mono };

inline const char* to_string(LocalizationMode m) {
  return m == LocalizationMode::stereo ? "stereo" : "mono";
}

// One 3D localization for a left-image instance. position is derived from
// the spherical output; interval_halfwidth is the predicted spread b in
// meters.
struct Localization {
  int frame_id = -1;
  int instance_id = -1;
  Point3 position;
  SphericalCoord spherical;
  double interval_halfwidth = 0.0;
  double ism_score = 0.0;
  LocalizationMode mode = LocalizationMode::mono;
  int selected_right_id = -1;  // person id of the chosen candidate, -1 = null
};

// Runs the network once over all N_L x N_R candidate pairs of a frame (a
// single eval batch) and keeps, per left instance, the pair with the
// highest predicted stereo matching; ties break to the lowest right index.
// Left instances with no right candidates run through their null pair.
inline std::vector<Localization> predict_frame(const FrameAnnotation& frame,
                                               const Network& net,
                                               const StereoRig& rig,
                                               double ism_threshold = 0.5) {
  std::vector<KeypointSet> left, right;
  std::vector<int> left_ids, right_ids;
  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    if (frame.instances[i].visible_left && frame.left_keypoints[i]) {
      left.push_back(normalize_keypoints(*frame.left_keypoints[i], rig));
      left_ids.push_back(frame.instances[i].person_id);
    }
    if (frame.instances[i].visible_right && frame.right_keypoints[i]) {
      right.push_back(normalize_keypoints(*frame.right_keypoints[i], rig));
      right_ids.push_back(frame.instances[i].person_id);
    }
  }
  std::vector<Localization> out;
  if (left.empty()) return out;

  const std::vector<PairSample> pairs = build_pairs(left, right);
  Matrix x(static_cast<Eigen::Index>(pairs.size()), feat::kSize);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    for (int j = 0; j < feat::kSize; ++j)
      x(static_cast<Eigen::Index>(k), j) = pairs[k].features[j];
  const Matrix raw = net.predict(x);

  const std::size_t per_left = right.empty() ? 1 : right.size();
  for (std::size_t l = 0; l < left.size(); ++l) {
    std::size_t best = l * per_left;
    double best_ism = -1.0;
    for (std::size_t r = 0; r < per_left; ++r) {
      const std::size_t k = l * per_left + r;
      const double p = sigmoid(raw(static_cast<Eigen::Index>(k), 4));
      if (p > best_ism) {  // strict: ties keep the lowest right index
        best_ism = p;
        best = k;
      }
    }
    const DecodedOutput dec =
        decode(raw.row(static_cast<Eigen::Index>(best)));
    Localization loc;
    loc.frame_id = frame.frame_id;
    loc.instance_id = left_ids[l];
    loc.spherical = {dec.r, dec.beta, dec.psi};
    loc.position = spherical_to_cartesian(loc.spherical);
    loc.interval_halfwidth = dec.spread_b;
    loc.ism_score = dec.ism_prob;
    loc.mode = (!right.empty() && dec.ism_prob >= ism_threshold)
                   ? LocalizationMode::stereo
                   : LocalizationMode::mono;
    loc.selected_right_id =
        pairs[best].is_null_pair
            ? -1
            : right_ids[static_cast<std::size_t>(pairs[best].right_index)];
    out.push_back(loc);
  }
  return out;
}

// Greedy one-to-one matching of predictions to ground-truth instances by
// descending IoU of the 2D keypoint bounding boxes in the left image.
struct GtMatch {
  std::size_t prediction = 0;  // index into the localization list
  std::size_t instance = 0;    // index into frame.instances
  double iou = 0.0;
};

inline double bbox_iou(const KeypointSet::Box& a, const KeypointSet::Box& b) {
  if (!a.valid || !b.valid) return 0.0;
  const double x1 = std::max(a.x1, b.x1), y1 = std::max(a.y1, b.y1);
  const double x2 = std::min(a.x2, b.x2), y2 = std::min(a.y2, b.y2);
  if (x2 <= x1 || y2 <= y1) return 0.0;
  const double inter = (x2 - x1) * (y2 - y1);
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline std::vector<GtMatch> match_to_ground_truth(
    const std::vector<Localization>& predictions,
    const FrameAnnotation& frame, double iou_threshold = 0.5) {
  // prediction boxes come from the left keypoints of the instance each
  // prediction was produced for
  auto box_of_person = [&frame](int person_id) -> KeypointSet::Box {
    for (std::size_t i = 0; i < frame.instances.size(); ++i)
      if (frame.instances[i].person_id == person_id && frame.left_keypoints[i])
        return frame.left_keypoints[i]->bbox();
    return {};
  };

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    KeypointSet::Box pb = box_of_person(predictions[p].instance_id);
    for (std::size_t i = 0; i < frame.instances.size(); ++i) {
      if (!frame.left_keypoints[i]) continue;
      const double iou = bbox_iou(pb, frame.left_keypoints[i]->bbox());
      if (iou >= iou_threshold) candidates.emplace_back(-iou, p, i);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> pred_used(predictions.size(), false);
  std::vector<bool> inst_used(frame.instances.size(), false);
  std::vector<GtMatch> matches;
  for (const auto& [neg_iou, p, i] : candidates) {
    if (pred_used[p] || inst_used[i]) continue;
    pred_used[p] = true;
    inst_used[i] = true;
    matches.push_back({p, i, -neg_iou});
  }
  return matches;
}

}  // namespace monstereo
