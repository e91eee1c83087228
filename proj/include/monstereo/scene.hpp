#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "monstereo/common.hpp"
#include "monstereo/geometry.hpp"
#include "monstereo/rng.hpp"
#include "monstereo/skeleton.hpp"

namespace monstereo {

// One synthetic pedestrian. center3d is the mid-hip point.
struct SceneInstance {
  int person_id = 0;
  Point3 center3d;
  double height_m = 1.71;
  bool visible_left = true;
  bool visible_right = true;
  double occlusion_level = 0.0;  // expected fraction of occluded joints
};

// One stereo frame: instances plus their projected keypoints, pixel
// coordinates with noise already applied. Keypoint entries are present
// exactly for the eyes an instance is visible in.
struct FrameAnnotation {
  int frame_id = 0;
  std::vector<SceneInstance> instances;
  std::vector<std::optional<KeypointSet>> left_keypoints;
  std::vector<std::optional<KeypointSet>> right_keypoints;
};

struct HeightTail {
  enum class Kind { none, uniform };
  Kind kind = Kind::none;
  double lo = 1.2;
  double hi = 2.0;
  double fraction = 1.0;  // share of instances drawn from the tail
};

struct SceneConfig {
  int people_min = 1;
  int people_max = 5;
  double dist_min = 5.0;   // radial distance range, meters
  double dist_max = 50.0;
  double azimuth_max = 0.5;   // radians, symmetric about the axis
  double y_jitter = 0.2;      // vertical offset of mid-hip, meters
  double pixel_noise_sigma = 1.0;
  double mono_only_fraction = 0.15;  // instances visible in the left eye only
  double occluded_fraction = 0.2;    // instances with partial joint dropout
  double occlusion_max = 0.5;
  HeightPrior prior;
  HeightTail height_tail;

  void validate() const {
    if (people_min < 1 || people_max < people_min)
      throw DataError("scene config: pedestrian count must be >= 1");
    if (!(dist_min > 4.0 && dist_max < 60.0 && dist_min < dist_max))
      throw DataError("scene config: distance range must lie within (4, 60)");
    if (azimuth_max < 0.0 || azimuth_max > 0.7)
      throw DataError("scene config: azimuth_max must be in [0, 0.7]");
    if (pixel_noise_sigma < 0.0 || mono_only_fraction < 0.0 ||
        mono_only_fraction > 1.0 || occluded_fraction < 0.0 ||
        occluded_fraction > 1.0)
      throw DataError("scene config: invalid noise/visibility fractions");
  }
};

namespace detail {

// A detector would not fire on fewer visible joints than this.
inline constexpr int kMinVisibleJoints = 5;
inline constexpr int kMaxPlacementRetries = 64;

inline double sample_height(const SceneConfig& cfg, Rng& rng) {
  if (cfg.height_tail.kind == HeightTail::Kind::uniform &&
      rng.uniform() < cfg.height_tail.fraction)
    return rng.uniform(cfg.height_tail.lo, cfg.height_tail.hi);
  const double mean = cfg.prior.mean_m();
  for (int i = 0; i < 1000; ++i) {
    double h = cfg.prior.sample(rng);
    bool within_prior = true;
    for (const auto& c : cfg.prior.components())
      within_prior = within_prior && std::abs(h - c.mean_m) <= 6.0 * c.std_m;
    if (within_prior && h >= 1.0 && h <= 2.2) return h;
  }
  return mean;
}

inline KeypointSet project_person(const SceneInstance& inst,
                                  const StereoRig& rig, Eye eye,
                                  double noise_sigma, double occlusion,
                                  Rng& rng) {
  const PersonTemplate& tmpl = PersonTemplate::standing();
  const double hip_dy = tmpl.mid_hip_dy();
  KeypointSet kps;
  kps.eye = eye;
  for (int j = 0; j < kNumJoints; ++j) {
    // planar skeleton: all joints share the instance depth
    Point3 p{inst.center3d.x + tmpl.dx[j] * inst.height_m,
             inst.center3d.y + (tmpl.dy[j] - hip_dy) * inst.height_m,
             inst.center3d.z};
    Pixel px = project(p, rig, eye);
    if (noise_sigma > 0.0) {
      px.u += rng.normal(0.0, noise_sigma);
      px.v += rng.normal(0.0, noise_sigma);
    }
    bool occluded = occlusion > 0.0 && rng.uniform() < occlusion;
    if (occluded || !rig.in_bounds(px))
      kps.set_invisible(j);
    else
      kps.set(j, px.u, px.v);
  }
  return kps;
}

}  // namespace detail

// Samples one frame: uniform radial distance and azimuth, heights from the
// prior (or tail), planar skeletons projected into both eyes with Gaussian
// pixel noise; a configured fraction of instances is made mono-only.
// Pure in (config, rig, seed, frame_id).
inline FrameAnnotation generate_scene(const SceneConfig& cfg,
                                      const StereoRig& rig,
                                      std::uint64_t seed, int frame_id = 0) {
  cfg.validate();
  rig.validate();
  for (int attempt = 0; attempt < detail::kMaxPlacementRetries; ++attempt) {
    Rng rng = Rng::substream(seed, "scene",
                             static_cast<std::uint64_t>(frame_id) * 64 +
                                 static_cast<std::uint64_t>(attempt));
    FrameAnnotation frame;
    frame.frame_id = frame_id;
    const int n =
        cfg.people_min +
        static_cast<int>(rng.uniform_int(cfg.people_max - cfg.people_min + 1));
    for (int i = 0; i < n; ++i) {
      SceneInstance inst;
      inst.person_id = i;
      inst.height_m = detail::sample_height(cfg, rng);
      const double r = rng.uniform(cfg.dist_min, cfg.dist_max);
      const double beta = rng.uniform(-cfg.azimuth_max, cfg.azimuth_max);
      const double y = rng.uniform(-cfg.y_jitter, cfg.y_jitter);
      const double psi = std::asin(y / r);
      inst.center3d = spherical_to_cartesian({r, beta, psi});
      inst.visible_right = rng.uniform() >= cfg.mono_only_fraction;
      inst.occlusion_level = rng.uniform() < cfg.occluded_fraction
                                 ? rng.uniform(0.05, cfg.occlusion_max)
                                 : 0.0;

      KeypointSet left = detail::project_person(
          inst, rig, Eye::left, cfg.pixel_noise_sigma, inst.occlusion_level,
          rng);
      KeypointSet right = detail::project_person(
          inst, rig, Eye::right, cfg.pixel_noise_sigma, inst.occlusion_level,
          rng);

      inst.visible_left = left.visible_count() >= detail::kMinVisibleJoints;
      inst.visible_right = inst.visible_right &&
                           right.visible_count() >= detail::kMinVisibleJoints;

      frame.instances.push_back(inst);
      frame.left_keypoints.push_back(
          inst.visible_left ? std::optional<KeypointSet>(left) : std::nullopt);
      frame.right_keypoints.push_back(
          inst.visible_right ? std::optional<KeypointSet>(right)
                             : std::nullopt);
    }
    for (const auto& inst : frame.instances)
      if (inst.visible_left) return frame;
  }
  throw DataError("generate_scene: no visible instance after " +
                  std::to_string(detail::kMaxPlacementRetries) +
                  " placement attempts");
}

// Deterministic split by frame. Counts are floor(N*ratio) with the
// remainder distributed by largest fractional part.
inline std::vector<std::vector<FrameAnnotation>> dataset_split(
    const std::vector<FrameAnnotation>& frames,
    const std::vector<double>& ratios, std::uint64_t seed) {
  if (ratios.empty()) throw DataError("dataset_split: no ratios");
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw DataError("dataset_split: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw DataError("dataset_split: ratios must sum to 1");
  if (frames.size() < ratios.size())
    throw DataError("dataset_split: fewer frames than splits");

  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::substream(seed, "split");
  rng.shuffle(order);

  const std::size_t n = frames.size();
  std::vector<std::size_t> counts(ratios.size());
  std::vector<std::pair<double, std::size_t>> frac;  // (-fraction, index)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    double exact = ratios[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(exact);
    assigned += counts[i];
    frac.emplace_back(-(exact - static_cast<double>(counts[i])), i);
  }
  std::sort(frac.begin(), frac.end());
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[frac[k].second];

  std::vector<std::vector<FrameAnnotation>> splits(ratios.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i)
    for (std::size_t k = 0; k < counts[i]; ++k)
      splits[i].push_back(frames[order[pos++]]);
  return splits;
}

}  // namespace monstereo
