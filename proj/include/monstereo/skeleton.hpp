#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "monstereo/geometry.hpp"

namespace monstereo {

inline constexpr int kNumJoints = 17;

// COCO joint order.
enum class Joint : int {
  nose = 0,
  left_eye,
  right_eye,
  left_ear,
  right_ear,
  left_shoulder,
  right_shoulder,
  left_elbow,
  right_elbow,
  left_wrist,
  right_wrist,
  left_hip,
  right_hip,
  left_knee,
  right_knee,
  left_ankle,
  right_ankle,
};

inline constexpr std::array<const char*, kNumJoints> kJointNames = {
    "nose",       "left_eye",      "right_eye",      "left_ear",
    "right_ear",  "left_shoulder", "right_shoulder", "left_elbow",
    "right_elbow", "left_wrist",   "right_wrist",    "left_hip",
    "right_hip",  "left_knee",     "right_knee",     "left_ankle",
    "right_ankle"};

// One person's joints in one image. Used both for pixel coordinates (scene
// files) and normalized coordinates (network inputs); invisible joints
// always carry (0, 0).
struct KeypointSet {
  Eye eye = Eye::left;
  std::array<double, kNumJoints> x{};
  std::array<double, kNumJoints> y{};
  std::array<std::uint8_t, kNumJoints> visible{};

  void set(int j, double jx, double jy) {
    x[j] = jx;
    y[j] = jy;
    visible[j] = 1;
  }

  void set_invisible(int j) {
    x[j] = 0.0;
    y[j] = 0.0;
    visible[j] = 0;
  }

  int visible_count() const {
    int n = 0;
    for (auto v : visible) n += v != 0;
    return n;
  }

  struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    bool valid = false;
    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
  };

  // Axis-aligned extent of the visible joints.
  Box bbox() const {
    Box b;
    b.x1 = b.y1 = std::numeric_limits<double>::infinity();
    b.x2 = b.y2 = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < kNumJoints; ++j) {
      if (!visible[j]) continue;
      b.x1 = std::min(b.x1, x[j]);
      b.y1 = std::min(b.y1, y[j]);
      b.x2 = std::max(b.x2, x[j]);
      b.y2 = std::max(b.y2, y[j]);
      b.valid = true;
    }
    if (!b.valid) b = Box{};
    return b;
  }
};

inline KeypointSet normalize_keypoints(const KeypointSet& pixels,
                                       const StereoRig& rig) {
  KeypointSet out;
  out.eye = pixels.eye;
  for (int j = 0; j < kNumJoints; ++j) {
    if (!pixels.visible[j]) continue;
    NormalizedPoint n = normalize({pixels.x[j], pixels.y[j]}, rig);
    out.set(j, n.x, n.y);
  }
  return out;
}

// Canonical upright planar skeleton. Offsets are fractions of body height,
// x to the person's left, y down from the topmost joint; the vertical
// extent from topmost joint to ankles is exactly 1.
struct PersonTemplate {
  std::array<double, kNumJoints> dx{};
  std::array<double, kNumJoints> dy{};

  static const PersonTemplate& standing() {
    static const PersonTemplate t = [] {
      PersonTemplate p;
      auto set = [&p](Joint j, double dx, double dy) {
        p.dx[static_cast<int>(j)] = dx;
        p.dy[static_cast<int>(j)] = dy;
      };
      set(Joint::nose, 0.000, 0.020);
      set(Joint::left_eye, 0.032, 0.000);
      set(Joint::right_eye, -0.032, 0.000);
      set(Joint::left_ear, 0.060, 0.010);
      set(Joint::right_ear, -0.060, 0.010);
      set(Joint::left_shoulder, 0.110, 0.180);
      set(Joint::right_shoulder, -0.110, 0.180);
      set(Joint::left_elbow, 0.145, 0.330);
      set(Joint::right_elbow, -0.145, 0.330);
      set(Joint::left_wrist, 0.160, 0.470);
      set(Joint::right_wrist, -0.160, 0.470);
      set(Joint::left_hip, 0.060, 0.520);
      set(Joint::right_hip, -0.060, 0.520);
      set(Joint::left_knee, 0.070, 0.750);
      set(Joint::right_knee, -0.070, 0.750);
      set(Joint::left_ankle, 0.080, 1.000);
      set(Joint::right_ankle, -0.080, 1.000);
      p.validate();
      return p;
    }();
    return t;
  }

  double mid_hip_dy() const {
    return 0.5 * (dy[static_cast<int>(Joint::left_hip)] +
                  dy[static_cast<int>(Joint::right_hip)]);
  }

  void validate() const {
    const auto [lo, hi] = std::minmax_element(dy.begin(), dy.end());
    if (std::abs((*hi - *lo) - 1.0) > 1e-12)
      throw std::domain_error(
          "person template: head-to-ankle extent must be exactly 1");
  }
};

}  // namespace monstereo
