#pragma once

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "monstereo/common.hpp"
#include "monstereo/rng.hpp"

namespace monstereo {

enum class Eye { left, right };

// Camera frame: x right, y down, z forward (rectified stereo image axes).
struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

struct Pixel {
  double u = 0.0, v = 0.0;
};

// (u - u0) / f, (v - v0) / f
struct NormalizedPoint {
  double x = 0.0, y = 0.0;
};

// Radial distance r, azimuth beta (x-z plane), polar elevation psi.
struct SphericalCoord {
  double r = 0.0, beta = 0.0, psi = 0.0;
};

// Rectified pinhole stereo pair with identical intrinsics. The right
// camera sits at +baseline_m along x.
struct StereoRig {
  double baseline_m = 0.54;
  double focal_px = 721.0;
  double u0 = 620.0;
  double v0 = 190.0;
  int width = 1240;
  int height = 380;

  void validate() const {
    if (!(baseline_m > 0.0)) throw std::domain_error("rig: baseline_m must be > 0");
    if (!(focal_px > 0.0)) throw std::domain_error("rig: focal_px must be > 0");
    if (!(u0 >= 0.0 && u0 < width && v0 >= 0.0 && v0 < height))
      throw std::domain_error("rig: principal point outside image bounds");
  }

  bool in_bounds(const Pixel& p) const {
    return p.u >= 0.0 && p.u < width && p.v >= 0.0 && p.v < height;
  }
};

inline Pixel project(const Point3& p, const StereoRig& rig, Eye eye) {
  if (!(p.z > 0.0)) throw std::domain_error("project: point depth must be > 0");
  const double x = (eye == Eye::left) ? p.x : p.x - rig.baseline_m;
  return {rig.focal_px * x / p.z + rig.u0, rig.focal_px * p.y / p.z + rig.v0};
}

inline NormalizedPoint normalize(const Pixel& p, const StereoRig& rig) {
  return {(p.u - rig.u0) / rig.focal_px, (p.v - rig.v0) / rig.focal_px};
}

// z = baseline * focal / d. A non-positive disparity signals an unmatched
// or degenerate pair.
inline double disparity_to_depth(double disparity_px, const StereoRig& rig) {
  if (!(disparity_px > 0.0))
    throw std::domain_error("disparity_to_depth: disparity must be > 0");
  return rig.baseline_m * rig.focal_px / disparity_px;
}

inline double depth_to_disparity(double depth_m, const StereoRig& rig) {
  if (!(depth_m > 0.0))
    throw std::domain_error("depth_to_disparity: depth must be > 0");
  return rig.baseline_m * rig.focal_px / depth_m;
}

// Depth error caused by a disparity error of e_d pixels at depth z:
// e_z = z^2 * e_d / (baseline * focal). Quadratic in z.
inline double stereo_pixel_error(double depth_m, const StereoRig& rig,
                                 double disparity_error_px = 1.0) {
  if (!(depth_m > 0.0))
    throw std::domain_error("stereo_pixel_error: depth must be > 0");
  if (disparity_error_px < 0.0)
    throw std::domain_error("stereo_pixel_error: disparity error must be >= 0");
  return depth_m * depth_m * disparity_error_px /
         (rig.baseline_m * rig.focal_px);
}

inline SphericalCoord cartesian_to_spherical(const Point3& p) {
  if (!(p.z > 0.0))
    throw std::domain_error("cartesian_to_spherical: depth must be > 0");
  const double r = p.norm();
  const double beta = std::atan2(p.x, p.z);
  const double psi = std::atan2(p.y, std::sqrt(p.x * p.x + p.z * p.z));
  return {r, beta, psi};
}

inline Point3 spherical_to_cartesian(const SphericalCoord& s) {
  const double cp = std::cos(s.psi);
  return {s.r * cp * std::sin(s.beta), s.r * std::sin(s.psi),
          s.r * cp * std::cos(s.beta)};
}

struct GaussianComponent {
  double mean_m = 1.71;
  double std_m = 0.09;
  double weight = 1.0;
};

// Distribution of human heights; source of the monocular task-error
// constant C. The expected relative depth error when localizing a person
// of unknown height under the mean-height assumption is
//   C = E[ |1/h - 1/h_mean| * h_mean ],
// estimated once by seeded Monte-Carlo and cached.
class HeightPrior {
 public:
  HeightPrior() : HeightPrior(1.71, 0.09) {}

  HeightPrior(double mean_m, double std_m)
      : HeightPrior(std::vector<GaussianComponent>{{mean_m, std_m, 1.0}}) {}

  explicit HeightPrior(std::vector<GaussianComponent> components)
      : components_(std::move(components)) {
    if (components_.empty())
      throw std::domain_error("height prior: no components");
    double wsum = 0.0;
    mean_ = 0.0;
    for (const auto& c : components_) {
      if (!(c.mean_m > 0.0)) throw std::domain_error("height prior: mean must be > 0");
      if (!(c.std_m > 0.0)) throw std::domain_error("height prior: std must be > 0");
      if (!(c.weight > 0.0)) throw std::domain_error("height prior: weight must be > 0");
      wsum += c.weight;
      mean_ += c.weight * c.mean_m;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
      throw std::domain_error("height prior: weights must sum to 1");
    mean_ /= wsum;
  }

  HeightPrior(const HeightPrior& o)
      : components_(o.components_), mean_(o.mean_), c_(o.c_.load()) {}
  HeightPrior& operator=(const HeightPrior& o) {
    components_ = o.components_;
    mean_ = o.mean_;
    c_.store(o.c_.load());
    return *this;
  }

  double mean_m() const { return mean_; }

  const std::vector<GaussianComponent>& components() const {
    return components_;
  }

  double sample(Rng& rng) const {
    const GaussianComponent* comp = &components_.front();
    if (components_.size() > 1) {
      double u = rng.uniform();
      double acc = 0.0;
      for (const auto& c : components_) {
        acc += c.weight;
        if (u < acc) {
          comp = &c;
          break;
        }
      }
    }
    return rng.normal(comp->mean_m, comp->std_m);
  }

  // C, computed once. Concurrent first calls race benignly: the Monte-Carlo
  // run is seeded, so every thread stores the same value.
  double task_error_constant() const {
    double c = c_.load(std::memory_order_acquire);
    if (c >= 0.0) return c;
    Rng rng(kMonteCarloSeed);
    double acc = 0.0;
    for (int i = 0; i < kMonteCarloSamples; ++i) {
      double h = sample(rng);
      acc += std::abs(1.0 / h - 1.0 / mean_) * mean_;
    }
    c = acc / kMonteCarloSamples;
    c_.store(c, std::memory_order_release);
    return c;
  }

  // Expected monocular localization error C * r_gt at distance r_gt.
  double monocular_task_error(double r_gt) const {
    if (r_gt < 0.0)
      throw std::domain_error("monocular_task_error: distance must be >= 0");
    return task_error_constant() * r_gt;
  }

  static constexpr int kMonteCarloSamples = 1'000'000;
  static constexpr std::uint64_t kMonteCarloSeed = 0x6d6f6e6fu;  // fixed

 private:
  std::vector<GaussianComponent> components_;
  double mean_ = 0.0;
  mutable std::atomic<double> c_{-1.0};
};

}  // namespace monstereo
