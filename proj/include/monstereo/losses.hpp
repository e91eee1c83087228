#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "monstereo/common.hpp"
#include "monstereo/geometry.hpp"
#include "monstereo/nn.hpp"

namespace monstereo {

inline double softplus(double z) {
  return z > 30.0 ? z : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Decoded network head. Raw outputs are, in order:
//   raw0 -> radial distance via softplus (no hard ceiling),
//   raw1 -> log of the relative spread; spread_b = exp(raw1) * r meters,
//   raw2 -> azimuth beta, raw3 -> polar psi (radians, direct),
//   raw4 -> ISM logit.
struct DecodedOutput {
  double r = 0.0;         // meters, > 0
  double spread_b = 0.0;  // meters, > 0: half-width of the interval
  double rel_spread = 0.0;  // spread_b / r, the Laplace scale
  double beta = 0.0;
  double psi = 0.0;
  double ism_prob = 0.5;
};

inline DecodedOutput decode(const Eigen::Ref<const RowVector>& raw) {
  if (raw.size() != 5) throw std::logic_error("decode: expected 5 outputs");
  DecodedOutput out;
  out.r = softplus(raw[0]);
  out.rel_spread = std::exp(raw[1]);
  out.spread_b = out.rel_spread * out.r;
  out.beta = raw[2];
  out.psi = raw[3];
  out.ism_prob = sigmoid(raw[4]);
  return out;
}

// Negative log-likelihood of a Laplace distribution on the relative
// residual: |1 - r/x| / b + log(2 b), with x the ground-truth distance and
// b the relative spread. Minimizing over b for a fixed residual rho gives
// b* = rho, which is what calibrates the predicted intervals.
inline double laplace_loss(double x_gt, double r, double b_rel) {
  if (!(x_gt > 0.0)) throw DataError("laplace_loss: ground truth must be > 0");
  if (!(b_rel > 0.0))
    throw std::domain_error("laplace_loss: spread must be > 0");
  return std::abs(1.0 - r / x_gt) / b_rel + std::log(2.0 * b_rel);
}

inline double bce_loss(double prob, int label) {
  if (label != 0 && label != 1)
    throw std::domain_error("bce_loss: label must be 0 or 1");
  const double p = std::clamp(prob, 1e-7, 1.0 - 1e-7);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

inline double angle_loss(double beta_pred, double psi_pred,
                         const SphericalCoord& gt) {
  return std::abs(beta_pred - gt.beta) + std::abs(psi_pred - gt.psi);
}

struct LossWeights {
  double laplace = 1.0;
  double bce = 1.0;
  double angle = 1.0;
};

// Supervision for one pair: the left instance's position plus the ISM
// label. Distance supervision stays on for false and null pairs unless
// explicitly masked (ablation).
struct Supervision {
  double r_gt = 0.0;
  double beta_gt = 0.0;
  double psi_gt = 0.0;
  int ism_label = 0;
  bool supervise_distance = true;
};

struct BatchLoss {
  double total = 0.0;
  double laplace = 0.0;
  double bce = 0.0;
  double angle = 0.0;
};

// Mean loss over the batch; optionally fills dL/d(raw outputs). The
// log-spread logit is clamped to +-10 before exponentiation so a wild
// early step cannot produce infinities; converged models sit well inside.
inline BatchLoss compute_loss(const Matrix& raw,
                              const std::vector<Supervision>& sup,
                              const LossWeights& w, Matrix* grad = nullptr) {
  if (raw.cols() != 5) throw std::logic_error("compute_loss: 5 outputs expected");
  if (static_cast<std::size_t>(raw.rows()) != sup.size())
    throw std::logic_error("compute_loss: batch/supervision size mismatch");
  const double n = static_cast<double>(raw.rows());
  if (grad) grad->setZero(raw.rows(), raw.cols());

  BatchLoss acc;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const Supervision& s = sup[static_cast<std::size_t>(i)];

    if (s.supervise_distance) {
      if (!(s.r_gt > 0.0))
        throw DataError("compute_loss: non-positive ground-truth distance");
      const double z0 = raw(i, 0);
      const double z1 = std::clamp(raw(i, 1), -10.0, 10.0);
      const double r = softplus(z0);
      const double b = std::exp(z1);
      const double rel = 1.0 - r / s.r_gt;
      acc.laplace += std::abs(rel) / b + std::log(2.0 * b);
      if (grad) {
        const double dr = (rel > 0.0 ? -1.0 : (rel < 0.0 ? 1.0 : 0.0)) /
                          (s.r_gt * b);
        (*grad)(i, 0) = w.laplace * dr * sigmoid(z0) / n;
        double db = 1.0 - std::abs(rel) / b;  // d/dz1 via b = exp(z1)
        if (raw(i, 1) != z1) db = 0.0;        // clamp region
        (*grad)(i, 1) = w.laplace * db / n;
      }

      const double ab = std::abs(raw(i, 2) - s.beta_gt);
      const double ap = std::abs(raw(i, 3) - s.psi_gt);
      acc.angle += ab + ap;
      if (grad) {
        (*grad)(i, 2) =
            w.angle * (raw(i, 2) > s.beta_gt ? 1.0 : (raw(i, 2) < s.beta_gt ? -1.0 : 0.0)) / n;
        (*grad)(i, 3) =
            w.angle * (raw(i, 3) > s.psi_gt ? 1.0 : (raw(i, 3) < s.psi_gt ? -1.0 : 0.0)) / n;
      }
    }

    const double p = sigmoid(raw(i, 4));
    acc.bce += bce_loss(p, s.ism_label);
    if (grad) (*grad)(i, 4) = w.bce * (p - static_cast<double>(s.ism_label)) / n;
  }

  acc.laplace /= n;
  acc.bce /= n;
  acc.angle /= n;
  acc.total = w.laplace * acc.laplace + w.bce * acc.bce + w.angle * acc.angle;
  return acc;
}

}  // namespace monstereo
