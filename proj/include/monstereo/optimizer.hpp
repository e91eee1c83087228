#pragma once

#include <cmath>
#include <vector>

#include "monstereo/common.hpp"
#include "monstereo/nn.hpp"

namespace monstereo {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
};

// Adam with bias correction, preceded by global-norm gradient clipping.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return step_; }

  void step(const std::vector<ParamTensor*>& params) {
    if (m_.empty()) {
      for (const ParamTensor* p : params) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (m_.size() != params.size())
      throw std::logic_error("adam: parameter list changed between steps");

    double sq_norm = 0.0;
    for (const ParamTensor* p : params) {
      if (!p->grad.allFinite())
        throw NumericError("non-finite gradient in parameter " + p->name);
      sq_norm += p->grad.squaredNorm();
    }
    double scale = 1.0;
    const double norm = std::sqrt(sq_norm);
    if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
      scale = cfg_.clip_norm / norm;

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix g = params[i]->grad * scale;
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] +
              (1.0 - cfg_.beta2) * g.array().square().matrix();
      Matrix m_hat = m_[i] / bc1;
      Matrix v_hat = v_[i] / bc2;
      params[i]->value.array() -=
          cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
    }
  }

  // Optimizer state for checkpointing.
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace monstereo
