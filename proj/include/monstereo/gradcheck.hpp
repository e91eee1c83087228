#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "monstereo/losses.hpp"
#include "monstereo/nn.hpp"
#include "monstereo/rng.hpp"

namespace monstereo {

struct GradCheckEntry {
  std::string param;
  double max_rel_error = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> entries;

  bool passed(double tol = 1e-4) const { return max_rel_error < tol; }
};

// Central-difference comparison of analytic gradients against a scalar
// loss closure. `analytic` must hold the gradients for the current
// parameter values; the closure must recompute the loss (including any
// frozen stochastic masks) from scratch on every call. Checks every
// element when max_per_tensor == 0, otherwise a seeded subsample.
inline GradCheckReport finite_difference_check(
    const std::vector<ParamTensor*>& params,
    const std::vector<Matrix>& analytic,
    const std::function<double()>& loss_fn, double step = 1e-5,
    int max_per_tensor = 0, std::uint64_t subsample_seed = 0) {
  GradCheckReport report;
  Rng pick(subsample_seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    ParamTensor& p = *params[t];
    const Eigen::Index count = p.value.size();
    std::vector<Eigen::Index> idx;
    if (max_per_tensor > 0 &&
        count > static_cast<Eigen::Index>(max_per_tensor)) {
      for (int k = 0; k < max_per_tensor; ++k)
        idx.push_back(static_cast<Eigen::Index>(
            pick.uniform_int(static_cast<std::uint64_t>(count))));
    } else {
      idx.resize(static_cast<std::size_t>(count));
      for (Eigen::Index k = 0; k < count; ++k) idx[static_cast<std::size_t>(k)] = k;
    }

    GradCheckEntry entry;
    entry.param = p.name;
    for (Eigen::Index k : idx) {
      double* slot = p.value.data() + k;
      const double saved = *slot;
      *slot = saved + step;
      const double up = loss_fn();
      *slot = saved - step;
      const double down = loss_fn();
      *slot = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = analytic[t].data()[k];
      const double rel =
          std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++entry.checked;
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_param = entry.param;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

// Full-pipeline check: random batch, random supervision, composed
// Laplace + BCE + L1 objective through the network in train mode with
// frozen dropout masks.
inline GradCheckReport check_network_gradients(const NetworkSpec& spec,
                                               std::uint64_t seed,
                                               int batch_size = 8,
                                               double step = 1e-5,
                                               int max_per_tensor = 0) {
  Network net(spec, seed);
  Rng rng = Rng::substream(seed, "gradcheck");

  Matrix x(batch_size, spec.input_dim);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      x(i, j) = rng.uniform(-0.6, 0.6);

  std::vector<Supervision> sup;
  for (int i = 0; i < batch_size; ++i) {
    Supervision s;
    s.r_gt = rng.uniform(5.0, 50.0);
    s.beta_gt = rng.uniform(-0.5, 0.5);
    s.psi_gt = rng.uniform(-0.1, 0.1);
    s.ism_label = rng.uniform() < 0.5 ? 0 : 1;
    sup.push_back(s);
  }

  const LossWeights weights{};
  const std::uint64_t mask_seed = seed ^ 0xd120u;

  net.reset_dropout_stream(mask_seed);
  Matrix raw = net.forward_train(x);
  Matrix dldraw;
  compute_loss(raw, sup, weights, &dldraw);
  net.backward(dldraw);

  std::vector<ParamTensor*> params = net.parameters();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (ParamTensor* p : params) analytic.push_back(p->grad);

  auto loss_fn = [&]() {
    net.reset_dropout_stream(mask_seed);  // identical masks every call
    Matrix out = net.forward_train(x);
    return compute_loss(out, sup, weights).total;
  };
  return finite_difference_check(params, analytic, loss_fn, step,
                                 max_per_tensor, seed);
}

}  // namespace monstereo
