#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "monstereo/common.hpp"
#include "monstereo/losses.hpp"
#include "monstereo/nn.hpp"
#include "monstereo/optimizer.hpp"
#include "monstereo/pairs.hpp"
#include "monstereo/rng.hpp"

namespace monstereo {

struct TrainConfig {
  int epochs = 400;
  int batch_size = 512;
  double lr = 1e-3;
  double clip_norm = 5.0;
  LossWeights weights;    // equally weighted by default
  bool ism_loss = true;   // false trains the S+M ablation (no BCE signal)
  bool ki = true;         // knowledge injection on the fly
  double ki_multiplier = 1.0;  // augmented copies per pair per epoch
  double ki_lo = 1.2;
  double ki_hi = 2.0;
  bool mask_distance_on_false = false;  // ablation switch
  std::uint64_t seed = 0;
  NetworkSpec net;

  void validate() const {
    if (epochs < 1 || batch_size < 2) throw DataError("train config: epochs >= 1 and batch >= 2 required");
    if (!(lr > 0.0)) throw DataError("train config: lr must be > 0");
    if (ki_multiplier < 0.0) throw DataError("train config: ki_multiplier must be >= 0");
    if (!std::isfinite(weights.laplace) || !std::isfinite(weights.bce) ||
        !std::isfinite(weights.angle))
      throw DataError("train config: non-finite loss weights");
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"clip_norm", c.clip_norm},
          {"w_laplace", c.weights.laplace},
          {"w_bce", c.weights.bce},
          {"w_angle", c.weights.angle},
          {"ism_loss", c.ism_loss},
          {"ki", c.ki},
          {"ki_multiplier", c.ki_multiplier},
          {"ki_lo", c.ki_lo},
          {"ki_hi", c.ki_hi},
          {"mask_distance_on_false", c.mask_distance_on_false},
          {"seed", c.seed},
          {"hidden", c.net.hidden},
          {"num_blocks", c.net.num_blocks},
          {"dropout", c.net.dropout}};
}

inline std::string config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

struct EpochStats {
  int epoch = 0;
  double train_total = 0, train_laplace = 0, train_bce = 0, train_angle = 0;
  double val_total = 0, val_laplace = 0, val_bce = 0, val_angle = 0;
  double val_ism_accuracy = 0;
};

struct TrainResult {
  Network net;
  std::vector<EpochStats> log;
  bool diverged = false;
  int completed_epochs = 0;
  std::string config_hash;
};

namespace detail {

inline Supervision supervision_for(const PairSample& p, bool mask_on_false) {
  Supervision s;
  if (!p.gt) throw DataError("training pair without ground truth");
  s.r_gt = p.gt->r;
  s.beta_gt = p.gt->beta;
  s.psi_gt = p.gt->psi;
  s.ism_label = p.ism_label;
  s.supervise_distance = !(mask_on_false && p.ism_label == 0);
  return s;
}

inline void fill_batch(const std::vector<const PairSample*>& pool,
                       const std::vector<std::size_t>& order,
                       std::size_t begin, std::size_t end, bool mask_on_false,
                       Matrix& x, std::vector<Supervision>& sup) {
  const std::size_t n = end - begin;
  x.resize(static_cast<Eigen::Index>(n), feat::kSize);
  sup.clear();
  sup.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const PairSample& p = *pool[order[begin + k]];
    for (int j = 0; j < feat::kSize; ++j)
      x(static_cast<Eigen::Index>(k), j) = p.features[j];
    sup.push_back(supervision_for(p, mask_on_false));
  }
}

struct ValMetrics {
  BatchLoss loss;
  double ism_accuracy = 0.0;
};

inline ValMetrics evaluate_split(const Network& net,
                                 const std::vector<PairSample>& pairs,
                                 const LossWeights& w, bool mask_on_false,
                                 int batch_size) {
  ValMetrics out;
  if (pairs.empty()) return out;
  std::size_t correct = 0;
  double total = 0, lap = 0, bce = 0, ang = 0;
  for (std::size_t begin = 0; begin < pairs.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(pairs.size(), begin + static_cast<std::size_t>(batch_size));
    Matrix x(static_cast<Eigen::Index>(end - begin), feat::kSize);
    std::vector<Supervision> sup;
    for (std::size_t k = begin; k < end; ++k) {
      for (int j = 0; j < feat::kSize; ++j)
        x(static_cast<Eigen::Index>(k - begin), j) = pairs[k].features[j];
      sup.push_back(supervision_for(pairs[k], mask_on_false));
    }
    Matrix raw = net.predict(x);
    BatchLoss bl = compute_loss(raw, sup, w);
    const double bn = static_cast<double>(end - begin);
    total += bl.total * bn;
    lap += bl.laplace * bn;
    bce += bl.bce * bn;
    ang += bl.angle * bn;
    for (std::size_t k = begin; k < end; ++k) {
      const double p = sigmoid(raw(static_cast<Eigen::Index>(k - begin), 4));
      correct += (p >= 0.5 ? 1 : 0) == pairs[k].ism_label;
    }
  }
  const double n = static_cast<double>(pairs.size());
  out.loss = {total / n, lap / n, bce / n, ang / n};
  out.ism_accuracy = static_cast<double>(correct) / n;
  return out;
}

}  // namespace detail

// Joint training of ISM classification and 3D localization. Distance and
// angle supervision stay active for false and null pairs (the left
// instance's ground truth), which is what forces monocular competence;
// the BCE term carries the stereo-matching signal. Knowledge injection
// resamples person heights uniformly each epoch. Deterministic given
// (config, data order): all randomness derives from labeled substreams of
// the config seed.
inline TrainResult train_model(const std::vector<PairSample>& train_pairs,
                               const std::vector<PairSample>& val_pairs,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (train_pairs.empty()) throw DataError("train: empty training set");
  bool has_true = false, has_false = false;
  for (const auto& p : train_pairs) {
    (p.ism_label == 1 ? has_true : has_false) = true;
    if (has_true && has_false) break;
  }
  if (!has_true || !has_false)
    throw DataError("train: training file must contain both ISM labels");

  NetworkSpec spec = cfg.net;
  spec.input_dim = feat::kSize;
  spec.output_dim = 5;
  TrainResult result{Network(spec, cfg.seed), {}, false, 0,
                     config_hash(train_config_to_json(cfg))};
  Network& net = result.net;

  LossWeights w = cfg.weights;
  if (!cfg.ism_loss) w.bce = 0.0;

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.clip_norm = cfg.clip_norm;
  Adam opt(adam_cfg);

  // last-good snapshot for the divergence path
  auto snapshot = [&net]() {
    std::vector<Matrix> s;
    for (ParamTensor* p : net.parameters()) s.push_back(p->value);
    for (auto& [name, m] : net.buffers()) s.push_back(*m);
    return s;
  };
  auto restore = [&net](const std::vector<Matrix>& s) {
    std::size_t i = 0;
    for (ParamTensor* p : net.parameters()) p->value = s[i++];
    for (auto& [name, m] : net.buffers()) *m = s[i++];
  };
  std::vector<Matrix> last_good = snapshot();

  std::vector<PairSample> augmented;  // reused across epochs
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    augmented.clear();
    if (cfg.ki && cfg.ki_multiplier > 0.0) {
      Rng aug = Rng::substream(cfg.seed, "augment",
                               static_cast<std::uint64_t>(epoch));
      const int whole = static_cast<int>(cfg.ki_multiplier);
      const double frac = cfg.ki_multiplier - whole;
      for (const PairSample& p : train_pairs) {
        int copies = whole + (frac > 0.0 && aug.uniform() < frac ? 1 : 0);
        for (int c = 0; c < copies; ++c) {
          const double h = aug.uniform(cfg.ki_lo, cfg.ki_hi);
          augmented.push_back(
              knowledge_injection(p, p.source_height_m, h, StereoRig{}));
        }
      }
    }

    std::vector<const PairSample*> pool;
    pool.reserve(train_pairs.size() + augmented.size());
    for (const auto& p : train_pairs) pool.push_back(&p);
    for (const auto& p : augmented) pool.push_back(&p);

    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle",
                                     static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double ep_total = 0, ep_lap = 0, ep_bce = 0, ep_ang = 0;
    std::size_t seen = 0;
    Matrix x;
    std::vector<Supervision> sup;
    bool diverged = false;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      if (end - begin < 2) break;  // batch statistics need two samples
      detail::fill_batch(pool, order, begin, end, cfg.mask_distance_on_false,
                         x, sup);
      Matrix raw = net.forward_train(x);
      Matrix grad;
      BatchLoss bl = compute_loss(raw, sup, w, &grad);
      if (!std::isfinite(bl.total)) {
        diverged = true;
        break;
      }
      net.backward(grad);
      try {
        opt.step(net.parameters());
      } catch (const NumericError&) {
        diverged = true;
        break;
      }
      const double bn = static_cast<double>(end - begin);
      ep_total += bl.total * bn;
      ep_lap += bl.laplace * bn;
      ep_bce += bl.bce * bn;
      ep_ang += bl.angle * bn;
      seen += end - begin;
    }

    if (diverged) {
      restore(last_good);
      result.diverged = true;
      break;
    }

    EpochStats stats;
    stats.epoch = epoch;
    if (seen > 0) {
      stats.train_total = ep_total / static_cast<double>(seen);
      stats.train_laplace = ep_lap / static_cast<double>(seen);
      stats.train_bce = ep_bce / static_cast<double>(seen);
      stats.train_angle = ep_ang / static_cast<double>(seen);
    }
    detail::ValMetrics vm = detail::evaluate_split(
        net, val_pairs, w, cfg.mask_distance_on_false, cfg.batch_size);
    stats.val_total = vm.loss.total;
    stats.val_laplace = vm.loss.laplace;
    stats.val_bce = vm.loss.bce;
    stats.val_angle = vm.loss.angle;
    stats.val_ism_accuracy = vm.ism_accuracy;
    result.log.push_back(stats);
    result.completed_epochs = epoch;
    last_good = snapshot();
  }

  return result;
}

// Shortest round-trip decimal formatting; keeps CSV output byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_train_log_csv(const std::string& path,
                                const std::vector<EpochStats>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,train_total,train_laplace,train_bce,train_angle,"
         "val_total,val_laplace,val_bce,val_angle,val_ism_accuracy\n";
  for (const EpochStats& s : log) {
    out << s.epoch << ',' << format_double(s.train_total) << ','
        << format_double(s.train_laplace) << ',' << format_double(s.train_bce)
        << ',' << format_double(s.train_angle) << ','
        << format_double(s.val_total) << ',' << format_double(s.val_laplace)
        << ',' << format_double(s.val_bce) << ',' << format_double(s.val_angle)
        << ',' << format_double(s.val_ism_accuracy) << '\n';
  }
}

}  // namespace monstereo
