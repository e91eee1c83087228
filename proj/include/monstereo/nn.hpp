#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "monstereo/common.hpp"
#include "monstereo/rng.hpp"

namespace monstereo {

using Matrix = Eigen::MatrixXd;     // rows are samples
using RowVector = Eigen::RowVectorXd;

enum class Mode { train, eval };

struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value

  ParamTensor() = default;
  ParamTensor(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}
};

namespace nn {

class Linear {
 public:
  Linear(std::string name, int in, int out, Rng& init)
      : W(name + ".W", Matrix(in, out)), b(name + ".b", Matrix(1, out)) {
    // PyTorch-style uniform init, bound 1/sqrt(fan_in)
    const double k = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j) W.value(i, j) = init.uniform(-k, k);
    for (int j = 0; j < out; ++j) b.value(0, j) = init.uniform(-k, k);
  }

  Matrix apply(const Matrix& x) const {
    return (x * W.value).rowwise() + b.value.row(0);
  }

  Matrix forward_train(const Matrix& x) {
    x_ = x;
    return apply(x);
  }

  Matrix backward(const Matrix& g) {
    W.grad.noalias() += x_.transpose() * g;
    b.grad += g.colwise().sum();
    return g * W.value.transpose();
  }

  ParamTensor W, b;

 private:
  Matrix x_;
};

class BatchNorm {
 public:
  BatchNorm(std::string name, int width)
      : gamma(name + ".gamma", Matrix::Ones(1, width)),
        beta(name + ".beta", Matrix::Zero(1, width)),
        running_mean(Matrix::Zero(1, width)),
        running_var(Matrix::Ones(1, width)),
        name_(std::move(name)) {}

  Matrix apply(const Matrix& x) const {  // eval: running statistics
    RowVector invstd =
        (running_var.array() + kEps).sqrt().inverse().matrix().row(0);
    Matrix xhat =
        (x.rowwise() - running_mean.row(0)).array().rowwise() *
        invstd.array();
    return (xhat.array().rowwise() * gamma.value.row(0).array()).matrix()
               .rowwise() +
           beta.value.row(0);
  }

  Matrix forward_train(const Matrix& x) {
    const double n = static_cast<double>(x.rows());
    RowVector mean = x.colwise().mean();
    Matrix centered = x.rowwise() - mean;
    RowVector var = centered.array().square().colwise().mean();
    invstd_ = (var.array() + kEps).sqrt().inverse();
    xhat_ = centered.array().rowwise() * invstd_.array();
    running_mean = (1.0 - kMomentum) * running_mean + kMomentum * mean;
    running_var = (1.0 - kMomentum) * running_var +
                  kMomentum * (var * n / (n - 1.0));
    return (xhat_.array().rowwise() * gamma.value.row(0).array()).matrix()
               .rowwise() +
           beta.value.row(0);
  }

  Matrix backward(const Matrix& g) {
    const double n = static_cast<double>(g.rows());
    gamma.grad += (g.array() * xhat_.array()).colwise().sum().matrix();
    beta.grad += g.colwise().sum();
    Matrix dxhat = g.array().rowwise() * gamma.value.row(0).array();
    RowVector sum_dxhat = dxhat.colwise().sum();
    RowVector sum_dxhat_xhat =
        (dxhat.array() * xhat_.array()).colwise().sum();
    Matrix dx =
        ((dxhat * n).rowwise() - sum_dxhat -
         (xhat_.array().rowwise() * sum_dxhat_xhat.array()).matrix()) /
        n;
    return dx.array().rowwise() * invstd_.array();
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  ParamTensor gamma, beta;
  Matrix running_mean, running_var;  // buffers, not trained

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Eigen::Array<double, 1, Eigen::Dynamic> invstd_;
  Matrix xhat_;
};

class Relu {
 public:
  Matrix apply(const Matrix& x) const { return x.cwiseMax(0.0); }

  Matrix forward_train(const Matrix& x) {
    mask_ = (x.array() > 0.0).cast<double>();
    return x.cwiseMax(0.0);
  }

  Matrix backward(const Matrix& g) const {
    return (g.array() * mask_).matrix();
  }

 private:
  Eigen::ArrayXXd mask_;
};

// Inverted dropout: train-time activations are scaled by 1/(1-p) so the
// expected value matches eval mode.
class Dropout {
 public:
  explicit Dropout(double p) : p_(p) {}

  Matrix apply(const Matrix& x) const { return x; }

  Matrix forward_train(const Matrix& x, Rng& rng) {
    if (p_ <= 0.0) {
      mask_.setOnes(x.rows(), x.cols());
      return x;
    }
    const double scale = 1.0 / (1.0 - p_);
    mask_.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        mask_(i, j) = rng.uniform() >= p_ ? scale : 0.0;
    return (x.array() * mask_).matrix();
  }

  Matrix backward(const Matrix& g) const {
    return (g.array() * mask_).matrix();
  }

 private:
  double p_;
  Eigen::ArrayXXd mask_;
};

}  // namespace nn

struct NetworkSpec {
  int input_dim = 68;
  int output_dim = 5;
  int hidden = 256;
  int num_blocks = 2;  // residual blocks of two linear+BN+ReLU stages
  double dropout = 0.2;

  void validate() const {
    if (input_dim < 1 || output_dim < 1 || hidden < 1 || num_blocks < 0)
      throw std::domain_error("network spec: dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::domain_error("network spec: dropout must be in [0, 1)");
  }
};

// Feed-forward trunk: linear+BN+ReLU+dropout stem, residual blocks of two
// such stages (output added to the block input), and a linear head.
class Network {
 public:
  Network(const NetworkSpec& spec, std::uint64_t init_seed)
      : spec_(spec), dropout_rng_(Rng::substream(init_seed, "dropout")) {
    spec_.validate();
    stem_dropout_ = nn::Dropout(spec_.dropout);
    Rng init = Rng::substream(init_seed, "init");
    stem_fc_ = std::make_unique<nn::Linear>("stem.fc", spec_.input_dim,
                                            spec_.hidden, init);
    stem_bn_ = std::make_unique<nn::BatchNorm>("stem.bn", spec_.hidden);
    for (int bidx = 0; bidx < spec_.num_blocks; ++bidx) {
      std::string base = "block" + std::to_string(bidx + 1);
      blocks_.push_back(Block{
          std::make_unique<nn::Linear>(base + ".fc1", spec_.hidden,
                                       spec_.hidden, init),
          std::make_unique<nn::BatchNorm>(base + ".bn1", spec_.hidden),
          nn::Relu{}, nn::Dropout{spec_.dropout},
          std::make_unique<nn::Linear>(base + ".fc2", spec_.hidden,
                                       spec_.hidden, init),
          std::make_unique<nn::BatchNorm>(base + ".bn2", spec_.hidden),
          nn::Relu{}, nn::Dropout{spec_.dropout}});
    }
    head_ = std::make_unique<nn::Linear>("head", spec_.hidden,
                                         spec_.output_dim, init);
  }

  const NetworkSpec& spec() const { return spec_; }

  void reset_dropout_stream(std::uint64_t seed) {
    dropout_rng_ = Rng::substream(seed, "dropout");
  }

  // Eval-mode forward: running BN statistics, no dropout, no caching.
  // Read-only, safe to call concurrently.
  Matrix predict(const Matrix& x) const {
    check_input_(x, 1);
    Matrix h = stem_relu_.apply(stem_bn_->apply(stem_fc_->apply(x)));
    for (const Block& blk : blocks_) {
      Matrix y = blk.relu1.apply(blk.bn1->apply(blk.fc1->apply(h)));
      y = blk.relu2.apply(blk.bn2->apply(blk.fc2->apply(y)));
      h += y;
    }
    return head_->apply(h);
  }

  // Train-mode forward: batch BN statistics, live dropout, caches kept for
  // backward. Requires at least two samples for batch statistics.
  Matrix forward_train(const Matrix& x) {
    check_input_(x, 2);
    Matrix h = stem_dropout_.forward_train(
        stem_relu_.forward_train(
            stem_bn_->forward_train(stem_fc_->forward_train(x))),
        dropout_rng_);
    for (Block& blk : blocks_) {
      Matrix y = blk.drop1.forward_train(
          blk.relu1.forward_train(
              blk.bn1->forward_train(blk.fc1->forward_train(h))),
          dropout_rng_);
      y = blk.drop2.forward_train(
          blk.relu2.forward_train(
              blk.bn2->forward_train(blk.fc2->forward_train(y))),
          dropout_rng_);
      h += y;
    }
    forward_ran_ = true;
    return head_->forward_train(h);
  }

  // Backpropagates from dL/d(raw outputs); fills fresh parameter
  // gradients (previous contents are zeroed) and returns dL/d(input).
  Matrix backward(const Matrix& upstream) {
    if (!forward_ran_)
      throw std::logic_error("backward called without a train-mode forward");
    zero_grad();
    Matrix g = head_->backward(upstream);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      Block& blk = *it;
      Matrix gy = blk.bn2->backward(
          blk.relu2.backward(blk.drop2.backward(g)));
      gy = blk.fc2->backward(gy);
      gy = blk.bn1->backward(blk.relu1.backward(blk.drop1.backward(gy)));
      gy = blk.fc1->backward(gy);
      g += gy;  // residual connection
    }
    g = stem_bn_->backward(
        stem_relu_.backward(stem_dropout_.backward(g)));
    g = stem_fc_->backward(g);
    forward_ran_ = false;
    return g;
  }

  std::vector<ParamTensor*> parameters() {
    std::vector<ParamTensor*> ps{&stem_fc_->W, &stem_fc_->b,
                                 &stem_bn_->gamma, &stem_bn_->beta};
    for (Block& blk : blocks_) {
      ps.push_back(&blk.fc1->W);
      ps.push_back(&blk.fc1->b);
      ps.push_back(&blk.bn1->gamma);
      ps.push_back(&blk.bn1->beta);
      ps.push_back(&blk.fc2->W);
      ps.push_back(&blk.fc2->b);
      ps.push_back(&blk.bn2->gamma);
      ps.push_back(&blk.bn2->beta);
    }
    ps.push_back(&head_->W);
    ps.push_back(&head_->b);
    return ps;
  }

  std::vector<std::pair<std::string, Matrix*>> buffers() {
    std::vector<std::pair<std::string, Matrix*>> bs;
    auto add = [&bs](nn::BatchNorm& bn) {
      bs.emplace_back(bn.name() + ".running_mean", &bn.running_mean);
      bs.emplace_back(bn.name() + ".running_var", &bn.running_var);
    };
    add(*stem_bn_);
    for (Block& blk : blocks_) {
      add(*blk.bn1);
      add(*blk.bn2);
    }
    return bs;
  }

  void zero_grad() {
    for (ParamTensor* p : parameters()) p->grad.setZero();
  }

 private:
  struct Block {
    std::unique_ptr<nn::Linear> fc1;
    std::unique_ptr<nn::BatchNorm> bn1;
    nn::Relu relu1;
    nn::Dropout drop1;
    std::unique_ptr<nn::Linear> fc2;
    std::unique_ptr<nn::BatchNorm> bn2;
    nn::Relu relu2;
    nn::Dropout drop2;
  };

  void check_input_(const Matrix& x, Eigen::Index min_rows) const {
    if (x.cols() != spec_.input_dim)
      throw std::logic_error("network input width mismatch");
    if (x.rows() < min_rows)
      throw std::logic_error(
          min_rows >= 2 ? "train-mode forward requires a batch of at least 2"
                        : "empty batch");
    if (!x.allFinite()) throw NumericError("non-finite network input");
  }

  NetworkSpec spec_;
  std::unique_ptr<nn::Linear> stem_fc_;
  std::unique_ptr<nn::BatchNorm> stem_bn_;
  nn::Relu stem_relu_;
  nn::Dropout stem_dropout_{0.2};
  std::vector<Block> blocks_;
  std::unique_ptr<nn::Linear> head_;
  Rng dropout_rng_;
  bool forward_ran_ = false;
};

}  // namespace monstereo
