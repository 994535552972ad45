#include <cmath>

#include "cael/models.hpp"

namespace cael::models {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

Eigen::MatrixXd uniform_matrix(int rows, int cols, double bound, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

EmbeddingNet::EmbeddingNet(int context_dim, int num_actions, int hidden_width,
                           double dropout_rate, RngSeed seed)
    : d_(context_dim), k_(num_actions), h_(hidden_width),
      dropout_(dropout_rate) {
  if (d_ < 1 || k_ < 1 || h_ < 1) {
    throw InvalidArgument("EmbeddingNet: dimensions must be positive");
  }
  if (!(dropout_ >= 0.0 && dropout_ < 1.0)) {
    throw InvalidArgument("EmbeddingNet: dropout rate outside [0, 1)");
  }
  Rng rng(derive_seed(seed, 0x11e7));
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(d_ + k_));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(h_));
  w1x_ = uniform_matrix(h_, d_, bound1, rng);
  w1a_ = uniform_matrix(h_, k_, bound1, rng);
  b1_ = Eigen::VectorXd::Zero(h_);
  bn1_gamma_ = Eigen::VectorXd::Ones(h_);
  bn1_beta_ = Eigen::VectorXd::Zero(h_);
  w2_ = uniform_matrix(h_, h_, bound2, rng);
  b2_ = Eigen::VectorXd::Zero(h_);
  bn2_gamma_ = Eigen::VectorXd::Ones(h_);
  bn2_beta_ = Eigen::VectorXd::Zero(h_);
  w3_ = uniform_matrix(d_, h_, bound2, rng);
  b3_ = Eigen::VectorXd::Zero(d_);
  bn1_rmean_ = Eigen::ArrayXd::Zero(h_);
  bn1_rvar_ = Eigen::ArrayXd::Ones(h_);
  bn2_rmean_ = Eigen::ArrayXd::Zero(h_);
  bn2_rvar_ = Eigen::ArrayXd::Ones(h_);
}

namespace {

struct BnResult {
  Eigen::MatrixXd normalized;
  Eigen::ArrayXd invstd;
};

// Column-wise batchnorm on z (B x h). Train mode normalizes with batch
// statistics and updates the running buffers; eval mode uses the buffers.
BnResult batchnorm(const Eigen::MatrixXd& z, Mode mode, Eigen::ArrayXd& rmean,
                   Eigen::ArrayXd& rvar) {
  BnResult out;
  if (mode == Mode::kTrain) {
    const double b = static_cast<double>(z.rows());
    Eigen::ArrayXd mean = z.colwise().mean().transpose().array();
    Eigen::ArrayXd var =
        (z.array().square().colwise().sum() / b).transpose().array() -
        mean.square();
    var = var.max(0.0);  // guard tiny negative rounding
    out.invstd = (var + kBnEps).sqrt().inverse();
    out.normalized =
        ((z.rowwise() - mean.matrix().transpose()).array().rowwise() *
         out.invstd.transpose())
            .matrix();
    rmean = (1.0 - kBnMomentum) * rmean + kBnMomentum * mean;
    rvar = (1.0 - kBnMomentum) * rvar + kBnMomentum * var;
  } else {
    out.invstd = (rvar + kBnEps).sqrt().inverse();
    out.normalized =
        ((z.rowwise() - rmean.matrix().transpose()).array().rowwise() *
         out.invstd.transpose())
            .matrix();
  }
  return out;
}

Eigen::MatrixXd dropout_mask(int rows, int cols, double rate, Rng& rng) {
  Eigen::MatrixXd mask(rows, cols);
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      mask(i, j) = rng.uniform() < keep ? scale : 0.0;
    }
  }
  return mask;
}

}  // namespace

Eigen::MatrixXd EmbeddingNet::forward(const Eigen::MatrixXd& x,
                                      const std::vector<int>& actions,
                                      Mode mode, Rng* rng,
                                      ForwardCache* cache) {
  const int b = static_cast<int>(x.rows());
  if (x.cols() != d_) throw InvalidArgument("forward: context width mismatch");
  if (static_cast<int>(actions.size()) != b) {
    throw InvalidArgument("forward: action count mismatch");
  }
  const bool train = mode == Mode::kTrain;
  if (train && rng == nullptr) {
    throw InvalidArgument("forward: train mode needs an rng for dropout");
  }

  // Layer 1: the one-hot action block reduces to a column gather of w1a.
  Eigen::MatrixXd z1 = x * w1x_.transpose();
  for (int i = 0; i < b; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= k_) throw InvalidArgument("forward: action out of range");
    z1.row(i) += w1a_.col(a).transpose();
  }
  z1.rowwise() += b1_.transpose();
  BnResult bn1 = batchnorm(z1, mode, bn1_rmean_, bn1_rvar_);
  Eigen::MatrixXd a1 =
      ((bn1.normalized.array().rowwise() * bn1_gamma_.array().transpose())
           .rowwise() +
       bn1_beta_.array().transpose())
          .matrix();
  Eigen::MatrixXd h1 = a1.cwiseMax(0.0);
  Eigen::MatrixXd mask1;
  if (train && dropout_ > 0.0) {
    mask1 = dropout_mask(b, h_, dropout_, *rng);
    h1 = h1.cwiseProduct(mask1);
  }

  Eigen::MatrixXd z2 = h1 * w2_.transpose();
  z2.rowwise() += b2_.transpose();
  BnResult bn2 = batchnorm(z2, mode, bn2_rmean_, bn2_rvar_);
  Eigen::MatrixXd a2 =
      ((bn2.normalized.array().rowwise() * bn2_gamma_.array().transpose())
           .rowwise() +
       bn2_beta_.array().transpose())
          .matrix();
  Eigen::MatrixXd h2 = a2.cwiseMax(0.0);
  Eigen::MatrixXd mask2;
  if (train && dropout_ > 0.0) {
    mask2 = dropout_mask(b, h_, dropout_, *rng);
    h2 = h2.cwiseProduct(mask2);
  }

  Eigen::MatrixXd out = h2 * w3_.transpose();
  out.rowwise() += b3_.transpose();

  if (cache != nullptr) {
    cache->mode = mode;
    cache->x = x;
    cache->actions = actions;
    cache->n1 = std::move(bn1.normalized);
    cache->invstd1 = std::move(bn1.invstd);
    cache->relu_in1 = std::move(a1);
    cache->drop_mask1 = std::move(mask1);
    cache->h1 = std::move(h1);
    cache->n2 = std::move(bn2.normalized);
    cache->invstd2 = std::move(bn2.invstd);
    cache->relu_in2 = std::move(a2);
    cache->drop_mask2 = std::move(mask2);
    cache->h2 = std::move(h2);
  }
  return out;
}

Eigen::MatrixXd EmbeddingNet::forward_eval(const Eigen::MatrixXd& x,
                                           const std::vector<int>& actions,
                                           ForwardCache* cache) const {
  // Eval mode never mutates the running statistics.
  return const_cast<EmbeddingNet*>(this)->forward(x, actions, Mode::kEval,
                                                  nullptr, cache);
}

namespace {

// Backward through batchnorm. In train mode the batch statistics depend on
// every row; in eval (frozen) mode the transform is a fixed affine map.
Eigen::MatrixXd batchnorm_backward(const Eigen::MatrixXd& d_out,
                                   const Eigen::MatrixXd& normalized,
                                   const Eigen::ArrayXd& invstd,
                                   const Eigen::VectorXd& gamma, bool train,
                                   Eigen::VectorXd& d_gamma,
                                   Eigen::VectorXd& d_beta) {
  d_gamma = d_out.cwiseProduct(normalized).colwise().sum().transpose();
  d_beta = d_out.colwise().sum().transpose();
  Eigen::MatrixXd d_norm =
      (d_out.array().rowwise() * gamma.array().transpose()).matrix();
  if (!train) {
    return (d_norm.array().rowwise() * invstd.transpose()).matrix();
  }
  Eigen::ArrayXd mean_dnorm = d_norm.colwise().mean().transpose().array();
  Eigen::ArrayXd mean_dnorm_n =
      d_norm.cwiseProduct(normalized).colwise().mean().transpose().array();
  Eigen::MatrixXd centered =
      (d_norm.rowwise() - mean_dnorm.matrix().transpose()) -
      (normalized.array().rowwise() * mean_dnorm_n.transpose()).matrix();
  return (centered.array().rowwise() * invstd.transpose()).matrix();
}

}  // namespace

NetGrads EmbeddingNet::backward(const ForwardCache& cache,
                                const Eigen::MatrixXd& d_embedding) const {
  const bool train = cache.mode == Mode::kTrain;
  const int b = static_cast<int>(cache.x.rows());
  NetGrads g;

  g.w3 = d_embedding.transpose() * cache.h2;
  g.b3 = d_embedding.colwise().sum().transpose();
  Eigen::MatrixXd d_h2 = d_embedding * w3_;

  if (train && dropout_ > 0.0) d_h2 = d_h2.cwiseProduct(cache.drop_mask2);
  Eigen::MatrixXd d_a2 =
      (cache.relu_in2.array() > 0.0).select(d_h2, 0.0);
  Eigen::MatrixXd d_z2 = batchnorm_backward(d_a2, cache.n2, cache.invstd2,
                                            bn2_gamma_, train, g.bn2_gamma,
                                            g.bn2_beta);

  g.w2 = d_z2.transpose() * cache.h1;
  g.b2 = d_z2.colwise().sum().transpose();
  Eigen::MatrixXd d_h1 = d_z2 * w2_;

  if (train && dropout_ > 0.0) d_h1 = d_h1.cwiseProduct(cache.drop_mask1);
  Eigen::MatrixXd d_a1 =
      (cache.relu_in1.array() > 0.0).select(d_h1, 0.0);
  Eigen::MatrixXd d_z1 = batchnorm_backward(d_a1, cache.n1, cache.invstd1,
                                            bn1_gamma_, train, g.bn1_gamma,
                                            g.bn1_beta);

  g.w1x = d_z1.transpose() * cache.x;
  g.b1 = d_z1.colwise().sum().transpose();
  g.w1a = Eigen::MatrixXd::Zero(h_, k_);
  for (int i = 0; i < b; ++i) {
    g.w1a.col(cache.actions[static_cast<std::size_t>(i)]) +=
        d_z1.row(i).transpose();
  }
  return g;
}

void EmbeddingNet::sgd_step(const NetGrads& g, double lr) {
  w1x_ -= lr * g.w1x;
  w1a_ -= lr * g.w1a;
  b1_ -= lr * g.b1;
  bn1_gamma_ -= lr * g.bn1_gamma;
  bn1_beta_ -= lr * g.bn1_beta;
  w2_ -= lr * g.w2;
  b2_ -= lr * g.b2;
  bn2_gamma_ -= lr * g.bn2_gamma;
  bn2_beta_ -= lr * g.bn2_beta;
  w3_ -= lr * g.w3;
  b3_ -= lr * g.b3;
}

namespace {

void append_matrix(std::vector<double>& out, const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
}

void append_vector(std::vector<double>& out, const Eigen::VectorXd& v) {
  out.insert(out.end(), v.data(), v.data() + v.size());
}

void read_matrix(std::span<const double>& flat, Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      m(i, j) = flat.front();
      flat = flat.subspan(1);
    }
  }
}

void read_vector(std::span<const double>& flat, Eigen::VectorXd& v) {
  for (int i = 0; i < v.size(); ++i) {
    v(i) = flat.front();
    flat = flat.subspan(1);
  }
}

}  // namespace

std::vector<double> EmbeddingNet::parameters() const {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(num_parameters()));
  append_matrix(flat, w1x_);
  append_matrix(flat, w1a_);
  append_vector(flat, b1_);
  append_vector(flat, bn1_gamma_);
  append_vector(flat, bn1_beta_);
  append_matrix(flat, w2_);
  append_vector(flat, b2_);
  append_vector(flat, bn2_gamma_);
  append_vector(flat, bn2_beta_);
  append_matrix(flat, w3_);
  append_vector(flat, b3_);
  return flat;
}

void EmbeddingNet::set_parameters(std::span<const double> flat) {
  if (static_cast<int>(flat.size()) != num_parameters()) {
    throw InvalidArgument("set_parameters: wrong length");
  }
  read_matrix(flat, w1x_);
  read_matrix(flat, w1a_);
  read_vector(flat, b1_);
  read_vector(flat, bn1_gamma_);
  read_vector(flat, bn1_beta_);
  read_matrix(flat, w2_);
  read_vector(flat, b2_);
  read_vector(flat, bn2_gamma_);
  read_vector(flat, bn2_beta_);
  read_matrix(flat, w3_);
  read_vector(flat, b3_);
}

int EmbeddingNet::num_parameters() const {
  return h_ * d_ + h_ * k_ + 3 * h_ + h_ * h_ + 3 * h_ + d_ * h_ + d_;
}

std::vector<double> EmbeddingNet::flatten(const NetGrads& g) {
  std::vector<double> flat;
  append_matrix(flat, g.w1x);
  append_matrix(flat, g.w1a);
  append_vector(flat, g.b1);
  append_vector(flat, g.bn1_gamma);
  append_vector(flat, g.bn1_beta);
  append_matrix(flat, g.w2);
  append_vector(flat, g.b2);
  append_vector(flat, g.bn2_gamma);
  append_vector(flat, g.bn2_beta);
  append_matrix(flat, g.w3);
  append_vector(flat, g.b3);
  return flat;
}

std::vector<double> EmbeddingNet::buffers() const {
  std::vector<double> flat;
  for (const Eigen::ArrayXd* a :
       {&bn1_rmean_, &bn1_rvar_, &bn2_rmean_, &bn2_rvar_}) {
    flat.insert(flat.end(), a->data(), a->data() + a->size());
  }
  return flat;
}

void EmbeddingNet::set_buffers(std::span<const double> flat) {
  if (static_cast<int>(flat.size()) != 4 * h_) {
    throw InvalidArgument("set_buffers: wrong length");
  }
  for (Eigen::ArrayXd* a :
       {&bn1_rmean_, &bn1_rvar_, &bn2_rmean_, &bn2_rvar_}) {
    for (int i = 0; i < h_; ++i) {
      (*a)(i) = flat.front();
      flat = flat.subspan(1);
    }
  }
}

std::vector<double> embed_forward(const EmbeddingNet& net,
                                  const ContextVector& x, ActionId a) {
  if (static_cast<int>(x.size()) != net.context_dim()) {
    throw InvalidArgument("embed_forward: context width mismatch");
  }
  Eigen::MatrixXd xm(1, net.context_dim());
  for (int j = 0; j < net.context_dim(); ++j) xm(0, j) = x[static_cast<std::size_t>(j)];
  Eigen::MatrixXd e = net.forward_eval(xm, {a});
  return {e.data(), e.data() + e.cols()};
}

double predict_reward(const EmbeddingNet& net, const ContextVector& x,
                      ActionId a) {
  if (net.embedding_dim() != net.context_dim()) {
    throw InvalidArgument("predict_reward: embedding width must equal d");
  }
  const std::vector<double> e = embed_forward(net, x, a);
  double dot = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) dot += e[j] * x[j];
  return dot;
}

estimators::ActionProbs predict_reward_matrix(
    const EmbeddingNet& net, const std::vector<ContextVector>& contexts,
    int num_actions) {
  const int n = static_cast<int>(contexts.size());
  const int d = net.context_dim();
  estimators::ActionProbs out;
  out.n = n;
  out.K = num_actions;
  out.p.resize(static_cast<std::size_t>(n) * num_actions);
  // One batched pass per action keeps the working set small.
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = contexts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  std::vector<int> actions(static_cast<std::size_t>(n));
  for (int a = 0; a < num_actions; ++a) {
    std::fill(actions.begin(), actions.end(), a);
    Eigen::MatrixXd e = net.forward_eval(x, actions);
    Eigen::VectorXd rhat = (e.array() * x.array()).rowwise().sum().matrix();
    for (int i = 0; i < n; ++i) {
      out.p[static_cast<std::size_t>(i) * num_actions + a] = rhat(i);
    }
  }
  return out;
}

}  // namespace cael::models
