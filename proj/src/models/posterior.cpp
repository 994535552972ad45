#include <algorithm>
#include <numeric>

#include "cael/models.hpp"

namespace cael::models {

namespace {

// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  for (int i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace

PosteriorModel::PosteriorModel(int context_dim, int embed_dim, int num_actions)
    : d_(context_dim), de_(embed_dim), k_(num_actions) {
  if (d_ < 0 || de_ < 1 || k_ < 1) {
    throw InvalidArgument("PosteriorModel: bad dimensions");
  }
  u_ = Eigen::MatrixXd::Zero(k_, d_ + de_);
  c_ = Eigen::VectorXd::Zero(k_);
}

Eigen::MatrixXd PosteriorModel::probs_matrix(const Eigen::MatrixXd& x,
                                             const Eigen::MatrixXd& e) const {
  if (x.cols() != d_ || e.cols() != de_ || x.rows() != e.rows()) {
    throw InvalidArgument("posterior probs: feature shape mismatch");
  }
  Eigen::MatrixXd logits = x * u_.leftCols(d_).transpose() +
                           e * u_.rightCols(de_).transpose();
  logits.rowwise() += c_.transpose();
  return softmax_rows(std::move(logits));
}

void PosteriorModel::probs(const ContextVector& x,
                           std::span<const double> embedding,
                           std::span<double> out) const {
  if (static_cast<int>(x.size()) != d_ ||
      static_cast<int>(embedding.size()) != de_ ||
      static_cast<int>(out.size()) != k_) {
    throw InvalidArgument("posterior probs: feature shape mismatch");
  }
  Eigen::VectorXd logits = c_;
  for (int j = 0; j < d_; ++j) {
    logits += x[static_cast<std::size_t>(j)] * u_.col(j);
  }
  for (int j = 0; j < de_; ++j) {
    logits += embedding[static_cast<std::size_t>(j)] * u_.col(d_ + j);
  }
  const double m = logits.maxCoeff();
  double sum = 0.0;
  for (int a = 0; a < k_; ++a) {
    out[static_cast<std::size_t>(a)] = std::exp(logits(a) - m);
    sum += out[static_cast<std::size_t>(a)];
  }
  for (int a = 0; a < k_; ++a) out[static_cast<std::size_t>(a)] /= sum;
}

void PosteriorModel::fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& e,
                         const std::vector<int>& labels,
                         const PosteriorFitConfig& config, Rng& rng) {
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw InvalidArgument("posterior fit: empty batch");
  if (e.rows() != n || static_cast<int>(labels.size()) != n) {
    throw InvalidArgument("posterior fit: shape mismatch");
  }
  for (int lab : labels) {
    if (lab < 0 || lab >= k_) {
      throw InvalidArgument("posterior fit: label out of range");
    }
  }
  const int bsz = std::min(config.batch_size, n);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);

  const int f_dim = d_ + de_;
  Eigen::MatrixXd features(n, f_dim);
  features.leftCols(d_) = x;
  features.rightCols(de_) = e;

  // Standardize features for the descent (embeddings are arbitrarily
  // scaled) and fold the affine map back into raw-space weights afterwards,
  // so probs() stays free of fit-time state. The warm start is mapped into
  // the standardized space first.
  Eigen::RowVectorXd mean = features.colwise().mean();
  Eigen::RowVectorXd scale(f_dim);
  for (int j = 0; j < f_dim; ++j) {
    const double var =
        (features.col(j).array() - mean(j)).square().sum() / n;
    scale(j) = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  features = ((features.rowwise() - mean).array().rowwise() / scale.array())
                 .matrix();
  for (int j = 0; j < f_dim; ++j) u_.col(j) *= scale(j);
  c_ += u_ * (mean.transpose().cwiseQuotient(scale.transpose()));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates reshuffle per epoch from the caller's stream.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(
          rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(j)]);
    }
    for (int start = 0; start < n; start += bsz) {
      const int b = std::min(bsz, n - start);
      Eigen::MatrixXd fb(b, d_ + de_);
      for (int r = 0; r < b; ++r) {
        fb.row(r) = features.row(perm[static_cast<std::size_t>(start + r)]);
      }
      Eigen::MatrixXd logits = fb * u_.transpose();
      logits.rowwise() += c_.transpose();
      Eigen::MatrixXd p = softmax_rows(std::move(logits));
      for (int r = 0; r < b; ++r) {
        p(r, labels[static_cast<std::size_t>(
                  perm[static_cast<std::size_t>(start + r)])]) -= 1.0;
      }
      const double scale = 1.0 / static_cast<double>(b);
      Eigen::MatrixXd gu = scale * (p.transpose() * fb) + config.l2 * u_;
      Eigen::VectorXd gc = scale * p.colwise().sum().transpose();
      u_ -= config.learning_rate * gu;
      c_ -= config.learning_rate * gc;
    }
  }

  // Back to raw-feature space.
  c_ -= u_ * (mean.transpose().cwiseQuotient(scale.transpose()));
  for (int j = 0; j < f_dim; ++j) u_.col(j) /= scale(j);
}

void PosteriorModel::set_weights(Eigen::MatrixXd u, Eigen::VectorXd c) {
  if (u.rows() != k_ || u.cols() != d_ + de_ || c.size() != k_) {
    throw InvalidArgument("set_weights: shape mismatch");
  }
  u_ = std::move(u);
  c_ = std::move(c);
}

PosteriorModel fit_posterior(
    const std::vector<std::pair<ContextVector, std::vector<double>>>& features,
    const std::vector<ActionId>& labels, int num_actions,
    const PosteriorFitConfig& config, RngSeed seed) {
  if (features.empty()) throw InvalidArgument("fit_posterior: empty batch");
  if (features.size() != labels.size()) {
    throw InvalidArgument("fit_posterior: label count mismatch");
  }
  const int n = static_cast<int>(features.size());
  const int d = static_cast<int>(features.front().first.size());
  const int de = static_cast<int>(features.front().second.size());
  Eigen::MatrixXd x(n, d), e(n, de);
  for (int i = 0; i < n; ++i) {
    const auto& [xi, ei] = features[static_cast<std::size_t>(i)];
    if (static_cast<int>(xi.size()) != d ||
        static_cast<int>(ei.size()) != de) {
      throw InvalidArgument("fit_posterior: ragged feature rows");
    }
    for (int j = 0; j < d; ++j) x(i, j) = xi[static_cast<std::size_t>(j)];
    for (int j = 0; j < de; ++j) e(i, j) = ei[static_cast<std::size_t>(j)];
  }
  PosteriorModel model(d, de, num_actions);
  Rng rng(derive_seed(seed, 0x90570));
  std::vector<int> labs(labels.begin(), labels.end());
  model.fit(x, e, labs, config, rng);
  return model;
}

double collision_entropy(std::span<const double> p) {
  if (p.empty()) throw InvalidArgument("collision_entropy: empty vector");
  double sum_sq = 0.0;
  for (double v : p) sum_sq += v * v;
  if (sum_sq <= 0.0) {
    throw InvalidArgument("collision_entropy: zero vector");
  }
  return -std::log(sum_sq);
}

}  // namespace cael::models
