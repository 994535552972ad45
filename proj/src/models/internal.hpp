#pragma once

#include <Eigen/Dense>
#include <span>

#include "cael/models.hpp"

// Shared implementation pieces for the loss terms and the trainer. The
// public loss operations and the training loop must agree exactly, so both
// route through these kernels.
namespace cael::models::detail {

struct DataMatrices {
  Eigen::MatrixXd x;         // n x d
  std::vector<int> actions;  // n
  Eigen::VectorXd rewards;   // n
};

DataMatrices to_matrices(const Dataset& data);

/// Importance weights w(x_i, a) for a whole dataset plus the derived
/// quantities the losses need. The weights do not depend on the embedding
/// parameters, so each row's ascending order is computed once.
struct WeightTable {
  Eigen::MatrixXd w;       // n x K
  Eigen::VectorXd sumw2;   // n
  std::vector<int> order;  // n * K; per-row action order, ascending weight
  int K = 0;

  std::span<const int> row_order(int i) const {
    return {&order[static_cast<std::size_t>(i) * K],
            static_cast<std::size_t>(K)};
  }

  static WeightTable build(const estimators::ActionProbs& pi,
                           const estimators::ActionProbs& mu);
};

struct LossPieces {
  double l_r = 0.0;
  double l_bias = 0.0;
  double l_var = 0.0;
  double s_mean = 0.0;  // (1/B) Sum_k s_k; l_bias = s_mean^2
};

/// rows[k] selects the weight-table row backing batch row k. rhat, rewards
/// are length B; post is the B x K posterior evaluated at the batch's
/// (context, embedding) pairs.
LossPieces loss_forward(const WeightTable& table, std::span<const int> rows,
                        const Eigen::VectorXd& rhat,
                        const Eigen::VectorXd& rewards,
                        const Eigen::MatrixXd& post, bool use_predicted);

struct LossGrads {
  Eigen::VectorXd d_rhat;  // B
  Eigen::MatrixXd d_post;  // B x K
};

/// Gradient of total = l_r + rho*l_bias + gamma*l_var with respect to the
/// predicted rewards and the posterior probabilities.
LossGrads loss_backward(const WeightTable& table, std::span<const int> rows,
                        const Eigen::VectorXd& rhat,
                        const Eigen::VectorXd& rewards,
                        const Eigen::MatrixXd& post, double rho, double gamma,
                        bool use_predicted, double s_mean);

/// Chains (d_rhat, d_post) back to the embedding matrix: the reward path
/// through r_hat = e . x plus the posterior path through the softmax
/// Jacobian and the embedding block of the posterior weights.
Eigen::MatrixXd embedding_gradient(const Eigen::MatrixXd& x,
                                   const Eigen::MatrixXd& post,
                                   const PosteriorModel& posterior,
                                   const LossGrads& grads);

}  // namespace cael::models::detail
