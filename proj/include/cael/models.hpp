#pragma once

#include <Eigen/Dense>

#include "cael/estimators.hpp"
#include "cael/policies.hpp"
#include "cael/types.hpp"

namespace cael::models {

enum class Mode { kTrain, kEval };

/// Gradients of every trainable parameter of the embedding network.
/// Batchnorm running statistics are buffers, not parameters, and have no
/// entry here.
struct NetGrads {
  Eigen::MatrixXd w1x, w1a, w2, w3;
  Eigen::VectorXd b1, bn1_gamma, bn1_beta;
  Eigen::VectorXd b2, bn2_gamma, bn2_beta;
  Eigen::VectorXd b3;
};

/// Three-layer feedforward embedding network
///   concat(x, onehot(a)) -> hidden -> hidden -> embedding
/// with batchnorm + ReLU + dropout on both hidden layers and a linear output
/// of width context_dim, so the embedding can double as a reward predictor
/// through r_hat = e . x. The one-hot block is applied as a column gather,
/// never materialized.
class EmbeddingNet {
 public:
  EmbeddingNet(int context_dim, int num_actions, int hidden_width,
               double dropout_rate, RngSeed seed);

  int context_dim() const { return d_; }
  int num_actions() const { return k_; }
  int embedding_dim() const { return d_; }
  int hidden_width() const { return h_; }
  double dropout_rate() const { return dropout_; }

  /// Everything backward needs from a forward pass.
  struct ForwardCache {
    Mode mode = Mode::kEval;
    Eigen::MatrixXd x;  // B x d inputs
    std::vector<int> actions;
    Eigen::MatrixXd n1, n2;           // normalized pre-affine activations
    Eigen::ArrayXd invstd1, invstd2;  // 1/sqrt(var + eps) used by the pass
    Eigen::MatrixXd relu_in1, relu_in2;
    Eigen::MatrixXd drop_mask1, drop_mask2;  // already scaled by 1/keep
    Eigen::MatrixXd h1, h2;                  // layer outputs fed forward
  };

  /// Batched forward pass. Train mode draws dropout masks from rng,
  /// normalizes with batch statistics, and updates the running statistics;
  /// eval mode is deterministic and uses the running statistics. Pass a
  /// cache to enable backward().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x,
                          const std::vector<int>& actions, Mode mode,
                          Rng* rng = nullptr, ForwardCache* cache = nullptr);

  /// Deterministic eval-mode forward that leaves the running statistics
  /// untouched.
  Eigen::MatrixXd forward_eval(const Eigen::MatrixXd& x,
                               const std::vector<int>& actions,
                               ForwardCache* cache = nullptr) const;

  /// Backpropagates dL/dE through the cached pass.
  NetGrads backward(const ForwardCache& cache,
                    const Eigen::MatrixXd& d_embedding) const;

  void sgd_step(const NetGrads& grads, double learning_rate);

  /// Trainable parameters flattened in a fixed order (used by checkpoints
  /// and finite-difference checks).
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  int num_parameters() const;
  static std::vector<double> flatten(const NetGrads& grads);

  /// Batchnorm running statistics, flattened.
  std::vector<double> buffers() const;
  void set_buffers(std::span<const double> flat);

 private:
  int d_, k_, h_;
  double dropout_;
  Eigen::MatrixXd w1x_, w1a_, w2_, w3_;
  Eigen::VectorXd b1_, bn1_gamma_, bn1_beta_;
  Eigen::VectorXd b2_, bn2_gamma_, bn2_beta_;
  Eigen::VectorXd b3_;
  Eigen::ArrayXd bn1_rmean_, bn1_rvar_, bn2_rmean_, bn2_rvar_;
};

/// Deterministic single-pair embedding (eval mode).
std::vector<double> embed_forward(const EmbeddingNet& net,
                                  const ContextVector& x, ActionId a);

/// Reward prediction r_hat = f(x, a) . x (eval mode).
double predict_reward(const EmbeddingNet& net, const ContextVector& x,
                      ActionId a);

/// Model rewards for every (context, action) pair as an n x K matrix,
/// computed batched.
estimators::ActionProbs predict_reward_matrix(
    const EmbeddingNet& net, const std::vector<ContextVector>& contexts,
    int num_actions);

struct PosteriorFitConfig {
  int epochs = 1;
  int batch_size = 256;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

/// Multinomial softmax model of the action posterior, with features
/// concat(x, e) plus an intercept. Fit by minibatch gradient descent on
/// cross-entropy with an L2 penalty; refitting warm-starts from the current
/// weights.
class PosteriorModel final : public estimators::ActionPosterior {
 public:
  PosteriorModel() = default;
  PosteriorModel(int context_dim, int embed_dim, int num_actions);

  int num_actions() const override { return k_; }
  int context_dim() const { return d_; }
  int embed_dim() const { return de_; }
  int feature_dim() const { return d_ + de_; }

  /// Batched class probabilities, rows summing to 1.
  Eigen::MatrixXd probs_matrix(const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& e) const;
  void probs(const ContextVector& x, std::span<const double> embedding,
             std::span<double> out) const override;

  void fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& e,
           const std::vector<int>& labels, const PosteriorFitConfig& config,
           Rng& rng);

  const Eigen::MatrixXd& weights() const { return u_; }  // K x (d + de)
  const Eigen::VectorXd& intercept() const { return c_; }
  void set_weights(Eigen::MatrixXd u, Eigen::VectorXd c);

 private:
  int d_ = 0, de_ = 0, k_ = 0;
  Eigen::MatrixXd u_;  // K x feature_dim
  Eigen::VectorXd c_;  // K
};

/// Convenience wrapper fitting a fresh posterior to convergence on (x, e)
/// feature pairs.
PosteriorModel fit_posterior(
    const std::vector<std::pair<ContextVector, std::vector<double>>>& features,
    const std::vector<ActionId>& labels, int num_actions,
    const PosteriorFitConfig& config, RngSeed seed);

/// The combined training objective and its pieces:
///   total = l_r + rho * l_bias + gamma * l_var.
struct LossBreakdown {
  double l_r = 0.0;
  double l_bias = 0.0;
  double l_var = 0.0;
  double total = 0.0;
  double rho = 0.0;
  double gamma = 0.0;
};

/// Mean squared reward prediction error on a batch (eval-mode forward).
double loss_reward(const Dataset& batch, const EmbeddingNet& net);

/// Squared empirical bias bound:
///   ((1/B) Sum_k Sum_{i<j} mu(i|x_k,e_k) mu(j|x_k,e_k) |w(x_k,j)-w(x_k,i)|)^2.
double loss_bias(const Dataset& batch, const EmbeddingNet& net,
                 const PosteriorModel& posterior, const Policy& pi,
                 const Policy& mu);

/// Empirical variance bound:
///   (1/B^2) Sum_i r_i^2 * Sum_a mu(a|x_i,e_i)^2 * Sum_a w(x_i,a)^2,
/// where r_i is the predicted reward by default and the logged reward when
/// use_predicted_reward is false.
double loss_var(const Dataset& batch, const EmbeddingNet& net,
                const PosteriorModel& posterior, const Policy& pi,
                const Policy& mu, bool use_predicted_reward = true);

LossBreakdown loss_total(const Dataset& batch, const EmbeddingNet& net,
                         const PosteriorModel& posterior, const Policy& pi,
                         const Policy& mu, double rho, double gamma,
                         bool use_predicted_reward = true);

/// Analytic gradient of the combined loss with respect to every network
/// parameter, evaluated with dropout off and batchnorm frozen (the same
/// regime a finite-difference probe sees). Flattened in parameters() order.
/// The posterior is held fixed; gradients flow through its embedding input.
std::vector<double> loss_total_gradient(const Dataset& batch,
                                        const EmbeddingNet& net,
                                        const PosteriorModel& posterior,
                                        const Policy& pi, const Policy& mu,
                                        double rho, double gamma,
                                        bool use_predicted_reward = true);

/// Renyi entropy of order 2: -log Sum_i p_i^2.
double collision_entropy(std::span<const double> p);

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-3;
  int iterations = 2000;
  double rho = 10.0;
  double gamma = 0.1;
  RngSeed seed = 0;
  int posterior_refit_epochs = 2;
  int posterior_final_epochs = 200;
  double posterior_lr = 0.5;
  double posterior_l2 = 1e-4;
  int hidden_width = 128;
  double dropout = 0.2;
  bool var_loss_uses_predicted_reward = true;
  // Refit the in-loop posterior from scratch each iteration. A warm-started
  // posterior tracks the moving embeddings so closely that the embedding
  // gradients learn to exploit its blind spots, which biases the final
  // estimator; fresh refits keep the in-loop model blunt.
  bool posterior_warm_start = false;

  void validate() const;
};

struct TrainedModels {
  EmbeddingNet net;
  PosteriorModel posterior;
};

/// Runs the alternating training loop: per iteration, sample a minibatch,
/// embed it (train mode), warm-refit the posterior on the batch, take one
/// gradient step on the embedding parameters with the posterior held fixed
/// (gradients flow through the posterior's embedding input). After the loop
/// the posterior is refit on all n eval-mode embeddings. Throws
/// TrainingDiverged on a non-finite loss.
TrainedModels train_embeddings(const Dataset& data, const Policy& pi,
                               const Policy& mu, const TrainConfig& config);
TrainedModels train_embeddings(const Dataset& data,
                               const estimators::ActionProbs& pi,
                               const estimators::ActionProbs& mu,
                               const TrainConfig& config);

/// MIPS estimate with the trained posterior applied to eval-mode embeddings
/// of every logged (context, action) pair.
estimators::EstimateReport cael_mips_estimate(const Dataset& data,
                                              const Policy& pi,
                                              const Policy& mu,
                                              const EmbeddingNet& net,
                                              const PosteriorModel& posterior);
estimators::EstimateReport cael_mips_estimate(
    const Dataset& data, const estimators::ActionProbs& pi,
    const estimators::ActionProbs& mu, const EmbeddingNet& net,
    const PosteriorModel& posterior);

/// Checkpoint IO: a small JSON header (dimensions, tensor manifest) followed
/// by raw little-endian float64 tensors. Stable across versions.
void save_checkpoint(const EmbeddingNet& net, const PosteriorModel& posterior,
                     const std::string& path);
TrainedModels load_checkpoint(const std::string& path);

}  // namespace cael::models
