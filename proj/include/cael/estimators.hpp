#pragma once

#include <functional>
#include <string>

#include "cael/discrete.hpp"
#include "cael/types.hpp"

namespace cael::estimators {

/// A point estimate of v(pi) together with the sample size it used.
struct EstimateReport {
  double value = 0.0;
  std::string estimator_name;
  int n = 0;
};

/// Dense n x K matrix of per-sample action probabilities, row-major.
/// Used both for target policies evaluated on a dataset and for externally
/// supplied per-row probabilities (e.g. logged-experiment targets).
struct ActionProbs {
  int n = 0;
  int K = 0;
  std::vector<double> p;

  double at(int i, int a) const {
    return p[static_cast<std::size_t>(i) * K + a];
  }
  std::span<const double> row(int i) const {
    return {&p[static_cast<std::size_t>(i) * K], static_cast<std::size_t>(K)};
  }

  /// Evaluates pi on every context of the dataset. Each row is validated as
  /// a probability vector.
  static ActionProbs evaluate(const Policy& pi, const Dataset& data);

  /// Behavior probabilities: pi evaluated on every context, with the logged
  /// action's entry replaced by the recorded behavior propensity. Real-world
  /// logs carry exact propensities that a refit policy would not reproduce.
  static ActionProbs behavior(const Policy& mu, const Dataset& data);
};

/// Per-sample marginal importance weights w(x_i, e_i).
struct MarginalWeightTable {
  std::vector<double> weights;
  int size() const { return static_cast<int>(weights.size()); }
};

/// Anything that yields an action posterior given a context and an
/// embedding. Fitted models implement this; tests may stub it.
class ActionPosterior {
 public:
  virtual ~ActionPosterior() = default;
  virtual int num_actions() const = 0;
  virtual void probs(const ContextVector& x, std::span<const double> embedding,
                     std::span<double> out) const = 0;
};

/// Inverse-propensity-scoring estimate
///   (1/n) Sum_i pi(A_i|X_i) / mu_i * R_i
/// with mu_i the logged behavior propensity.
EstimateReport ips_estimate(const Dataset& data, const Policy& pi);
EstimateReport ips_estimate(const Dataset& data, const ActionProbs& pi);

/// Direct-method estimate (1/n) Sum_i Sum_a pi(a|x_i) q_hat(x_i, a).
using RewardModelFn = std::function<double(const ContextVector&, ActionId)>;
EstimateReport dm_estimate(const std::vector<ContextVector>& contexts,
                           const Policy& pi, const RewardModelFn& q_hat,
                           int num_actions);
/// Overload taking a precomputed n x K matrix of model rewards.
EstimateReport dm_estimate(const std::vector<ContextVector>& contexts,
                           const Policy& pi, const ActionProbs& q_hat_matrix);
/// Overload for per-row target probabilities (logged-experiment targets).
EstimateReport dm_estimate(const ActionProbs& pi,
                           const ActionProbs& q_hat_matrix);

/// Marginal weights w(x_i, e_i) = Sum_a posterior(a|x_i,e_i) * pi(a|x_i) /
/// mu(a|x_i). The logged propensity supplies mu for the sampled action; the
/// behavior policy object supplies it for the others. Throws
/// UnsupportedAction when the posterior puts mass on an action with zero
/// behavior probability.
MarginalWeightTable marginal_weights(
    const Dataset& data, const Policy& pi, const ActionPosterior& posterior,
    const std::vector<std::vector<double>>& embeddings, const Policy& mu);
MarginalWeightTable marginal_weights(
    const Dataset& data, const ActionProbs& pi,
    const ActionPosterior& posterior,
    const std::vector<std::vector<double>>& embeddings, const ActionProbs& mu);

/// Marginalized-IPS estimate (1/n) Sum_i w(x_i, e_i) R_i from precomputed
/// marginal weights; the table must come from the same dataset.
EstimateReport mips_estimate(const Dataset& data,
                             const MarginalWeightTable& weights);

/// The three exact components of Var[v_ips] on an enumerable instance with
/// dataset size n: reward noise (1/n)E[w^2 Var[R|X,A]], across-context
/// variance of the mean weighted reward, and mean within-context variance
/// over actions (each scaled by 1/n so the three sum to the estimator
/// variance).
struct IpsVarianceTerms {
  double reward_noise = 0.0;
  double across_contexts = 0.0;
  double across_actions = 0.0;
  double total() const { return reward_noise + across_contexts + across_actions; }
};
IpsVarianceTerms ips_variance_terms(const oracle::DiscreteInstance& inst,
                                    int n);

/// Magnitude of the IPS support bias,
///   E[ Sum_{a in U(X,mu)} pi(a|X) q(X,a) ],
/// where U is the set of actions the behavior policy never plays. Zero under
/// full support.
double ips_bias_unsupported(const oracle::DiscreteInstance& inst);

}  // namespace cael::estimators
