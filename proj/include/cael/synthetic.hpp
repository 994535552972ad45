#pragma once

#include "cael/policies.hpp"
#include "cael/types.hpp"

namespace cael::synthetic {

/// Fully specified synthetic bandit environment. Contexts are uniform on
/// [0,1]^d, the mean reward is 10 * exp(-(x[0] - a1)^2) where a1 is the
/// first coordinate of the action's representation, and rewards are normal
/// around the mean with standard deviation reward_std.
class SyntheticEnv {
 public:
  /// Action representation a gets first coordinate (a+1)/K exactly; the
  /// remaining coordinates are drawn once from Unif[0,1] using seed. Only
  /// the first coordinate enters the reward.
  SyntheticEnv(int context_dim, int num_actions, double reward_std,
               RngSeed seed);

  int context_dim() const { return context_dim_; }
  int num_actions() const { return num_actions_; }
  double reward_std() const { return reward_std_; }
  RngSeed seed() const { return seed_; }

  /// Representation of action a (length context_dim).
  std::span<const double> action_rep(ActionId a) const;

  /// Bound q_xa(x, a) suitable for building policies against this env.
  MeanRewardFn mean_reward_fn() const;

 private:
  int context_dim_;
  int num_actions_;
  double reward_std_;
  RngSeed seed_;
  std::vector<double> action_reps_;  // num_actions x context_dim, row-major
};

/// Monte Carlo estimate of a policy's value together with its precision.
struct GroundTruth {
  double value = 0.0;
  long mc_samples = 0;
  double std_error = 0.0;
};

/// Mean reward 10 * exp(-(x[0] - a1)^2).
double expected_reward(const SyntheticEnv& env, const ContextVector& x,
                       ActionId a);

/// Draws n iid logged samples: X ~ Unif[0,1]^d, A ~ mu(.|X),
/// R ~ Normal(q(X,A), reward_std^2); the behavior propensity mu(A|X) is
/// recorded on each sample. Equal seeds give bit-identical datasets.
Dataset generate_dataset(const SyntheticEnv& env, const Policy& mu, int n,
                         RngSeed seed);

/// Ground-truth v(pi) by Monte Carlo over contexts with an exact inner sum
/// over actions. Work is split into fixed-size shards (merged in shard
/// order), so the result does not depend on the number of worker threads.
GroundTruth true_value(const SyntheticEnv& env, const Policy& pi,
                       long mc_contexts, RngSeed seed, int threads = 0);

}  // namespace cael::synthetic
