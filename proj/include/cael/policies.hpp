#pragma once

#include <functional>

#include "cael/types.hpp"

namespace cael {

/// Plays every action with probability 1/K regardless of context.
class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int num_actions);

  int num_actions() const override { return k_; }
  void probs(const ContextVector& x, std::span<double> out) const override;
  double prob(const ContextVector& x, ActionId a) const override;

 private:
  int k_;
};

/// Mean-reward callback used by the epsilon-greedy policy.
using MeanRewardFn = std::function<double(const ContextVector&, ActionId)>;

/// Plays argmax_a q(x, a) with probability 1 - eps + eps/K and every other
/// action with probability eps/K. Ties break toward the lowest index.
class EpsilonGreedyPolicy final : public Policy {
 public:
  EpsilonGreedyPolicy(MeanRewardFn q, double epsilon, int num_actions);

  int num_actions() const override { return k_; }
  void probs(const ContextVector& x, std::span<double> out) const override;
  double prob(const ContextVector& x, ActionId a) const override;

  ActionId greedy_action(const ContextVector& x) const;
  double epsilon() const { return epsilon_; }

 private:
  MeanRewardFn q_;
  double epsilon_;
  int k_;
};

UniformPolicy uniform_policy(int num_actions);
EpsilonGreedyPolicy epsilon_greedy_policy(MeanRewardFn q, double epsilon,
                                          int num_actions);

/// Importance weight pi(a|x) / mu(a|x). Throws UnsupportedAction when the
/// behavior probability is zero but the target probability is not; returns
/// 0 when both are zero.
double ips_weight(const Policy& pi, const Policy& mu, const ContextVector& x,
                  ActionId a);

}  // namespace cael
