#include "cael/policies.hpp"

#include <string>
#include <utility>

namespace cael {

UniformPolicy::UniformPolicy(int num_actions) : k_(num_actions) {
  if (num_actions < 1) {
    throw InvalidArgument("uniform_policy: need at least one action");
  }
}

void UniformPolicy::probs(const ContextVector&, std::span<double> out) const {
  if (static_cast<int>(out.size()) != k_) {
    throw InvalidArgument("probs: output span has wrong length");
  }
  const double p = 1.0 / static_cast<double>(k_);
  for (double& v : out) v = p;
}

double UniformPolicy::prob(const ContextVector&, ActionId a) const {
  if (a < 0 || a >= k_) throw InvalidArgument("action index out of range");
  return 1.0 / static_cast<double>(k_);
}

EpsilonGreedyPolicy::EpsilonGreedyPolicy(MeanRewardFn q, double epsilon,
                                         int num_actions)
    : q_(std::move(q)), epsilon_(epsilon), k_(num_actions) {
  if (num_actions < 1) {
    throw InvalidArgument("epsilon_greedy_policy: need at least one action");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw InvalidArgument("epsilon_greedy_policy: epsilon outside [0, 1]");
  }
  if (!q_) throw InvalidArgument("epsilon_greedy_policy: null reward function");
}

ActionId EpsilonGreedyPolicy::greedy_action(const ContextVector& x) const {
  ActionId best = 0;
  double best_q = q_(x, 0);
  for (ActionId a = 1; a < k_; ++a) {
    const double v = q_(x, a);
    if (v > best_q) {  // strict: earliest index wins ties
      best_q = v;
      best = a;
    }
  }
  return best;
}

void EpsilonGreedyPolicy::probs(const ContextVector& x,
                                std::span<double> out) const {
  if (static_cast<int>(out.size()) != k_) {
    throw InvalidArgument("probs: output span has wrong length");
  }
  const double base = epsilon_ / static_cast<double>(k_);
  for (double& v : out) v = base;
  out[static_cast<std::size_t>(greedy_action(x))] += 1.0 - epsilon_;
}

double EpsilonGreedyPolicy::prob(const ContextVector& x, ActionId a) const {
  if (a < 0 || a >= k_) throw InvalidArgument("action index out of range");
  const double base = epsilon_ / static_cast<double>(k_);
  return a == greedy_action(x) ? base + 1.0 - epsilon_ : base;
}

UniformPolicy uniform_policy(int num_actions) {
  return UniformPolicy(num_actions);
}

EpsilonGreedyPolicy epsilon_greedy_policy(MeanRewardFn q, double epsilon,
                                          int num_actions) {
  return EpsilonGreedyPolicy(std::move(q), epsilon, num_actions);
}

double ips_weight(const Policy& pi, const Policy& mu, const ContextVector& x,
                  ActionId a) {
  const double p = pi.prob(x, a);
  const double m = mu.prob(x, a);
  if (m <= 0.0) {
    if (p == 0.0) return 0.0;
    throw UnsupportedAction("action " + std::to_string(a) +
                            " has zero behavior probability but nonzero "
                            "target probability");
  }
  return p / m;
}

}  // namespace cael
