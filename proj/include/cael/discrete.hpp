#pragma once

#include "cael/rng.hpp"
#include "cael/types.hpp"

namespace cael::oracle {

/// A fully enumerable bandit instance: finitely many contexts, actions,
/// embedding values, and reward atoms, with every conditional distribution
/// stored as an explicit table. Small enough that values, biases, and
/// variances can be computed by exhaustive summation.
struct DiscreteInstance {
  std::vector<ContextVector> contexts;  // nominal feature vectors
  std::vector<double> context_pmf;      // p(x)
  int num_actions = 0;
  int num_embeddings = 0;
  std::vector<double> reward_atoms;  // shared support of the reward

  // Flattened conditional tables.
  std::vector<double> embed_pmf;   // [x][a][e] = p(e | x, a)
  std::vector<double> reward_pmf;  // [x][a][e][s] = p(atom s | x, a, e)
  std::vector<double> behavior;    // [x][a] = mu(a | x)
  std::vector<double> target;      // [x][a] = pi(a | x)

  int num_contexts() const { return static_cast<int>(contexts.size()); }
  int num_reward_atoms() const { return static_cast<int>(reward_atoms.size()); }

  double p_x(int x) const { return context_pmf[static_cast<std::size_t>(x)]; }
  double mu(int x, int a) const {
    return behavior[static_cast<std::size_t>(x) * num_actions + a];
  }
  double pi(int x, int a) const {
    return target[static_cast<std::size_t>(x) * num_actions + a];
  }
  double pe(int x, int a, int e) const {
    return embed_pmf[(static_cast<std::size_t>(x) * num_actions + a) *
                         num_embeddings +
                     e];
  }
  double pr(int x, int a, int e, int s) const {
    return reward_pmf[((static_cast<std::size_t>(x) * num_actions + a) *
                           num_embeddings +
                       e) *
                          num_reward_atoms() +
                      s];
  }

  /// E[R | x, a, e].
  double q(int x, int a, int e) const;
  /// E[R^2 | x, a, e].
  double r2(int x, int a, int e) const;
  /// Var[R | x, a, e].
  double reward_var(int x, int a, int e) const;
  /// E[R | x, a], embeddings marginalized out.
  double q_xa(int x, int a) const;
  /// Importance weight pi/mu; throws UnsupportedAction when mu is zero but
  /// pi is not, returns 0 when both are zero.
  double w(int x, int a) const;
  /// Marginal embedding probability under the behavior policy,
  /// p(e | x, mu) = Sum_a mu(a|x) p(e|x,a).
  double pe_marginal_mu(int x, int e) const;

  bool full_support() const;
  /// True when the reward distribution is the same for every action that can
  /// reach a given (context, embedding) pair, i.e. the embedding carries all
  /// reward-relevant action information.
  bool no_direct_effect(double tol = 1e-12) const;

  /// Checks every stored pmf sums to 1 within 1e-12 and entries are valid.
  void validate() const;
};

/// The action posterior mu(a | x, e) = mu(a|x) p(e|x,a) / p(e|x,mu),
/// tabulated for every (x, e) with positive marginal probability.
struct ExactPosterior {
  int num_contexts = 0;
  int num_actions = 0;
  int num_embeddings = 0;
  std::vector<double> table;  // [x][e][a]

  static ExactPosterior from(const DiscreteInstance& inst);

  double prob(int x, int e, int a) const {
    return table[(static_cast<std::size_t>(x) * num_embeddings + e) *
                     num_actions +
                 a];
  }
};

/// Controls for the random instance generator used by property tests and
/// the verification suite.
struct RandomInstanceOptions {
  int max_contexts = 4;
  int max_actions = 5;
  int max_embeddings = 4;
  int max_reward_atoms = 3;
  double reward_lo = 0.0;
  double reward_hi = 10.0;
  bool require_no_direct_effect = false;
};

/// Draws a random instance within the given bounds. Every pmf entry is
/// strictly positive, so overlap always holds.
DiscreteInstance random_instance(Rng& rng, const RandomInstanceOptions& opt);

}  // namespace cael::oracle
