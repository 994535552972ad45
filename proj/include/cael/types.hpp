#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cael/errors.hpp"
#include "cael/rng.hpp"

namespace cael {

using ContextVector = std::vector<double>;
using ActionId = int;

/// Tolerance for probability-vector validation.
inline constexpr double kProbTolerance = 1e-9;

/// Throws InvalidArgument unless p is a probability vector: no negative
/// entries and sum within kProbTolerance of 1. Degenerate 0/1 vectors are
/// legal.
void check_simplex(std::span<const double> p);

/// One logged interaction: the context shown, the action the behavior policy
/// took, the observed reward, and the probability the behavior policy
/// assigned to that action. The embedding slot is populated only when the
/// log carries pre-computed action embeddings.
struct LoggedSample {
  ContextVector context;
  ActionId action = 0;
  double reward = 0.0;
  double behavior_propensity = 1.0;
  std::optional<std::vector<double>> embedding;
};

/// An iid collection of logged samples with its declared dimensions.
struct Dataset {
  std::vector<LoggedSample> samples;
  int context_dim = 0;
  int num_actions = 0;

  int size() const { return static_cast<int>(samples.size()); }

  /// Checks the container invariants: non-empty, consistent context width,
  /// actions in [0, num_actions), propensities in (0, 1], finite rewards.
  void validate() const;
};

/// A conditional distribution over actions given a context.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual int num_actions() const = 0;

  /// Writes the K action probabilities for context x into out.
  virtual void probs(const ContextVector& x, std::span<double> out) const = 0;

  /// Single-action probability; concrete policies may override with a
  /// cheaper path.
  virtual double prob(const ContextVector& x, ActionId a) const;

  std::vector<double> probs_vec(const ContextVector& x) const;
};

}  // namespace cael
