#include "cael/types.hpp"

#include <cmath>
#include <string>

namespace cael {

void check_simplex(std::span<const double> p) {
  if (p.empty()) throw InvalidArgument("probability vector is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) {
      throw InvalidArgument("probability vector has a negative or NaN entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbTolerance) {
    throw InvalidArgument("probability vector sums to " + std::to_string(sum) +
                          ", expected 1");
  }
}

void Dataset::validate() const {
  if (samples.empty()) throw DataError("dataset is empty");
  if (context_dim <= 0) throw DataError("dataset context_dim must be positive");
  if (num_actions <= 0) throw DataError("dataset num_actions must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LoggedSample& s = samples[i];
    const std::string at = " at sample " + std::to_string(i);
    if (static_cast<int>(s.context.size()) != context_dim) {
      throw DataError("context length mismatch" + at);
    }
    for (double v : s.context) {
      if (!std::isfinite(v)) throw DataError("non-finite context entry" + at);
    }
    if (s.action < 0 || s.action >= num_actions) {
      throw DataError("action out of range" + at);
    }
    if (!(s.behavior_propensity > 0.0 && s.behavior_propensity <= 1.0)) {
      throw DataError("behavior propensity outside (0, 1]" + at);
    }
    if (!std::isfinite(s.reward)) throw DataError("non-finite reward" + at);
  }
}

double Policy::prob(const ContextVector& x, ActionId a) const {
  const int k = num_actions();
  if (a < 0 || a >= k) throw InvalidArgument("action index out of range");
  std::vector<double> p(static_cast<std::size_t>(k));
  probs(x, p);
  return p[static_cast<std::size_t>(a)];
}

std::vector<double> Policy::probs_vec(const ContextVector& x) const {
  std::vector<double> p(static_cast<std::size_t>(num_actions()));
  probs(x, p);
  return p;
}

}  // namespace cael
