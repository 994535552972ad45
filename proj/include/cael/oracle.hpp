#pragma once

#include <functional>
#include <string>

#include "cael/discrete.hpp"

namespace cael::oracle {

/// v(policy) = Sum_{x,a,e} p(x) policy(a|x) p(e|x,a) q(x,a,e); the policy
/// table is [x][a] row-major over the instance's contexts.
double exact_value(const DiscreteInstance& inst,
                   std::span<const double> policy_table);
double exact_value_target(const DiscreteInstance& inst);
double exact_value_behavior(const DiscreteInstance& inst);

/// E[v_mips] for a size-1 dataset, enumerated over every (x, a, e, r) atom
/// with the exact posterior supplying the marginal weights.
double exact_mips_expectation(const DiscreteInstance& inst);

/// The MIPS bias computed two independent ways: by the pairwise
/// posterior-covariance decomposition and by direct enumeration of
/// E[v_mips] - v(pi). Construction fails if the two paths disagree beyond
/// 1e-10.
struct MipsBias {
  double decomposition = 0.0;
  double direct = 0.0;
  double value() const { return direct; }
};
MipsBias exact_mips_bias(const DiscreteInstance& inst);

/// Reward-range bound on |bias|:
///   (b - a) * E[ Sum_{i<j} mu(i|X,E) mu(j|X,E) |w(X,j) - w(X,i)| ].
double bias_upper_bound(const DiscreteInstance& inst, double reward_lo,
                        double reward_hi);

/// Exact estimator variances for an iid dataset of size n (single-sample
/// term variance divided by n).
double exact_ips_variance(const DiscreteInstance& inst, int n);
double exact_mips_variance(const DiscreteInstance& inst, int n);

/// Variance reduction Var[v_ips] - Var[v_mips] under the no-direct-effect
/// condition, evaluated as (1/n) E[E[R^2|X,E] Var_{mu(.|X,E)}[w(X,A)]] and
/// cross-checked against the subtraction of the two exact variances (must
/// agree within 1e-10). Throws InvalidArgument when the instance violates
/// no-direct-effect.
double exact_variance_reduction(const DiscreteInstance& inst, int n);

/// Left side: exact Var[v_mips]. Right side: Var[v_ips] +
/// (1/n) E[R^2 Sum_a mu(a|X,E)^2 Sum_a w(X,a)^2]. The bound lhs <= rhs is
/// asserted. Same no-direct-effect precondition as the variance reduction.
struct VarianceBound {
  double lhs = 0.0;
  double rhs = 0.0;
};
VarianceBound variance_upper_bound_gap(const DiscreteInstance& inst, int n);

/// Central finite differences of a deterministic scalar function.
using ScalarFn = std::function<double(std::span<const double>)>;
std::vector<double> finite_difference_gradient(const ScalarFn& fn,
                                               std::span<const double> params,
                                               double h);

/// One aggregated identity check over many random instances.
struct VerifyCheck {
  std::string name;
  bool pass = false;
  double worst = 0.0;  // largest deviation (or bound violation) observed
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyReport {
  int instances = 0;
  std::vector<VerifyCheck> checks;
  bool all_pass() const;
  std::string to_string() const;  // one line per check, PASS/FAIL prefixed
};

/// Runs the identity suite on `instances` random instances (plus the same
/// number of no-direct-effect instances for the variance identities).
VerifyReport run_verification(int instances, RngSeed seed);

}  // namespace cael::oracle
