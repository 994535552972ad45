#include "cael/oracle.hpp"

#include <cmath>
#include <sstream>

namespace cael::oracle {

namespace {

constexpr double kIdentityTol = 1e-10;

// Marginal weight w(x, e) = Sum_a post(a|x,e) w(x, a).
double marginal_weight(const DiscreteInstance& inst, const ExactPosterior& post,
                       int x, int e) {
  double w = 0.0;
  for (int a = 0; a < inst.num_actions; ++a) {
    const double mass = post.prob(x, e, a);
    if (mass > 0.0) w += mass * inst.w(x, a);
  }
  return w;
}

// Mean and second moment of the single-sample estimator term under the
// logging distribution, for a caller-supplied term value(x, a, e, r).
struct Moments {
  double mean = 0.0;
  double second = 0.0;
  double variance() const { return second - mean * mean; }
};

template <typename TermFn>
Moments enumerate_term(const DiscreteInstance& inst, TermFn&& term) {
  Moments m;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    const double px = inst.p_x(x);
    for (int a = 0; a < inst.num_actions; ++a) {
      const double pa = inst.mu(x, a);
      if (pa <= 0.0) continue;
      for (int e = 0; e < inst.num_embeddings; ++e) {
        const double pe = inst.pe(x, a, e);
        if (pe <= 0.0) continue;
        for (int s = 0; s < inst.num_reward_atoms(); ++s) {
          const double pr = inst.pr(x, a, e, s);
          if (pr <= 0.0) continue;
          const double p = px * pa * pe * pr;
          const double v =
              term(x, a, e, inst.reward_atoms[static_cast<std::size_t>(s)]);
          m.mean += p * v;
          m.second += p * v * v;
        }
      }
    }
  }
  return m;
}

}  // namespace

double exact_value(const DiscreteInstance& inst,
                   std::span<const double> policy_table) {
  if (static_cast<int>(policy_table.size()) !=
      inst.num_contexts() * inst.num_actions) {
    throw InvalidArgument("exact_value: policy table shape mismatch");
  }
  double v = 0.0;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int a = 0; a < inst.num_actions; ++a) {
      const double pa =
          policy_table[static_cast<std::size_t>(x) * inst.num_actions + a];
      if (pa <= 0.0) continue;
      for (int e = 0; e < inst.num_embeddings; ++e) {
        const double pe = inst.pe(x, a, e);
        if (pe > 0.0) v += inst.p_x(x) * pa * pe * inst.q(x, a, e);
      }
    }
  }
  return v;
}

double exact_value_target(const DiscreteInstance& inst) {
  return exact_value(inst, inst.target);
}

double exact_value_behavior(const DiscreteInstance& inst) {
  return exact_value(inst, inst.behavior);
}

double exact_mips_expectation(const DiscreteInstance& inst) {
  const ExactPosterior post = ExactPosterior::from(inst);
  return enumerate_term(inst,
                        [&](int x, int, int e, double r) {
                          return marginal_weight(inst, post, x, e) * r;
                        })
      .mean;
}

MipsBias exact_mips_bias(const DiscreteInstance& inst) {
  const ExactPosterior post = ExactPosterior::from(inst);
  MipsBias out;

  // Path 1: pairwise decomposition over (x, e) under the logging marginal.
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int e = 0; e < inst.num_embeddings; ++e) {
      const double pxe = inst.p_x(x) * inst.pe_marginal_mu(x, e);
      if (pxe <= 0.0) continue;
      double inner = 0.0;
      for (int i = 0; i < inst.num_actions; ++i) {
        for (int j = i + 1; j < inst.num_actions; ++j) {
          inner += post.prob(x, e, i) * post.prob(x, e, j) *
                   (inst.q(x, i, e) - inst.q(x, j, e)) *
                   (inst.w(x, j) - inst.w(x, i));
        }
      }
      out.decomposition += pxe * inner;
    }
  }

  // Path 2: direct enumeration of E[v_mips] - v(pi).
  out.direct = exact_mips_expectation(inst) - exact_value_target(inst);

  if (std::abs(out.decomposition - out.direct) > kIdentityTol) {
    std::ostringstream msg;
    msg << "MIPS bias decomposition disagrees with direct enumeration: "
        << out.decomposition << " vs " << out.direct;
    throw Error(msg.str());
  }
  return out;
}

double bias_upper_bound(const DiscreteInstance& inst, double reward_lo,
                        double reward_hi) {
  if (!(reward_hi >= reward_lo)) {
    throw InvalidArgument("bias_upper_bound: empty reward range");
  }
  const ExactPosterior post = ExactPosterior::from(inst);
  double expectation = 0.0;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int e = 0; e < inst.num_embeddings; ++e) {
      const double pxe = inst.p_x(x) * inst.pe_marginal_mu(x, e);
      if (pxe <= 0.0) continue;
      double inner = 0.0;
      for (int i = 0; i < inst.num_actions; ++i) {
        for (int j = i + 1; j < inst.num_actions; ++j) {
          inner += post.prob(x, e, i) * post.prob(x, e, j) *
                   std::abs(inst.w(x, j) - inst.w(x, i));
        }
      }
      expectation += pxe * inner;
    }
  }
  return (reward_hi - reward_lo) * expectation;
}

double exact_ips_variance(const DiscreteInstance& inst, int n) {
  if (n < 1) throw InvalidArgument("exact_ips_variance: n must be positive");
  const Moments m = enumerate_term(
      inst, [&](int x, int a, int, double r) { return inst.w(x, a) * r; });
  return m.variance() / static_cast<double>(n);
}

double exact_mips_variance(const DiscreteInstance& inst, int n) {
  if (n < 1) throw InvalidArgument("exact_mips_variance: n must be positive");
  const ExactPosterior post = ExactPosterior::from(inst);
  const Moments m = enumerate_term(inst, [&](int x, int, int e, double r) {
    return marginal_weight(inst, post, x, e) * r;
  });
  return m.variance() / static_cast<double>(n);
}

double exact_variance_reduction(const DiscreteInstance& inst, int n) {
  if (n < 1) throw InvalidArgument("n must be positive");
  if (!inst.no_direct_effect()) {
    throw InvalidArgument(
        "variance reduction identity requires the no-direct-effect condition");
  }
  const ExactPosterior post = ExactPosterior::from(inst);

  // Identity path: (1/n) E_{x,e~mu}[ E[R^2|x,e] * Var_{mu(.|x,e)}[w(x,A)] ].
  double identity = 0.0;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int e = 0; e < inst.num_embeddings; ++e) {
      const double pxe = inst.p_x(x) * inst.pe_marginal_mu(x, e);
      if (pxe <= 0.0) continue;
      double r2 = 0.0;       // E[R^2 | x, e]
      double wmean = 0.0;    // E_post[w]
      double wsecond = 0.0;  // E_post[w^2]
      for (int a = 0; a < inst.num_actions; ++a) {
        const double mass = post.prob(x, e, a);
        if (mass <= 0.0) continue;
        r2 += mass * inst.r2(x, a, e);
        const double w = inst.w(x, a);
        wmean += mass * w;
        wsecond += mass * w * w;
      }
      identity += pxe * r2 * (wsecond - wmean * wmean);
    }
  }
  identity /= static_cast<double>(n);

  const double subtraction =
      exact_ips_variance(inst, n) - exact_mips_variance(inst, n);
  if (std::abs(identity - subtraction) > kIdentityTol) {
    std::ostringstream msg;
    msg << "variance reduction identity disagrees with direct subtraction: "
        << identity << " vs " << subtraction;
    throw Error(msg.str());
  }
  return identity;
}

VarianceBound variance_upper_bound_gap(const DiscreteInstance& inst, int n) {
  if (n < 1) throw InvalidArgument("n must be positive");
  if (!inst.no_direct_effect()) {
    throw InvalidArgument(
        "variance bound requires the no-direct-effect condition");
  }
  const ExactPosterior post = ExactPosterior::from(inst);

  // Per-context Sum_a w(x,a)^2 and per-(x,e) collision factor.
  std::vector<double> sumw2(static_cast<std::size_t>(inst.num_contexts()));
  for (int x = 0; x < inst.num_contexts(); ++x) {
    double s = 0.0;
    for (int a = 0; a < inst.num_actions; ++a) {
      const double w = inst.w(x, a);
      s += w * w;
    }
    sumw2[static_cast<std::size_t>(x)] = s;
  }

  const Moments slack = enumerate_term(inst, [&](int x, int, int e, double r) {
    double collision = 0.0;
    for (int a = 0; a < inst.num_actions; ++a) {
      const double mass = post.prob(x, e, a);
      collision += mass * mass;
    }
    // The enumerator weights by probability; the term itself is
    // R^2 * collision * Sum_a w^2 so only the mean is used.
    return r * r * collision * sumw2[static_cast<std::size_t>(x)];
  });

  VarianceBound out;
  out.lhs = exact_mips_variance(inst, n);
  out.rhs = exact_ips_variance(inst, n) + slack.mean / static_cast<double>(n);
  if (out.lhs > out.rhs + 1e-12) {
    std::ostringstream msg;
    msg << "variance upper bound violated: " << out.lhs << " > " << out.rhs;
    throw Error(msg.str());
  }
  return out;
}

std::vector<double> finite_difference_gradient(const ScalarFn& fn,
                                               std::span<const double> params,
                                               double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite differences need h > 0");
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + h;
    const double up = fn(theta);
    theta[i] = orig - h;
    const double down = fn(theta);
    theta[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error("finite differences hit a non-finite loss value");
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

bool VerifyReport::all_pass() const {
  for (const VerifyCheck& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

std::string VerifyReport::to_string() const {
  std::ostringstream os;
  for (const VerifyCheck& c : checks) {
    os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail
       << "\n";
  }
  return os.str();
}

VerifyReport run_verification(int instances, RngSeed seed) {
  if (instances < 1) throw InvalidArgument("need at least one instance");
  VerifyReport report;
  report.instances = instances;
  Rng rng(derive_seed(seed, 0x0e11f));

  VerifyCheck bias_check{"mips-bias-decomposition", true, 0.0, kIdentityTol, ""};
  VerifyCheck bias_bound_check{"bias-upper-bound-dominates", true, 0.0, 0.0, ""};
  VerifyCheck var_check{"variance-reduction-identity", true, 0.0, kIdentityTol,
                        ""};
  VerifyCheck var_bound_check{"variance-upper-bound-dominates", true, 0.0, 0.0,
                              ""};
  VerifyCheck mean_one{"marginal-weight-mean-one", true, 0.0, kIdentityTol, ""};

  RandomInstanceOptions general;
  RandomInstanceOptions nde;
  nde.require_no_direct_effect = true;

  for (int i = 0; i < instances; ++i) {
    {
      const DiscreteInstance inst = random_instance(rng, general);
      MipsBias bias;
      try {
        bias = exact_mips_bias(inst);
      } catch (const Error& err) {
        bias_check.pass = false;
        bias_check.detail = err.what();
        continue;
      }
      const double gap = std::abs(bias.decomposition - bias.direct);
      bias_check.worst = std::max(bias_check.worst, gap);

      const double bound = bias_upper_bound(inst, 0.0, 10.0);
      const double violation = std::abs(bias.value()) - bound;
      bias_bound_check.worst = std::max(bias_bound_check.worst, violation);
      if (violation > 1e-12) bias_bound_check.pass = false;

      // E_{(x,e)~mu}[w(x,e)] must be exactly 1 under the exact posterior.
      const ExactPosterior post = ExactPosterior::from(inst);
      double mean_w = 0.0;
      for (int x = 0; x < inst.num_contexts(); ++x) {
        for (int e = 0; e < inst.num_embeddings; ++e) {
          const double pxe = inst.p_x(x) * inst.pe_marginal_mu(x, e);
          if (pxe > 0.0) mean_w += pxe * marginal_weight(inst, post, x, e);
        }
      }
      mean_one.worst = std::max(mean_one.worst, std::abs(mean_w - 1.0));
      if (std::abs(mean_w - 1.0) > kIdentityTol) mean_one.pass = false;
    }
    {
      const DiscreteInstance inst = random_instance(rng, nde);
      try {
        const double reduction = exact_variance_reduction(inst, 3);
        const double subtraction =
            exact_ips_variance(inst, 3) - exact_mips_variance(inst, 3);
        var_check.worst =
            std::max(var_check.worst, std::abs(reduction - subtraction));
      } catch (const Error& err) {
        var_check.pass = false;
        var_check.detail = err.what();
      }
      try {
        const VarianceBound vb = variance_upper_bound_gap(inst, 3);
        var_bound_check.worst =
            std::max(var_bound_check.worst, vb.lhs - vb.rhs);
        if (vb.lhs > vb.rhs + 1e-12) var_bound_check.pass = false;
      } catch (const Error& err) {
        var_bound_check.pass = false;
        var_bound_check.detail = err.what();
      }
    }
  }

  auto finish = [instances](VerifyCheck& c, const char* kind) {
    if (c.detail.empty()) {
      std::ostringstream os;
      os << kind << " " << c.worst << " over " << instances << " instances";
      if (c.tolerance > 0.0) os << " (tolerance " << c.tolerance << ")";
      c.detail = os.str();
    }
  };
  finish(bias_check, "max |decomposition - direct| =");
  finish(bias_bound_check, "max (|bias| - bound) =");
  finish(var_check, "max |identity - subtraction| =");
  finish(var_bound_check, "max (lhs - rhs) =");
  finish(mean_one, "max |E[w] - 1| =");

  report.checks = {bias_check, bias_bound_check, var_check, var_bound_check,
                   mean_one};
  return report;
}

}  // namespace cael::oracle
