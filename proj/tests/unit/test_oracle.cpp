#include <doctest.h>

#include <cmath>

#include "cael/estimators.hpp"
#include "cael/oracle.hpp"

using namespace cael;
using namespace cael::oracle;

namespace {

// 2 contexts x 3 actions x 2 embeddings x 2 reward atoms; hand-built,
// everywhere positive, deliberately violating no-direct-effect.
DiscreteInstance fixture_232() {
  DiscreteInstance inst;
  inst.contexts = {{0.2}, {0.8}};
  inst.context_pmf = {0.4, 0.6};
  inst.num_actions = 3;
  inst.num_embeddings = 2;
  inst.reward_atoms = {1.0, 5.0};
  inst.behavior = {0.5, 0.3, 0.2,   //
                   0.25, 0.5, 0.25};
  inst.target = {0.1, 0.6, 0.3,  //
                 0.7, 0.1, 0.2};
  // p(e | x, a), rows (x, a) over e.
  inst.embed_pmf = {0.9, 0.1, 0.4, 0.6, 0.2, 0.8,   // x = 0
                    0.5, 0.5, 0.7, 0.3, 0.1, 0.9};  // x = 1
  // p(reward atom | x, a, e): depends on a, so NDE is violated.
  inst.reward_pmf = {
      0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.5, 0.5, 0.6, 0.4, 0.1, 0.9,  // x = 0
      0.2, 0.8, 0.4, 0.6, 0.9, 0.1, 0.7, 0.3, 0.5, 0.5, 0.3, 0.7,  // x = 1
  };
  inst.validate();
  return inst;
}

DiscreteInstance identity_embedding_instance() {
  // e = a deterministically; the posterior is a point mass and MIPS == IPS.
  DiscreteInstance inst;
  inst.contexts = {{0.0}, {1.0}};
  inst.context_pmf = {0.5, 0.5};
  inst.num_actions = 3;
  inst.num_embeddings = 3;
  inst.reward_atoms = {0.0, 2.0, 7.0};
  inst.behavior = {0.2, 0.5, 0.3, 0.4, 0.4, 0.2};
  inst.target = {0.6, 0.2, 0.2, 0.1, 0.2, 0.7};
  inst.embed_pmf.assign(2 * 3 * 3, 0.0);
  for (int x = 0; x < 2; ++x) {
    for (int a = 0; a < 3; ++a) {
      inst.embed_pmf[(static_cast<std::size_t>(x) * 3 + a) * 3 + a] = 1.0;
    }
  }
  inst.reward_pmf.resize(2 * 3 * 3 * 3);
  Rng rng(2024);
  for (int x = 0; x < 2; ++x) {
    for (int a = 0; a < 3; ++a) {
      for (int e = 0; e < 3; ++e) {
        double u0 = 0.2 + 0.6 * rng.uniform();
        double u1 = (1.0 - u0) * rng.uniform();
        const std::size_t base =
            ((static_cast<std::size_t>(x) * 3 + a) * 3 + e) * 3;
        inst.reward_pmf[base] = u0;
        inst.reward_pmf[base + 1] = u1;
        inst.reward_pmf[base + 2] = 1.0 - u0 - u1;
      }
    }
  }
  inst.validate();
  return inst;
}

}  // namespace

TEST_CASE("exact value: single atom and constant reward") {
  DiscreteInstance inst;
  inst.contexts = {{0.0}};
  inst.context_pmf = {1.0};
  inst.num_actions = 1;
  inst.num_embeddings = 1;
  inst.reward_atoms = {3.5};
  inst.behavior = {1.0};
  inst.target = {1.0};
  inst.embed_pmf = {1.0};
  inst.reward_pmf = {1.0};
  inst.validate();
  CHECK(exact_value_target(inst) == doctest::Approx(3.5).epsilon(1e-15));

  // Constant reward surface: value is that constant under any policy.
  Rng rng(5);
  RandomInstanceOptions opt;
  DiscreteInstance r = random_instance(rng, opt);
  r.reward_atoms.assign(r.reward_atoms.size(), 4.25);
  CHECK(exact_value_target(r) == doctest::Approx(4.25).epsilon(1e-12));
  CHECK(exact_value_behavior(r) == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("exact value matches a Monte Carlo rollout") {
  Rng rng(17);
  RandomInstanceOptions opt;
  const DiscreteInstance inst = random_instance(rng, opt);
  const double exact = exact_value_target(inst);

  Rng mc(99);
  const long m = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < m; ++i) {
    const int x = mc.categorical(inst.context_pmf);
    const int a = mc.categorical(std::span<const double>(
        &inst.target[static_cast<std::size_t>(x) * inst.num_actions],
        static_cast<std::size_t>(inst.num_actions)));
    std::vector<double> pe(static_cast<std::size_t>(inst.num_embeddings));
    for (int e = 0; e < inst.num_embeddings; ++e) pe[e] = inst.pe(x, a, e);
    const int e = mc.categorical(pe);
    std::vector<double> pr(static_cast<std::size_t>(inst.num_reward_atoms()));
    for (int s = 0; s < inst.num_reward_atoms(); ++s) pr[s] = inst.pr(x, a, e, s);
    const double r = inst.reward_atoms[static_cast<std::size_t>(mc.categorical(pr))];
    sum += r;
    sum_sq += r * r;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sum_sq / m - mean * mean) / m);
  CHECK(std::abs(mean - exact) < 3.0 * se);
}

TEST_CASE("exact posterior columns sum to one") {
  Rng rng(31);
  const DiscreteInstance inst = random_instance(rng, {});
  const ExactPosterior post = ExactPosterior::from(inst);
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int e = 0; e < inst.num_embeddings; ++e) {
      if (inst.pe_marginal_mu(x, e) <= 0.0) continue;
      double sum = 0.0;
      for (int a = 0; a < inst.num_actions; ++a) sum += post.prob(x, e, a);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("mips bias: no-direct-effect instances are unbiased") {
  Rng rng(7);
  RandomInstanceOptions opt;
  opt.require_no_direct_effect = true;
  for (int i = 0; i < 20; ++i) {
    const DiscreteInstance inst = random_instance(rng, opt);
    const MipsBias bias = exact_mips_bias(inst);
    CHECK(std::abs(bias.value()) < 1e-10);
    CHECK(std::abs(bias.decomposition) < 1e-10);
  }
}

TEST_CASE("mips bias: pi equal to mu is exactly zero") {
  Rng rng(13);
  DiscreteInstance inst = random_instance(rng, {});
  inst.target = inst.behavior;
  const MipsBias bias = exact_mips_bias(inst);
  CHECK(std::abs(bias.value()) < 1e-12);
}

TEST_CASE("mips bias: dual paths agree and are nonzero on the fixture") {
  const DiscreteInstance inst = fixture_232();
  const MipsBias bias = exact_mips_bias(inst);
  CHECK(std::abs(bias.decomposition - bias.direct) <= 1e-10);
  CHECK(std::abs(bias.value()) > 1e-4);
}

TEST_CASE("bias upper bound dominates and is positive on the fixture") {
  const DiscreteInstance inst = fixture_232();
  const MipsBias bias = exact_mips_bias(inst);
  const double bound = bias_upper_bound(inst, 0.0, 10.0);
  CHECK(bound >= std::abs(bias.value()));
  // Frozen by enumeration of the fixture; guards against regressions.
  CHECK(bound == doctest::Approx(4.2330701975620002).epsilon(1e-9));

  Rng rng(3);
  DiscreteInstance same = random_instance(rng, {});
  same.target = same.behavior;
  CHECK(bias_upper_bound(same, 0.0, 10.0) == doctest::Approx(0.0));
}

TEST_CASE("variance reduction: identity embedding gives zero") {
  const DiscreteInstance inst = identity_embedding_instance();
  REQUIRE(inst.no_direct_effect());
  const double reduction = exact_variance_reduction(inst, 1);
  CHECK(std::abs(reduction) < 1e-12);
  // Point-mass posterior: MIPS variance equals IPS variance.
  CHECK(exact_mips_variance(inst, 1) ==
        doctest::Approx(exact_ips_variance(inst, 1)).epsilon(1e-12));
}

TEST_CASE("variance reduction: constant embedding hand example") {
  // Single context, K = 2, uniform mu, w = (2, 0), E[R^2] = 1, n = 1:
  // the posterior equals mu, Var[w] = 1, so the reduction is 1.
  DiscreteInstance inst;
  inst.contexts = {{0.0}};
  inst.context_pmf = {1.0};
  inst.num_actions = 2;
  inst.num_embeddings = 1;
  inst.reward_atoms = {1.0};  // R = 1 always, E[R^2] = 1
  inst.behavior = {0.5, 0.5};
  inst.target = {1.0, 0.0};
  inst.embed_pmf = {1.0, 1.0};
  inst.reward_pmf = {1.0, 1.0};
  inst.validate();
  REQUIRE(inst.no_direct_effect());
  CHECK(exact_variance_reduction(inst, 1) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("variance reduction: random NDE instances, dual path") {
  Rng rng(23);
  RandomInstanceOptions opt;
  opt.require_no_direct_effect = true;
  for (int i = 0; i < 20; ++i) {
    const DiscreteInstance inst = random_instance(rng, opt);
    for (int n : {1, 4, 32}) {
      const double reduction = exact_variance_reduction(inst, n);
      const double sub = exact_ips_variance(inst, n) -
                         exact_mips_variance(inst, n);
      CHECK(std::abs(reduction - sub) <= 1e-10);
      CHECK(reduction >= -1e-12);  // marginalization never adds variance
    }
  }
}

TEST_CASE("variance reduction rejects NDE violations") {
  const DiscreteInstance inst = fixture_232();
  REQUIRE_FALSE(inst.no_direct_effect());
  CHECK_THROWS_AS(exact_variance_reduction(inst, 1), InvalidArgument);
}

TEST_CASE("variance upper bound holds") {
  Rng rng(29);
  RandomInstanceOptions opt;
  opt.require_no_direct_effect = true;
  for (int i = 0; i < 20; ++i) {
    const DiscreteInstance inst = random_instance(rng, opt);
    const VarianceBound vb = variance_upper_bound_gap(inst, 2);
    CHECK(vb.lhs <= vb.rhs + 1e-12);
  }
  // K = 1: both sides reduce to the single-action identity (weight is a
  // constant w = 1, so Var[MIPS] = Var[IPS] and the slack is E[R^2]/n).
  DiscreteInstance k1;
  k1.contexts = {{0.0}};
  k1.context_pmf = {1.0};
  k1.num_actions = 1;
  k1.num_embeddings = 2;
  k1.reward_atoms = {1.0, 3.0};
  k1.behavior = {1.0};
  k1.target = {1.0};
  k1.embed_pmf = {0.5, 0.5};
  k1.reward_pmf = {0.4, 0.6, 0.4, 0.6};
  k1.validate();
  const VarianceBound vb = variance_upper_bound_gap(k1, 1);
  CHECK(vb.lhs == doctest::Approx(exact_ips_variance(k1, 1)).epsilon(1e-12));
  double er2 = 0.4 * 1.0 + 0.6 * 9.0;
  CHECK(vb.rhs == doctest::Approx(vb.lhs + er2).epsilon(1e-12));
}

TEST_CASE("finite differences on simple functions") {
  const ScalarFn quad = [](std::span<const double> p) {
    return p[0] * p[0] + p[1] * p[1];
  };
  const std::vector<double> at{1.0, 2.0};
  const std::vector<double> g = finite_difference_gradient(quad, at, 1e-6);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));

  const ScalarFn lin = [](std::span<const double> p) {
    return 3.0 * p[0] - 0.5 * p[1] + 2.0;
  };
  const std::vector<double> gl = finite_difference_gradient(lin, at, 1e-6);
  CHECK(gl[0] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(gl[1] == doctest::Approx(-0.5).epsilon(1e-8));
}

TEST_CASE("single-sample MIPS expectation matches the estimator path") {
  // Enumerate every size-1 dataset, run the production mips_estimate on it
  // with the exact posterior, and average by the atom's probability.
  Rng rng(41);
  const DiscreteInstance inst = random_instance(rng, {});
  const ExactPosterior post = ExactPosterior::from(inst);

  class TablePosterior final : public estimators::ActionPosterior {
   public:
    TablePosterior(const DiscreteInstance& inst, const ExactPosterior& post)
        : inst_(inst), post_(post) {}
    int num_actions() const override { return inst_.num_actions; }
    void probs(const ContextVector&, std::span<const double> e,
               std::span<double> out) const override {
      const int x = static_cast<int>(e[0]);
      const int ee = static_cast<int>(e[1]);
      for (int a = 0; a < inst_.num_actions; ++a) {
        out[static_cast<std::size_t>(a)] = post_.prob(x, ee, a);
      }
    }

   private:
    const DiscreteInstance& inst_;
    const ExactPosterior& post_;
  } table_post(inst, post);

  double expect = 0.0;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int a = 0; a < inst.num_actions; ++a) {
      for (int e = 0; e < inst.num_embeddings; ++e) {
        for (int s = 0; s < inst.num_reward_atoms(); ++s) {
          const double p = inst.p_x(x) * inst.mu(x, a) * inst.pe(x, a, e) *
                           inst.pr(x, a, e, s);
          if (p <= 0.0) continue;
          Dataset d;
          d.context_dim = 1;
          d.num_actions = inst.num_actions;
          d.samples.push_back({inst.contexts[static_cast<std::size_t>(x)],
                               a,
                               inst.reward_atoms[static_cast<std::size_t>(s)],
                               inst.mu(x, a),
                               {}});
          estimators::ActionProbs pi, mu;
          pi.n = mu.n = 1;
          pi.K = mu.K = inst.num_actions;
          for (int aa = 0; aa < inst.num_actions; ++aa) {
            pi.p.push_back(inst.pi(x, aa));
            mu.p.push_back(inst.mu(x, aa));
          }
          const std::vector<std::vector<double>> embeddings{
              {double(x), double(e)}};
          const auto weights =
              estimators::marginal_weights(d, pi, table_post, embeddings, mu);
          expect += p * estimators::mips_estimate(d, weights).value;
        }
      }
    }
  }
  CHECK(expect == doctest::Approx(exact_mips_expectation(inst)).epsilon(1e-10));
}

TEST_CASE("ips variance terms sum to the exact variance") {
  Rng rng(55);
  for (int i = 0; i < 20; ++i) {
    const DiscreteInstance inst = random_instance(rng, {});
    for (int n : {1, 10}) {
      const estimators::IpsVarianceTerms terms =
          estimators::ips_variance_terms(inst, n);
      CHECK(terms.total() ==
            doctest::Approx(exact_ips_variance(inst, n)).epsilon(1e-10));
    }
  }
}

TEST_CASE("ips variance terms: deterministic same-policy case") {
  // pi = mu with deterministic rewards: every term is zero.
  DiscreteInstance inst;
  inst.contexts = {{0.0}, {1.0}};
  inst.context_pmf = {0.5, 0.5};
  inst.num_actions = 2;
  inst.num_embeddings = 1;
  inst.reward_atoms = {4.0};
  inst.behavior = {0.3, 0.7, 0.6, 0.4};
  inst.target = inst.behavior;
  inst.embed_pmf = {1.0, 1.0, 1.0, 1.0};
  inst.reward_pmf = {1.0, 1.0, 1.0, 1.0};
  inst.validate();
  const auto terms = estimators::ips_variance_terms(inst, 5);
  CHECK(terms.reward_noise == doctest::Approx(0.0));
  // w*q is constant 4 in each context and across contexts.
  CHECK(terms.across_contexts == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.across_actions == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ips variance terms: single context single action") {
  // Var[IPS] = sigma^2 w^2 / n with w = 1; discretized noise: atoms {0, 2}
  // with equal mass, variance 1.
  DiscreteInstance inst;
  inst.contexts = {{0.0}};
  inst.context_pmf = {1.0};
  inst.num_actions = 1;
  inst.num_embeddings = 1;
  inst.reward_atoms = {0.0, 2.0};
  inst.behavior = {1.0};
  inst.target = {1.0};
  inst.embed_pmf = {1.0};
  inst.reward_pmf = {0.5, 0.5};
  inst.validate();
  const auto terms = estimators::ips_variance_terms(inst, 4);
  CHECK(terms.reward_noise == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(terms.across_contexts == doctest::Approx(0.0));
  CHECK(terms.across_actions == doctest::Approx(0.0));
}

TEST_CASE("ips variance terms match simulation") {
  Rng rng(67);
  const DiscreteInstance inst = random_instance(rng, {});
  const int n = 8;
  const auto terms = estimators::ips_variance_terms(inst, n);

  // Simulate many size-n datasets and compare the empirical variance.
  const long trials = 100000;
  Rng sim(31337);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> pe(static_cast<std::size_t>(inst.num_embeddings));
  std::vector<double> pr(static_cast<std::size_t>(inst.num_reward_atoms()));
  for (long t = 0; t < trials; ++t) {
    double est = 0.0;
    for (int i = 0; i < n; ++i) {
      const int x = sim.categorical(inst.context_pmf);
      const int a = sim.categorical(std::span<const double>(
          &inst.behavior[static_cast<std::size_t>(x) * inst.num_actions],
          static_cast<std::size_t>(inst.num_actions)));
      for (int e = 0; e < inst.num_embeddings; ++e) pe[e] = inst.pe(x, a, e);
      const int e = sim.categorical(pe);
      for (int s = 0; s < inst.num_reward_atoms(); ++s) {
        pr[s] = inst.pr(x, a, e, s);
      }
      const double r =
          inst.reward_atoms[static_cast<std::size_t>(sim.categorical(pr))];
      est += inst.w(x, a) * r;
    }
    est /= n;
    sum += est;
    sum_sq += est * est;
  }
  const double mean = sum / trials;
  const double var = sum_sq / trials - mean * mean;
  // Sample variance of a variance estimate: Var[s^2] ~ 2 var^2 / trials for
  // near-normal estimators; allow 4 sigma with a kurtosis cushion.
  const double se = var * std::sqrt(8.0 / trials);
  CHECK(std::abs(var - terms.total()) < 4.0 * se);
}

TEST_CASE("ips bias from unsupported actions") {
  Rng rng(71);
  DiscreteInstance inst = random_instance(rng, {});
  CHECK(estimators::ips_bias_unsupported(inst) == 0.0);  // full support

  // Remove one action from the behavior policy in context 0.
  const int drop = 1;
  double freed = inst.mu(0, drop);
  inst.behavior[drop] = 0.0;
  inst.behavior[0] += freed;  // keep the pmf normalized
  inst.validate();
  const double bias = estimators::ips_bias_unsupported(inst);
  const double expect = inst.p_x(0) * inst.pi(0, drop) * inst.q_xa(0, drop);
  CHECK(bias == doctest::Approx(expect).epsilon(1e-12));

  // Magnitude matches |E[v_ips] - v(pi)| by enumeration: E[v_ips] only sums
  // supported actions.
  double e_ips = 0.0;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int a = 0; a < inst.num_actions; ++a) {
      if (inst.mu(x, a) <= 0.0) continue;
      e_ips += inst.p_x(x) * inst.pi(x, a) * inst.q_xa(x, a);
    }
  }
  CHECK(std::abs(e_ips - exact_value_target(inst)) ==
        doctest::Approx(bias).epsilon(1e-12));
}

TEST_CASE("verification suite passes") {
  const VerifyReport report = run_verification(30, 1234);
  for (const VerifyCheck& c : report.checks) {
    INFO(c.name, ": ", c.detail);
    CHECK(c.pass);
  }
  CHECK(report.all_pass());
}
