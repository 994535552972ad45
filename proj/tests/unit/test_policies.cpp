#include <doctest.h>

#include <cmath>

#include "cael/policies.hpp"
#include "cael/rng.hpp"

using namespace cael;

namespace {

const ContextVector kX{0.3, 0.7};

double q_fixed(const ContextVector&, ActionId a) {
  const double table[3] = {1.0, 5.0, 2.0};
  return table[a];
}

}  // namespace

TEST_CASE("uniform policy") {
  const UniformPolicy p = uniform_policy(4);
  const auto probs = p.probs_vec(kX);
  for (double v : probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  const UniformPolicy one = uniform_policy(1);
  CHECK(one.probs_vec(kX)[0] == 1.0);

  const UniformPolicy big = uniform_policy(500);
  const auto big_probs = big.probs_vec(kX);
  double sum = 0.0;
  for (double v : big_probs) {
    CHECK(v == doctest::Approx(0.002).epsilon(1e-15));
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(uniform_policy(0), InvalidArgument);
}

TEST_CASE("epsilon greedy masses") {
  // eps = 0.2, K = 500: greedy mass 0.8004, everything else 0.0004.
  const EpsilonGreedyPolicy p = epsilon_greedy_policy(
      [](const ContextVector&, ActionId a) { return a == 7 ? 1.0 : 0.0; }, 0.2,
      500);
  const auto probs = p.probs_vec(kX);
  CHECK(probs[7] == doctest::Approx(0.8004).epsilon(1e-12));
  CHECK(probs[8] == doctest::Approx(0.0004).epsilon(1e-12));
  CHECK(p.prob(kX, 7) == doctest::Approx(0.8004).epsilon(1e-12));
}

TEST_CASE("epsilon one reduces to uniform") {
  const EpsilonGreedyPolicy p = epsilon_greedy_policy(q_fixed, 1.0, 3);
  const UniformPolicy u = uniform_policy(3);
  const auto pp = p.probs_vec(kX);
  const auto up = u.probs_vec(kX);
  for (int a = 0; a < 3; ++a) CHECK(pp[a] == up[a]);
}

TEST_CASE("epsilon zero is greedy") {
  const EpsilonGreedyPolicy p = epsilon_greedy_policy(q_fixed, 0.0, 3);
  const auto probs = p.probs_vec(kX);
  CHECK(probs[0] == 0.0);
  CHECK(probs[1] == 1.0);
  CHECK(probs[2] == 0.0);
}

TEST_CASE("greedy ties break to the lowest index") {
  const EpsilonGreedyPolicy p = epsilon_greedy_policy(
      [](const ContextVector&, ActionId) { return 1.0; }, 0.0, 4);
  CHECK(p.greedy_action(kX) == 0);
}

TEST_CASE("epsilon out of range") {
  CHECK_THROWS_AS(epsilon_greedy_policy(q_fixed, -0.1, 3), InvalidArgument);
  CHECK_THROWS_AS(epsilon_greedy_policy(q_fixed, 1.1, 3), InvalidArgument);
}

TEST_CASE("ips weight") {
  const EpsilonGreedyPolicy pi = epsilon_greedy_policy(
      [](const ContextVector&, ActionId a) { return a == 0 ? 1.0 : 0.0; }, 0.2,
      500);
  const UniformPolicy mu = uniform_policy(500);
  CHECK(ips_weight(pi, mu, kX, 0) == doctest::Approx(400.2).epsilon(1e-12));

  const UniformPolicy same = uniform_policy(4);
  for (int a = 0; a < 4; ++a) {
    CHECK(ips_weight(same, same, kX, a) == 1.0);
  }

  // Zero target probability gives weight zero even where mu is positive.
  const EpsilonGreedyPolicy greedy = epsilon_greedy_policy(q_fixed, 0.0, 3);
  const UniformPolicy mu3 = uniform_policy(3);
  CHECK(ips_weight(greedy, mu3, kX, 0) == 0.0);

  // Unsupported action: pi > 0 where mu = 0.
  const EpsilonGreedyPolicy nowhere = epsilon_greedy_policy(q_fixed, 0.0, 3);
  CHECK_THROWS_AS(ips_weight(mu3, nowhere, kX, 0), UnsupportedAction);
}

TEST_CASE("policy probabilities form a simplex") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(20));
    const double eps = rng.uniform();
    const EpsilonGreedyPolicy p = epsilon_greedy_policy(
        [](const ContextVector& x, ActionId a) {
          return std::sin(x[0] * (a + 1));
        },
        eps, k);
    ContextVector x{rng.uniform(), rng.uniform()};
    const auto probs = p.probs_vec(x);
    CHECK_NOTHROW(check_simplex(probs));

    // Enumerated E_mu[w] = Sum_a pi(a|x) = 1 exactly.
    const UniformPolicy mu = uniform_policy(k);
    double mean_w = 0.0;
    for (int a = 0; a < k; ++a) {
      mean_w += mu.prob(x, a) * ips_weight(p, mu, x, a);
    }
    CHECK(mean_w == doctest::Approx(1.0).epsilon(1e-12));
  }
}
