#include "cael/synthetic.hpp"

#include <cmath>
#include <thread>
#include <vector>

namespace cael::synthetic {

SyntheticEnv::SyntheticEnv(int context_dim, int num_actions, double reward_std,
                           RngSeed seed)
    : context_dim_(context_dim),
      num_actions_(num_actions),
      reward_std_(reward_std),
      seed_(seed) {
  if (context_dim < 1) throw InvalidArgument("context_dim must be positive");
  if (num_actions < 1) throw InvalidArgument("num_actions must be positive");
  if (!(reward_std >= 0.0)) throw InvalidArgument("reward_std must be >= 0");
  action_reps_.resize(static_cast<std::size_t>(num_actions) * context_dim);
  Rng rng(derive_seed(seed, 0x0ac71045));
  for (int a = 0; a < num_actions; ++a) {
    double* rep = &action_reps_[static_cast<std::size_t>(a) * context_dim];
    rep[0] = static_cast<double>(a + 1) / static_cast<double>(num_actions);
    for (int j = 1; j < context_dim; ++j) rep[j] = rng.uniform();
  }
}

std::span<const double> SyntheticEnv::action_rep(ActionId a) const {
  if (a < 0 || a >= num_actions_) {
    throw InvalidArgument("action index out of range");
  }
  return {&action_reps_[static_cast<std::size_t>(a) * context_dim_],
          static_cast<std::size_t>(context_dim_)};
}

MeanRewardFn SyntheticEnv::mean_reward_fn() const {
  // Capture only what the reward needs; keeps the policy independent of the
  // env object's lifetime.
  std::vector<double> first_coords(static_cast<std::size_t>(num_actions_));
  for (int a = 0; a < num_actions_; ++a) {
    first_coords[static_cast<std::size_t>(a)] =
        action_reps_[static_cast<std::size_t>(a) * context_dim_];
  }
  return [coords = std::move(first_coords)](const ContextVector& x,
                                            ActionId a) {
    const double d = x[0] - coords[static_cast<std::size_t>(a)];
    return 10.0 * std::exp(-d * d);
  };
}

double expected_reward(const SyntheticEnv& env, const ContextVector& x,
                       ActionId a) {
  if (static_cast<int>(x.size()) != env.context_dim()) {
    throw InvalidArgument("context length does not match environment");
  }
  const double d = x[0] - env.action_rep(a)[0];
  return 10.0 * std::exp(-d * d);
}

Dataset generate_dataset(const SyntheticEnv& env, const Policy& mu, int n,
                         RngSeed seed) {
  if (n < 1) throw InvalidArgument("generate_dataset: n must be positive");
  if (mu.num_actions() != env.num_actions()) {
    throw InvalidArgument("behavior policy action count does not match env");
  }
  Dataset data;
  data.context_dim = env.context_dim();
  data.num_actions = env.num_actions();
  data.samples.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  std::vector<double> p(static_cast<std::size_t>(env.num_actions()));
  for (int i = 0; i < n; ++i) {
    LoggedSample s;
    s.context.resize(static_cast<std::size_t>(env.context_dim()));
    for (double& v : s.context) v = rng.uniform();
    mu.probs(s.context, p);
    s.action = rng.categorical(p);
    s.behavior_propensity = p[static_cast<std::size_t>(s.action)];
    const double q = expected_reward(env, s.context, s.action);
    s.reward = env.reward_std() > 0.0 ? rng.normal(q, env.reward_std()) : q;
    data.samples.push_back(std::move(s));
  }
  return data;
}

namespace {

struct ShardStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  long count = 0;
};

// Per-context value Sum_a pi(a|x) q(x,a) accumulated over one shard.
ShardStats run_shard(const SyntheticEnv& env, const Policy& pi, long count,
                     RngSeed shard_seed) {
  ShardStats st;
  Rng rng(shard_seed);
  const int k = env.num_actions();
  const int d = env.context_dim();
  std::vector<double> p(static_cast<std::size_t>(k));
  ContextVector x(static_cast<std::size_t>(d));
  for (long m = 0; m < count; ++m) {
    for (double& v : x) v = rng.uniform();
    pi.probs(x, p);
    double value = 0.0;
    for (int a = 0; a < k; ++a) {
      if (p[static_cast<std::size_t>(a)] == 0.0) continue;
      value += p[static_cast<std::size_t>(a)] * expected_reward(env, x, a);
    }
    st.sum += value;
    st.sum_sq += value * value;
  }
  st.count = count;
  return st;
}

}  // namespace

GroundTruth true_value(const SyntheticEnv& env, const Policy& pi,
                       long mc_contexts, RngSeed seed, int threads) {
  if (mc_contexts < 1) throw InvalidArgument("true_value: mc_contexts >= 1");
  if (pi.num_actions() != env.num_actions()) {
    throw InvalidArgument("target policy action count does not match env");
  }
  // Fixed shard size so results are identical for any thread count.
  constexpr long kShardSize = 65536;
  const long num_shards = (mc_contexts + kShardSize - 1) / kShardSize;
  std::vector<ShardStats> stats(static_cast<std::size_t>(num_shards));

  int workers = threads > 0
                    ? threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (static_cast<long>(workers) > num_shards) {
    workers = static_cast<int>(num_shards);
  }

  auto shard_count = [&](long s) {
    return s + 1 < num_shards ? kShardSize
                              : mc_contexts - kShardSize * (num_shards - 1);
  };
  if (workers == 1) {
    for (long s = 0; s < num_shards; ++s) {
      stats[static_cast<std::size_t>(s)] =
          run_shard(env, pi, shard_count(s), derive_seed(seed, s));
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (long s = w; s < num_shards; s += workers) {
          stats[static_cast<std::size_t>(s)] =
              run_shard(env, pi, shard_count(s), derive_seed(seed, s));
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  double sum = 0.0;
  double sum_sq = 0.0;
  for (const ShardStats& st : stats) {
    sum += st.sum;
    sum_sq += st.sum_sq;
  }
  const double m = static_cast<double>(mc_contexts);
  GroundTruth gt;
  gt.value = sum / m;
  gt.mc_samples = mc_contexts;
  const double var = sum_sq / m - gt.value * gt.value;
  gt.std_error = var > 0.0 ? std::sqrt(var / m) : 0.0;
  return gt;
}

}  // namespace cael::synthetic
