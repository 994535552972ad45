#include <doctest.h>

#include <cmath>

#include "cael/models.hpp"
#include "cael/synthetic.hpp"

using namespace cael;
using namespace cael::models;

namespace {

TrainConfig desk_config(RngSeed seed) {
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-3;
  cfg.iterations = 400;
  cfg.rho = 10.0;
  cfg.gamma = 0.1;
  cfg.seed = seed;
  cfg.hidden_width = 32;
  cfg.posterior_final_epochs = 60;
  return cfg;
}

}  // namespace

TEST_CASE("zero iterations returns the initialized net with a fitted posterior") {
  const synthetic::SyntheticEnv env(3, 6, 0.5, 5);
  const UniformPolicy mu = uniform_policy(6);
  const EpsilonGreedyPolicy pi =
      epsilon_greedy_policy(env.mean_reward_fn(), 0.2, 6);
  const Dataset data = synthetic::generate_dataset(env, mu, 120, 7);

  TrainConfig cfg = desk_config(3);
  cfg.iterations = 0;
  const TrainedModels m = train_embeddings(data, pi, mu, cfg);

  EmbeddingNet fresh(3, 6, cfg.hidden_width, cfg.dropout, derive_seed(3, 1));
  CHECK(m.net.parameters() == fresh.parameters());
  // The posterior saw the initial embeddings: its weights moved off zero.
  CHECK(m.posterior.weights().norm() > 0.0);
}

TEST_CASE("training reduces the reward loss on noiseless data") {
  const synthetic::SyntheticEnv env(3, 8, 0.0, 11);
  const UniformPolicy mu = uniform_policy(8);
  const EpsilonGreedyPolicy pi =
      epsilon_greedy_policy(env.mean_reward_fn(), 0.2, 8);
  const Dataset data = synthetic::generate_dataset(env, mu, 400, 13);

  TrainConfig cfg = desk_config(17);
  cfg.iterations = 800;
  EmbeddingNet initial(3, 8, cfg.hidden_width, cfg.dropout,
                       derive_seed(cfg.seed, 1));
  const double before = loss_reward(data, initial);
  const TrainedModels m = train_embeddings(data, pi, mu, cfg);
  const double after = loss_reward(data, m.net);
  CHECK(after < before);
}

TEST_CASE("training is deterministic in the seed") {
  const synthetic::SyntheticEnv env(2, 5, 1.0, 19);
  const UniformPolicy mu = uniform_policy(5);
  const EpsilonGreedyPolicy pi =
      epsilon_greedy_policy(env.mean_reward_fn(), 0.2, 5);
  const Dataset data = synthetic::generate_dataset(env, mu, 150, 23);

  TrainConfig cfg = desk_config(29);
  cfg.iterations = 120;
  const TrainedModels a = train_embeddings(data, pi, mu, cfg);
  const TrainedModels b = train_embeddings(data, pi, mu, cfg);
  CHECK(a.net.parameters() == b.net.parameters());
  CHECK(a.posterior.weights() == b.posterior.weights());

  cfg.seed = 30;
  const TrainedModels c = train_embeddings(data, pi, mu, cfg);
  CHECK(a.net.parameters() != c.net.parameters());
}

TEST_CASE("training aborts on divergence with diagnostics") {
  const synthetic::SyntheticEnv env(2, 5, 1.0, 31);
  const UniformPolicy mu = uniform_policy(5);
  const EpsilonGreedyPolicy pi =
      epsilon_greedy_policy(env.mean_reward_fn(), 0.2, 5);
  const Dataset data = synthetic::generate_dataset(env, mu, 150, 37);

  TrainConfig cfg = desk_config(41);
  cfg.learning_rate = 1e9;  // guaranteed blow-up
  cfg.iterations = 200;
  CHECK_THROWS_AS(train_embeddings(data, pi, mu, cfg), TrainingDiverged);
}

TEST_CASE("cael_mips_estimate degenerate cases") {
  const synthetic::SyntheticEnv env(2, 4, 0.5, 43);
  const UniformPolicy mu = uniform_policy(4);
  const EpsilonGreedyPolicy pi =
      epsilon_greedy_policy(env.mean_reward_fn(), 0.3, 4);
  Dataset data = synthetic::generate_dataset(env, mu, 60, 47);

  TrainConfig cfg = desk_config(53);
  cfg.iterations = 50;
  const TrainedModels m = train_embeddings(data, pi, mu, cfg);

  // Zero rewards give a zero estimate whatever the models say.
  Dataset zeroed = data;
  for (LoggedSample& s : zeroed.samples) s.reward = 0.0;
  const auto report =
      cael_mips_estimate(zeroed, pi, mu, m.net, m.posterior);
  CHECK(report.value == 0.0);
  CHECK(report.estimator_name == "CAEL-MIPS");
  CHECK(report.n == 60);
}

TEST_CASE("estimate improves the reward model over an untrained net") {
  // In-sample reward MSE of the trained reward head beats the untrained one.
  const synthetic::SyntheticEnv env(4, 10, 0.0, 59);
  const UniformPolicy mu = uniform_policy(10);
  const EpsilonGreedyPolicy pi =
      epsilon_greedy_policy(env.mean_reward_fn(), 0.2, 10);
  const Dataset data = synthetic::generate_dataset(env, mu, 500, 61);

  TrainConfig cfg = desk_config(67);
  cfg.rho = 0.0;
  cfg.gamma = 0.0;  // pure reward fitting (the reward-only baseline)
  cfg.iterations = 800;
  const TrainedModels m = train_embeddings(data, pi, mu, cfg);

  EmbeddingNet untrained(4, 10, cfg.hidden_width, cfg.dropout,
                         derive_seed(cfg.seed, 1));
  double mse_trained = 0.0, mse_untrained = 0.0;
  for (const LoggedSample& s : data.samples) {
    const double rt = predict_reward(m.net, s.context, s.action);
    const double ru = predict_reward(untrained, s.context, s.action);
    mse_trained += (rt - s.reward) * (rt - s.reward);
    mse_untrained += (ru - s.reward) * (ru - s.reward);
  }
  CHECK(mse_trained < mse_untrained);
}
