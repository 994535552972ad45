#include <cmath>
#include <numeric>
#include <sstream>

#include "internal.hpp"

namespace cael::models {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate > 0.0)) {
    throw InvalidArgument("learning_rate must be positive");
  }
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (!(rho >= 0.0) || !(gamma >= 0.0)) {
    throw InvalidArgument("rho and gamma must be non-negative");
  }
  if (posterior_refit_epochs < 0 || posterior_final_epochs < 0) {
    throw InvalidArgument("posterior epochs must be >= 0");
  }
  if (!(posterior_lr > 0.0)) throw InvalidArgument("posterior_lr > 0 required");
  if (!(posterior_l2 >= 0.0)) throw InvalidArgument("posterior_l2 >= 0 required");
  if (hidden_width < 1) throw InvalidArgument("hidden_width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw InvalidArgument("dropout rate outside [0, 1)");
  }
}

namespace {

TrainedModels train_impl(const Dataset& data,
                         const estimators::ActionProbs& pi,
                         const estimators::ActionProbs& mu,
                         const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  const int n = data.size();
  const int d = data.context_dim;
  const int k = data.num_actions;
  if (pi.n != n || pi.K != k || mu.n != n || mu.K != k) {
    throw InvalidArgument("train: probability matrix shape mismatch");
  }

  detail::DataMatrices m = detail::to_matrices(data);
  detail::WeightTable table = detail::WeightTable::build(pi, mu);

  EmbeddingNet net(d, k, cfg.hidden_width, cfg.dropout,
                   derive_seed(cfg.seed, 1));
  PosteriorModel posterior(d, d, k);
  Rng loop_rng(derive_seed(cfg.seed, 2));
  Rng post_rng(derive_seed(cfg.seed, 3));

  const int b = std::min(cfg.batch_size, n);
  PosteriorFitConfig refit{cfg.posterior_refit_epochs, b, cfg.posterior_lr,
                           cfg.posterior_l2};

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> rows(static_cast<std::size_t>(b));
  Eigen::MatrixXd xb(b, d);
  std::vector<int> ab(static_cast<std::size_t>(b));
  Eigen::VectorXd rb(b);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // Partial Fisher-Yates: the first b entries become the minibatch.
    for (int t = 0; t < b; ++t) {
      const int j = t + static_cast<int>(loop_rng.uniform_int(
                            static_cast<std::uint64_t>(n - t)));
      std::swap(perm[static_cast<std::size_t>(t)],
                perm[static_cast<std::size_t>(j)]);
      const int row = perm[static_cast<std::size_t>(t)];
      rows[static_cast<std::size_t>(t)] = row;
      xb.row(t) = m.x.row(row);
      ab[static_cast<std::size_t>(t)] = m.actions[static_cast<std::size_t>(row)];
      rb(t) = m.rewards(row);
    }

    EmbeddingNet::ForwardCache cache;
    Eigen::MatrixXd e = net.forward(xb, ab, Mode::kTrain, &loop_rng, &cache);
    if (cfg.posterior_refit_epochs > 0) {
      if (!cfg.posterior_warm_start) posterior = PosteriorModel(d, d, k);
      posterior.fit(xb, e, ab, refit, post_rng);
    }
    Eigen::MatrixXd post = posterior.probs_matrix(xb, e);
    Eigen::VectorXd rhat = (e.array() * xb.array()).rowwise().sum().matrix();

    detail::LossPieces pieces = detail::loss_forward(
        table, rows, rhat, rb, post, cfg.var_loss_uses_predicted_reward);
    const double total =
        pieces.l_r + cfg.rho * pieces.l_bias + cfg.gamma * pieces.l_var;
    if (!std::isfinite(total)) {
      std::ostringstream msg;
      msg << "training diverged at iteration " << iter << ": l_r=" << pieces.l_r
          << " l_bias=" << pieces.l_bias << " l_var=" << pieces.l_var
          << " (learning rate " << cfg.learning_rate << " may be too high)";
      throw TrainingDiverged(msg.str());
    }

    detail::LossGrads grads = detail::loss_backward(
        table, rows, rhat, rb, post, cfg.rho, cfg.gamma,
        cfg.var_loss_uses_predicted_reward, pieces.s_mean);
    Eigen::MatrixXd d_e = detail::embedding_gradient(xb, post, posterior, grads);
    net.sgd_step(net.backward(cache, d_e), cfg.learning_rate);
  }

  // Final posterior fit on all n eval-mode embeddings. Fit from scratch:
  // the loop state tracked train-mode embeddings of the last minibatch and
  // is a poor warm start for the definitive model.
  Eigen::MatrixXd e_all = net.forward_eval(m.x, m.actions);
  posterior = PosteriorModel(d, d, k);
  PosteriorFitConfig final_fit{cfg.posterior_final_epochs,
                               std::min(cfg.batch_size, n), cfg.posterior_lr,
                               cfg.posterior_l2};
  if (cfg.posterior_final_epochs > 0) {
    posterior.fit(m.x, e_all, m.actions, final_fit, post_rng);
  }
  return {std::move(net), std::move(posterior)};
}

}  // namespace

TrainedModels train_embeddings(const Dataset& data, const Policy& pi,
                               const Policy& mu, const TrainConfig& config) {
  return train_impl(data, estimators::ActionProbs::evaluate(pi, data),
                    estimators::ActionProbs::behavior(mu, data), config);
}

TrainedModels train_embeddings(const Dataset& data,
                               const estimators::ActionProbs& pi,
                               const estimators::ActionProbs& mu,
                               const TrainConfig& config) {
  return train_impl(data, pi, mu, config);
}

namespace {

std::vector<std::vector<double>> eval_embeddings(const Dataset& data,
                                                 const EmbeddingNet& net) {
  detail::DataMatrices m = detail::to_matrices(data);
  Eigen::MatrixXd e = net.forward_eval(m.x, m.actions);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) {
    out[static_cast<std::size_t>(i)].assign(e.row(i).begin(), e.row(i).end());
  }
  return out;
}

}  // namespace

estimators::EstimateReport cael_mips_estimate(const Dataset& data,
                                              const Policy& pi,
                                              const Policy& mu,
                                              const EmbeddingNet& net,
                                              const PosteriorModel& posterior) {
  estimators::MarginalWeightTable weights = estimators::marginal_weights(
      data, pi, posterior, eval_embeddings(data, net), mu);
  estimators::EstimateReport report = estimators::mips_estimate(data, weights);
  report.estimator_name = "CAEL-MIPS";
  return report;
}

estimators::EstimateReport cael_mips_estimate(
    const Dataset& data, const estimators::ActionProbs& pi,
    const estimators::ActionProbs& mu, const EmbeddingNet& net,
    const PosteriorModel& posterior) {
  estimators::MarginalWeightTable weights = estimators::marginal_weights(
      data, pi, posterior, eval_embeddings(data, net), mu);
  estimators::EstimateReport report = estimators::mips_estimate(data, weights);
  report.estimator_name = "CAEL-MIPS";
  return report;
}

}  // namespace cael::models
