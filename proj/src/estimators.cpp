#include "cael/estimators.hpp"

#include <cmath>
#include <string>

namespace cael::estimators {

namespace {

void require_nonempty(const Dataset& data) {
  if (data.samples.empty()) throw InvalidArgument("dataset is empty");
}

}  // namespace

ActionProbs ActionProbs::evaluate(const Policy& pi, const Dataset& data) {
  require_nonempty(data);
  if (pi.num_actions() != data.num_actions) {
    throw InvalidArgument("policy action count does not match dataset");
  }
  ActionProbs out;
  out.n = data.size();
  out.K = data.num_actions;
  out.p.resize(static_cast<std::size_t>(out.n) * out.K);
  for (int i = 0; i < out.n; ++i) {
    std::span<double> row(&out.p[static_cast<std::size_t>(i) * out.K],
                          static_cast<std::size_t>(out.K));
    pi.probs(data.samples[static_cast<std::size_t>(i)].context, row);
    check_simplex(row);
  }
  return out;
}

ActionProbs ActionProbs::behavior(const Policy& mu, const Dataset& data) {
  ActionProbs out = evaluate(mu, data);
  for (int i = 0; i < out.n; ++i) {
    const LoggedSample& s = data.samples[static_cast<std::size_t>(i)];
    out.p[static_cast<std::size_t>(i) * out.K + s.action] =
        s.behavior_propensity;
  }
  return out;
}

EstimateReport ips_estimate(const Dataset& data, const Policy& pi) {
  require_nonempty(data);
  if (pi.num_actions() != data.num_actions) {
    throw InvalidArgument("policy action count does not match dataset");
  }
  double sum = 0.0;
  for (const LoggedSample& s : data.samples) {
    if (s.behavior_propensity <= 0.0) {
      throw UnsupportedAction("logged propensity is zero");
    }
    sum += pi.prob(s.context, s.action) / s.behavior_propensity * s.reward;
  }
  return {sum / data.size(), "IPS", data.size()};
}

EstimateReport ips_estimate(const Dataset& data, const ActionProbs& pi) {
  require_nonempty(data);
  if (pi.n != data.size() || pi.K != data.num_actions) {
    throw InvalidArgument("target probability matrix shape mismatch");
  }
  double sum = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const LoggedSample& s = data.samples[static_cast<std::size_t>(i)];
    if (s.behavior_propensity <= 0.0) {
      throw UnsupportedAction("logged propensity is zero");
    }
    sum += pi.at(i, s.action) / s.behavior_propensity * s.reward;
  }
  return {sum / data.size(), "IPS", data.size()};
}

EstimateReport dm_estimate(const std::vector<ContextVector>& contexts,
                           const Policy& pi, const RewardModelFn& q_hat,
                           int num_actions) {
  if (contexts.empty()) throw InvalidArgument("no contexts given");
  if (!q_hat) throw InvalidArgument("null reward model");
  double sum = 0.0;
  std::vector<double> p(static_cast<std::size_t>(num_actions));
  for (const ContextVector& x : contexts) {
    pi.probs(x, p);
    for (int a = 0; a < num_actions; ++a) {
      if (p[static_cast<std::size_t>(a)] == 0.0) continue;
      sum += p[static_cast<std::size_t>(a)] * q_hat(x, a);
    }
  }
  return {sum / static_cast<double>(contexts.size()), "DM",
          static_cast<int>(contexts.size())};
}

EstimateReport dm_estimate(const std::vector<ContextVector>& contexts,
                           const Policy& pi, const ActionProbs& q_hat_matrix) {
  if (contexts.empty()) throw InvalidArgument("no contexts given");
  if (q_hat_matrix.n != static_cast<int>(contexts.size())) {
    throw InvalidArgument("reward matrix row count mismatch");
  }
  double sum = 0.0;
  std::vector<double> p(static_cast<std::size_t>(q_hat_matrix.K));
  for (int i = 0; i < q_hat_matrix.n; ++i) {
    pi.probs(contexts[static_cast<std::size_t>(i)], p);
    const auto q_row = q_hat_matrix.row(i);
    for (int a = 0; a < q_hat_matrix.K; ++a) {
      sum += p[static_cast<std::size_t>(a)] * q_row[static_cast<std::size_t>(a)];
    }
  }
  return {sum / q_hat_matrix.n, "DM", q_hat_matrix.n};
}

EstimateReport dm_estimate(const ActionProbs& pi,
                           const ActionProbs& q_hat_matrix) {
  if (pi.n != q_hat_matrix.n || pi.K != q_hat_matrix.K || pi.n == 0) {
    throw InvalidArgument("dm_estimate: matrix shape mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pi.p.size(); ++i) {
    sum += pi.p[i] * q_hat_matrix.p[i];
  }
  return {sum / pi.n, "DM", pi.n};
}

namespace {

MarginalWeightTable marginal_weights_impl(
    const Dataset& data, const ActionProbs& pi,
    const ActionPosterior& posterior,
    const std::vector<std::vector<double>>& embeddings,
    const ActionProbs& mu) {
  require_nonempty(data);
  const int n = data.size();
  const int K = data.num_actions;
  if (static_cast<int>(embeddings.size()) != n) {
    throw InvalidArgument("embedding count does not match dataset");
  }
  if (pi.n != n || pi.K != K || mu.n != n || mu.K != K) {
    throw InvalidArgument("probability matrix shape mismatch");
  }
  if (posterior.num_actions() != K) {
    throw InvalidArgument("posterior action count does not match dataset");
  }
  MarginalWeightTable table;
  table.weights.resize(static_cast<std::size_t>(n));
  std::vector<double> post(static_cast<std::size_t>(K));
  for (int i = 0; i < n; ++i) {
    const LoggedSample& s = data.samples[static_cast<std::size_t>(i)];
    posterior.probs(s.context, embeddings[static_cast<std::size_t>(i)], post);
    double w = 0.0;
    for (int a = 0; a < K; ++a) {
      const double mass = post[static_cast<std::size_t>(a)];
      const double m = mu.at(i, a);
      if (m <= 0.0) {
        if (mass > 0.0) {
          throw UnsupportedAction(
              "posterior mass " + std::to_string(mass) + " on action " +
              std::to_string(a) + " with zero behavior probability (sample " +
              std::to_string(i) + ")");
        }
        continue;
      }
      w += mass * pi.at(i, a) / m;
    }
    table.weights[static_cast<std::size_t>(i)] = w;
  }
  return table;
}

}  // namespace

MarginalWeightTable marginal_weights(
    const Dataset& data, const Policy& pi, const ActionPosterior& posterior,
    const std::vector<std::vector<double>>& embeddings, const Policy& mu) {
  return marginal_weights_impl(data, ActionProbs::evaluate(pi, data),
                               posterior, embeddings,
                               ActionProbs::behavior(mu, data));
}

MarginalWeightTable marginal_weights(
    const Dataset& data, const ActionProbs& pi,
    const ActionPosterior& posterior,
    const std::vector<std::vector<double>>& embeddings,
    const ActionProbs& mu) {
  return marginal_weights_impl(data, pi, posterior, embeddings, mu);
}

EstimateReport mips_estimate(const Dataset& data,
                             const MarginalWeightTable& weights) {
  require_nonempty(data);
  if (weights.size() != data.size()) {
    throw InvalidArgument("marginal weight table length does not match data");
  }
  double sum = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    sum += weights.weights[static_cast<std::size_t>(i)] *
           data.samples[static_cast<std::size_t>(i)].reward;
  }
  return {sum / data.size(), "MIPS", data.size()};
}

IpsVarianceTerms ips_variance_terms(const oracle::DiscreteInstance& inst,
                                    int n) {
  if (n < 1) throw InvalidArgument("ips_variance_terms: n must be positive");
  IpsVarianceTerms terms;
  const double inv_n = 1.0 / static_cast<double>(n);

  // E_X[ E_mu[w q | X] ] pieces for the across-context variance.
  double mean_of_cond = 0.0;
  double mean_of_cond_sq = 0.0;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    const double px = inst.p_x(x);
    double cond_mean = 0.0;   // E_mu[w q | x]
    double cond_mean2 = 0.0;  // E_mu[(w q)^2 | x]
    for (int a = 0; a < inst.num_actions; ++a) {
      const double m = inst.mu(x, a);
      if (m <= 0.0) continue;
      const double w = inst.w(x, a);
      const double wq = w * inst.q_xa(x, a);
      cond_mean += m * wq;
      cond_mean2 += m * wq * wq;
      // E[w^2 Var[R|X,A]] with Var[R|x,a] of the embedding-marginal reward.
      double r2 = 0.0;
      for (int e = 0; e < inst.num_embeddings; ++e) {
        r2 += inst.pe(x, a, e) * inst.r2(x, a, e);
      }
      const double qa = inst.q_xa(x, a);
      terms.reward_noise += px * m * w * w * (r2 - qa * qa);
    }
    mean_of_cond += px * cond_mean;
    mean_of_cond_sq += px * cond_mean * cond_mean;
    terms.across_actions += px * (cond_mean2 - cond_mean * cond_mean);
  }
  terms.reward_noise *= inv_n;
  terms.across_contexts =
      inv_n * (mean_of_cond_sq - mean_of_cond * mean_of_cond);
  terms.across_actions *= inv_n;
  return terms;
}

double ips_bias_unsupported(const oracle::DiscreteInstance& inst) {
  double bias = 0.0;
  for (int x = 0; x < inst.num_contexts(); ++x) {
    for (int a = 0; a < inst.num_actions; ++a) {
      if (inst.mu(x, a) <= 0.0) {
        bias += inst.p_x(x) * inst.pi(x, a) * inst.q_xa(x, a);
      }
    }
  }
  return bias;
}

}  // namespace cael::estimators
