#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace cael::models::detail {

DataMatrices to_matrices(const Dataset& data) {
  const int n = data.size();
  const int d = data.context_dim;
  DataMatrices m;
  m.x.resize(n, d);
  m.actions.resize(static_cast<std::size_t>(n));
  m.rewards.resize(n);
  for (int i = 0; i < n; ++i) {
    const LoggedSample& s = data.samples[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) m.x(i, j) = s.context[static_cast<std::size_t>(j)];
    m.actions[static_cast<std::size_t>(i)] = s.action;
    m.rewards(i) = s.reward;
  }
  return m;
}

WeightTable WeightTable::build(const estimators::ActionProbs& pi,
                               const estimators::ActionProbs& mu) {
  if (pi.n != mu.n || pi.K != mu.K) {
    throw InvalidArgument("weight table: probability matrix shape mismatch");
  }
  WeightTable t;
  t.K = pi.K;
  t.w.resize(pi.n, pi.K);
  t.sumw2.resize(pi.n);
  t.order.resize(static_cast<std::size_t>(pi.n) * pi.K);
  for (int i = 0; i < pi.n; ++i) {
    for (int a = 0; a < pi.K; ++a) {
      const double m = mu.at(i, a);
      const double p = pi.at(i, a);
      if (m <= 0.0) {
        if (p > 0.0) {
          throw UnsupportedAction("training requires full behavior support");
        }
        t.w(i, a) = 0.0;
      } else {
        t.w(i, a) = p / m;
      }
    }
    t.sumw2(i) = t.w.row(i).squaredNorm();
    int* ord = &t.order[static_cast<std::size_t>(i) * pi.K];
    std::iota(ord, ord + pi.K, 0);
    const Eigen::MatrixXd& w = t.w;
    std::sort(ord, ord + pi.K, [&w, i](int a, int b) {
      return w(i, a) != w(i, b) ? w(i, a) < w(i, b) : a < b;
    });
  }
  return t;
}

namespace {

// s_k = Sum_{i<j} p_i p_j |w_j - w_i| for one sample, evaluated in O(K)
// over the precomputed ascending weight order via prefix sums.
double pair_sum(const WeightTable& table, int row,
                const Eigen::MatrixXd& post, int k) {
  const auto order = table.row_order(row);
  double pcum = 0.0, scum = 0.0, s = 0.0;
  for (int a : order) {
    const double p = post(k, a);
    const double w = table.w(row, a);
    s += p * (w * pcum - scum);
    pcum += p;
    scum += p * w;
  }
  return s;
}

}  // namespace

LossPieces loss_forward(const WeightTable& table, std::span<const int> rows,
                        const Eigen::VectorXd& rhat,
                        const Eigen::VectorXd& rewards,
                        const Eigen::MatrixXd& post, bool use_predicted) {
  const int b = static_cast<int>(rows.size());
  LossPieces out;
  out.l_r = (rhat - rewards).squaredNorm() / b;
  double s_sum = 0.0;
  double var_sum = 0.0;
  for (int k = 0; k < b; ++k) {
    const int row = rows[static_cast<std::size_t>(k)];
    s_sum += pair_sum(table, row, post, k);
    const double r_eff = use_predicted ? rhat(k) : rewards(k);
    var_sum += r_eff * r_eff * post.row(k).squaredNorm() * table.sumw2(row);
  }
  out.s_mean = s_sum / b;
  out.l_bias = out.s_mean * out.s_mean;
  out.l_var = var_sum / (static_cast<double>(b) * b);
  return out;
}

LossGrads loss_backward(const WeightTable& table, std::span<const int> rows,
                        const Eigen::VectorXd& rhat,
                        const Eigen::VectorXd& rewards,
                        const Eigen::MatrixXd& post, double rho, double gamma,
                        bool use_predicted, double s_mean) {
  const int b = static_cast<int>(rows.size());
  const int k_actions = table.K;
  const double inv_b = 1.0 / static_cast<double>(b);
  const double inv_b2 = inv_b * inv_b;

  LossGrads g;
  g.d_rhat = 2.0 * inv_b * (rhat - rewards);
  g.d_post = Eigen::MatrixXd::Zero(b, k_actions);

  // ds_k/dp_a = Sum_{j != a} p_j |w_j - w_a|, again via the sorted prefixes.
  const double bias_coef = rho * 2.0 * s_mean * inv_b;
  std::vector<double> pre_p(static_cast<std::size_t>(k_actions));
  std::vector<double> pre_s(static_cast<std::size_t>(k_actions));
  for (int k = 0; k < b; ++k) {
    const int row = rows[static_cast<std::size_t>(k)];
    const auto order = table.row_order(row);

    if (bias_coef != 0.0) {
      double pcum = 0.0, scum = 0.0;
      for (int t = 0; t < k_actions; ++t) {
        const int a = order[static_cast<std::size_t>(t)];
        pre_p[static_cast<std::size_t>(t)] = pcum;
        pre_s[static_cast<std::size_t>(t)] = scum;
        pcum += post(k, a);
        scum += post(k, a) * table.w(row, a);
      }
      const double ptot = pcum, stot = scum;
      for (int t = 0; t < k_actions; ++t) {
        const int a = order[static_cast<std::size_t>(t)];
        const double p = post(k, a);
        const double w = table.w(row, a);
        const double below =
            w * pre_p[static_cast<std::size_t>(t)] - pre_s[static_cast<std::size_t>(t)];
        const double above =
            (stot - pre_s[static_cast<std::size_t>(t)] - p * w) -
            w * (ptot - pre_p[static_cast<std::size_t>(t)] - p);
        g.d_post(k, a) += bias_coef * (below + above);
      }
    }

    if (gamma != 0.0) {
      const double r_eff = use_predicted ? rhat(k) : rewards(k);
      const double coef = gamma * inv_b2 * r_eff * r_eff * table.sumw2(row);
      g.d_post.row(k) += 2.0 * coef * post.row(k);
      if (use_predicted) {
        g.d_rhat(k) += gamma * inv_b2 * 2.0 * rhat(k) *
                       post.row(k).squaredNorm() * table.sumw2(row);
      }
    }
  }
  return g;
}

Eigen::MatrixXd embedding_gradient(const Eigen::MatrixXd& x,
                                   const Eigen::MatrixXd& post,
                                   const PosteriorModel& posterior,
                                   const LossGrads& grads) {
  const int b = static_cast<int>(x.rows());
  const int de = posterior.embed_dim();
  // Softmax Jacobian: dlogit_a = p_a (dL/dp_a - Sum_c dL/dp_c p_c).
  Eigen::VectorXd inner =
      (grads.d_post.array() * post.array()).rowwise().sum().matrix();
  Eigen::MatrixXd d_logits =
      (post.array() * (grads.d_post.colwise() - inner).array()).matrix();
  Eigen::MatrixXd d_e = d_logits * posterior.weights().rightCols(de);
  d_e += grads.d_rhat.asDiagonal() * x;
  (void)b;
  return d_e;
}

}  // namespace cael::models::detail

namespace cael::models {

namespace {

struct PreparedBatch {
  detail::DataMatrices m;
  Eigen::MatrixXd embeddings;
  detail::WeightTable table;
  std::vector<int> rows;
  Eigen::VectorXd rhat;
};

PreparedBatch prepare(const Dataset& batch, const EmbeddingNet& net,
                      const Policy& pi, const Policy& mu) {
  batch.validate();
  if (net.context_dim() != batch.context_dim ||
      net.num_actions() != batch.num_actions) {
    throw InvalidArgument("network shape does not match batch");
  }
  PreparedBatch p;
  p.m = detail::to_matrices(batch);
  p.embeddings = net.forward_eval(p.m.x, p.m.actions);
  p.table = detail::WeightTable::build(
      estimators::ActionProbs::evaluate(pi, batch),
      estimators::ActionProbs::behavior(mu, batch));
  p.rows.resize(static_cast<std::size_t>(batch.size()));
  std::iota(p.rows.begin(), p.rows.end(), 0);
  p.rhat = (p.embeddings.array() * p.m.x.array()).rowwise().sum().matrix();
  return p;
}

}  // namespace

double loss_reward(const Dataset& batch, const EmbeddingNet& net) {
  batch.validate();
  if (net.context_dim() != batch.context_dim) {
    throw InvalidArgument("network shape does not match batch");
  }
  detail::DataMatrices m = detail::to_matrices(batch);
  Eigen::MatrixXd e = net.forward_eval(m.x, m.actions);
  Eigen::VectorXd rhat = (e.array() * m.x.array()).rowwise().sum().matrix();
  return (rhat - m.rewards).squaredNorm() / batch.size();
}

double loss_bias(const Dataset& batch, const EmbeddingNet& net,
                 const PosteriorModel& posterior, const Policy& pi,
                 const Policy& mu) {
  PreparedBatch p = prepare(batch, net, pi, mu);
  Eigen::MatrixXd post = posterior.probs_matrix(p.m.x, p.embeddings);
  return detail::loss_forward(p.table, p.rows, p.rhat, p.m.rewards, post, true)
      .l_bias;
}

double loss_var(const Dataset& batch, const EmbeddingNet& net,
                const PosteriorModel& posterior, const Policy& pi,
                const Policy& mu, bool use_predicted_reward) {
  PreparedBatch p = prepare(batch, net, pi, mu);
  Eigen::MatrixXd post = posterior.probs_matrix(p.m.x, p.embeddings);
  return detail::loss_forward(p.table, p.rows, p.rhat, p.m.rewards, post,
                              use_predicted_reward)
      .l_var;
}

LossBreakdown loss_total(const Dataset& batch, const EmbeddingNet& net,
                         const PosteriorModel& posterior, const Policy& pi,
                         const Policy& mu, double rho, double gamma,
                         bool use_predicted_reward) {
  if (!(rho >= 0.0) || !(gamma >= 0.0)) {
    throw InvalidArgument("loss_total: rho and gamma must be non-negative");
  }
  PreparedBatch p = prepare(batch, net, pi, mu);
  Eigen::MatrixXd post = posterior.probs_matrix(p.m.x, p.embeddings);
  detail::LossPieces pieces = detail::loss_forward(
      p.table, p.rows, p.rhat, p.m.rewards, post, use_predicted_reward);
  LossBreakdown out;
  out.l_r = pieces.l_r;
  out.l_bias = pieces.l_bias;
  out.l_var = pieces.l_var;
  out.rho = rho;
  out.gamma = gamma;
  out.total = pieces.l_r + rho * pieces.l_bias + gamma * pieces.l_var;
  return out;
}

std::vector<double> loss_total_gradient(const Dataset& batch,
                                        const EmbeddingNet& net,
                                        const PosteriorModel& posterior,
                                        const Policy& pi, const Policy& mu,
                                        double rho, double gamma,
                                        bool use_predicted_reward) {
  PreparedBatch p = prepare(batch, net, pi, mu);
  EmbeddingNet::ForwardCache cache;
  Eigen::MatrixXd e = net.forward_eval(p.m.x, p.m.actions, &cache);
  Eigen::VectorXd rhat = (e.array() * p.m.x.array()).rowwise().sum().matrix();
  Eigen::MatrixXd post = posterior.probs_matrix(p.m.x, e);
  detail::LossPieces pieces = detail::loss_forward(
      p.table, p.rows, rhat, p.m.rewards, post, use_predicted_reward);
  detail::LossGrads grads = detail::loss_backward(
      p.table, p.rows, rhat, p.m.rewards, post, rho, gamma,
      use_predicted_reward, pieces.s_mean);
  Eigen::MatrixXd d_e =
      detail::embedding_gradient(p.m.x, post, posterior, grads);
  return EmbeddingNet::flatten(net.backward(cache, d_e));
}

}  // namespace cael::models
