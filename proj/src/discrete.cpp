#include "cael/discrete.hpp"

#include <cmath>
#include <string>

namespace cael::oracle {

namespace {

void check_pmf(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && std::isfinite(v))) {
      throw InvalidArgument(std::string(what) + ": invalid pmf entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidArgument(std::string(what) + ": pmf sums to " +
                          std::to_string(sum));
  }
}

// Draws a strictly positive pmf of length n; the last entry absorbs the
// normalization residual so the sum is exactly representable as 1.
std::vector<double> random_pmf(Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (double& v : p) {
    v = 0.05 + rng.uniform();  // bounded away from zero
    sum += v;
  }
  double acc = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    p[static_cast<std::size_t>(i)] /= sum;
    acc += p[static_cast<std::size_t>(i)];
  }
  p[static_cast<std::size_t>(n - 1)] = 1.0 - acc;
  return p;
}

}  // namespace

double DiscreteInstance::q(int x, int a, int e) const {
  double m = 0.0;
  for (int s = 0; s < num_reward_atoms(); ++s) {
    m += pr(x, a, e, s) * reward_atoms[static_cast<std::size_t>(s)];
  }
  return m;
}

double DiscreteInstance::r2(int x, int a, int e) const {
  double m = 0.0;
  for (int s = 0; s < num_reward_atoms(); ++s) {
    const double r = reward_atoms[static_cast<std::size_t>(s)];
    m += pr(x, a, e, s) * r * r;
  }
  return m;
}

double DiscreteInstance::reward_var(int x, int a, int e) const {
  const double mean = q(x, a, e);
  return r2(x, a, e) - mean * mean;
}

double DiscreteInstance::q_xa(int x, int a) const {
  double m = 0.0;
  for (int e = 0; e < num_embeddings; ++e) m += pe(x, a, e) * q(x, a, e);
  return m;
}

double DiscreteInstance::w(int x, int a) const {
  const double m = mu(x, a);
  const double p = pi(x, a);
  if (m <= 0.0) {
    if (p == 0.0) return 0.0;
    throw UnsupportedAction("instance action " + std::to_string(a) +
                            " unsupported in context " + std::to_string(x));
  }
  return p / m;
}

double DiscreteInstance::pe_marginal_mu(int x, int e) const {
  double m = 0.0;
  for (int a = 0; a < num_actions; ++a) m += mu(x, a) * pe(x, a, e);
  return m;
}

bool DiscreteInstance::full_support() const {
  for (int x = 0; x < num_contexts(); ++x) {
    for (int a = 0; a < num_actions; ++a) {
      if (mu(x, a) <= 0.0) return false;
    }
  }
  return true;
}

bool DiscreteInstance::no_direct_effect(double tol) const {
  // Compare reward pmfs across all actions that can reach each (x, e).
  for (int x = 0; x < num_contexts(); ++x) {
    for (int e = 0; e < num_embeddings; ++e) {
      int ref = -1;
      for (int a = 0; a < num_actions; ++a) {
        if (mu(x, a) <= 0.0 || pe(x, a, e) <= 0.0) continue;
        if (ref < 0) {
          ref = a;
          continue;
        }
        for (int s = 0; s < num_reward_atoms(); ++s) {
          if (std::abs(pr(x, a, e, s) - pr(x, ref, e, s)) > tol) return false;
        }
      }
    }
  }
  return true;
}

void DiscreteInstance::validate() const {
  const int nx = num_contexts();
  if (nx < 1 || num_actions < 1 || num_embeddings < 1 ||
      num_reward_atoms() < 1) {
    throw InvalidArgument("DiscreteInstance: empty dimension");
  }
  for (double r : reward_atoms) {
    if (!std::isfinite(r)) throw InvalidArgument("non-finite reward atom");
  }
  check_pmf(context_pmf, "context_pmf");
  for (int x = 0; x < nx; ++x) {
    check_pmf(std::span<const double>(&behavior[static_cast<std::size_t>(x) *
                                                num_actions],
                                      static_cast<std::size_t>(num_actions)),
              "behavior");
    check_pmf(std::span<const double>(
                  &target[static_cast<std::size_t>(x) * num_actions],
                  static_cast<std::size_t>(num_actions)),
              "target");
    for (int a = 0; a < num_actions; ++a) {
      const std::size_t base =
          (static_cast<std::size_t>(x) * num_actions + a) * num_embeddings;
      check_pmf(std::span<const double>(&embed_pmf[base],
                                        static_cast<std::size_t>(
                                            num_embeddings)),
                "embed_pmf");
      for (int e = 0; e < num_embeddings; ++e) {
        const std::size_t rbase = (base + e) * num_reward_atoms();
        check_pmf(std::span<const double>(&reward_pmf[rbase],
                                          static_cast<std::size_t>(
                                              num_reward_atoms())),
                  "reward_pmf");
      }
    }
  }
}

ExactPosterior ExactPosterior::from(const DiscreteInstance& inst) {
  ExactPosterior post;
  post.num_contexts = inst.num_contexts();
  post.num_actions = inst.num_actions;
  post.num_embeddings = inst.num_embeddings;
  post.table.assign(static_cast<std::size_t>(post.num_contexts) *
                        post.num_embeddings * post.num_actions,
                    0.0);
  for (int x = 0; x < post.num_contexts; ++x) {
    for (int e = 0; e < post.num_embeddings; ++e) {
      const double marginal = inst.pe_marginal_mu(x, e);
      if (marginal <= 0.0) continue;  // unreachable pair, row left at zero
      for (int a = 0; a < post.num_actions; ++a) {
        post.table[(static_cast<std::size_t>(x) * post.num_embeddings + e) *
                       post.num_actions +
                   a] = inst.mu(x, a) * inst.pe(x, a, e) / marginal;
      }
    }
  }
  return post;
}

DiscreteInstance random_instance(Rng& rng, const RandomInstanceOptions& opt) {
  DiscreteInstance inst;
  const int nx = 2 + static_cast<int>(rng.uniform_int(
                         static_cast<std::uint64_t>(opt.max_contexts - 1)));
  inst.num_actions =
      2 + static_cast<int>(rng.uniform_int(
              static_cast<std::uint64_t>(opt.max_actions - 1)));
  inst.num_embeddings =
      2 + static_cast<int>(rng.uniform_int(
              static_cast<std::uint64_t>(opt.max_embeddings - 1)));
  const int ns = 2 + static_cast<int>(rng.uniform_int(
                         static_cast<std::uint64_t>(opt.max_reward_atoms - 1)));

  inst.contexts.resize(static_cast<std::size_t>(nx));
  for (int x = 0; x < nx; ++x) {
    inst.contexts[static_cast<std::size_t>(x)] = {rng.uniform(),
                                                  rng.uniform()};
  }
  inst.context_pmf = random_pmf(rng, nx);

  inst.reward_atoms.resize(static_cast<std::size_t>(ns));
  for (double& r : inst.reward_atoms) {
    r = rng.uniform(opt.reward_lo, opt.reward_hi);
  }

  inst.behavior.reserve(static_cast<std::size_t>(nx) * inst.num_actions);
  inst.target.reserve(inst.behavior.capacity());
  for (int x = 0; x < nx; ++x) {
    auto mu = random_pmf(rng, inst.num_actions);
    auto pi = random_pmf(rng, inst.num_actions);
    inst.behavior.insert(inst.behavior.end(), mu.begin(), mu.end());
    inst.target.insert(inst.target.end(), pi.begin(), pi.end());
  }

  inst.embed_pmf.reserve(static_cast<std::size_t>(nx) * inst.num_actions *
                         inst.num_embeddings);
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < inst.num_actions; ++a) {
      auto pe = random_pmf(rng, inst.num_embeddings);
      inst.embed_pmf.insert(inst.embed_pmf.end(), pe.begin(), pe.end());
    }
  }

  inst.reward_pmf.resize(static_cast<std::size_t>(nx) * inst.num_actions *
                         inst.num_embeddings * ns);
  if (opt.require_no_direct_effect) {
    // One reward pmf per (x, e), copied across actions.
    for (int x = 0; x < nx; ++x) {
      for (int e = 0; e < inst.num_embeddings; ++e) {
        auto pr = random_pmf(rng, ns);
        for (int a = 0; a < inst.num_actions; ++a) {
          const std::size_t base =
              ((static_cast<std::size_t>(x) * inst.num_actions + a) *
                   inst.num_embeddings +
               e) *
              ns;
          std::copy(pr.begin(), pr.end(), inst.reward_pmf.begin() + base);
        }
      }
    }
  } else {
    for (int x = 0; x < nx; ++x) {
      for (int a = 0; a < inst.num_actions; ++a) {
        for (int e = 0; e < inst.num_embeddings; ++e) {
          auto pr = random_pmf(rng, ns);
          const std::size_t base =
              ((static_cast<std::size_t>(x) * inst.num_actions + a) *
                   inst.num_embeddings +
               e) *
              ns;
          std::copy(pr.begin(), pr.end(), inst.reward_pmf.begin() + base);
        }
      }
    }
  }
  inst.validate();
  return inst;
}

}  // namespace cael::oracle
