#include <doctest.h>

#include <cmath>

#include "cael/models.hpp"

using namespace cael;
using namespace cael::models;

TEST_CASE("zero parameters give a zero embedding") {
  EmbeddingNet net(3, 4, 8, 0.2, 1);
  std::vector<double> zeros(static_cast<std::size_t>(net.num_parameters()),
                            0.0);
  net.set_parameters(zeros);
  const std::vector<double> e = embed_forward(net, {0.3, 0.1, 0.9}, 2);
  for (double v : e) CHECK(v == 0.0);
  CHECK(predict_reward(net, {0.3, 0.1, 0.9}, 2) == 0.0);
}

TEST_CASE("eval mode is deterministic") {
  EmbeddingNet net(4, 6, 16, 0.2, 7);
  const ContextVector x{0.2, 0.4, 0.6, 0.8};
  const std::vector<double> a = embed_forward(net, x, 3);
  const std::vector<double> b = embed_forward(net, x, 3);
  CHECK(a == b);
  CHECK(static_cast<int>(a.size()) == 4);
}

TEST_CASE("identical construction seeds give identical parameters") {
  EmbeddingNet a(4, 6, 16, 0.2, 99);
  EmbeddingNet b(4, 6, 16, 0.2, 99);
  CHECK(a.parameters() == b.parameters());
  EmbeddingNet c(4, 6, 16, 0.2, 100);
  CHECK(a.parameters() != c.parameters());
}

TEST_CASE("batchnorm standardizes train-mode pre-activations") {
  const int b = 64;
  const int d = 5;
  EmbeddingNet net(d, 10, 12, 0.0, 3);
  Eigen::MatrixXd x(b, d);
  Rng rng(11);
  std::vector<int> actions;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform();
    actions.push_back(static_cast<int>(rng.uniform_int(10)));
  }
  EmbeddingNet::ForwardCache cache;
  Rng drop(5);
  net.forward(x, actions, Mode::kTrain, &drop, &cache);
  // Normalized pre-affine activations: per-unit mean 0, variance 1 (up to
  // the epsilon inside the variance estimate).
  for (int j = 0; j < 12; ++j) {
    const double mean = cache.n1.col(j).mean();
    const double var = cache.n1.col(j).squaredNorm() / b - mean * mean;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("reward head is the embedding-context dot product") {
  EmbeddingNet net(3, 5, 8, 0.2, 21);
  const ContextVector x{0.5, -1.0, 2.0};
  const std::vector<double> e = embed_forward(net, x, 1);
  double dot = 0.0;
  for (int j = 0; j < 3; ++j) dot += e[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
  CHECK(predict_reward(net, x, 1) == doctest::Approx(dot).epsilon(1e-15));
}

TEST_CASE("parameter flattening round-trips") {
  EmbeddingNet net(4, 7, 10, 0.2, 13);
  const std::vector<double> p = net.parameters();
  CHECK(static_cast<int>(p.size()) == net.num_parameters());
  EmbeddingNet other(4, 7, 10, 0.2, 14);
  other.set_parameters(p);
  CHECK(other.parameters() == p);
  const ContextVector x{0.1, 0.2, 0.3, 0.4};
  CHECK(embed_forward(net, x, 5) == embed_forward(other, x, 5));
}

TEST_CASE("checkpoint round-trip preserves behavior") {
  EmbeddingNet net(3, 4, 8, 0.2, 31);
  PosteriorModel posterior(3, 3, 4);
  // Give the posterior nonzero weights so the round-trip is non-trivial.
  Eigen::MatrixXd u = Eigen::MatrixXd::Random(4, 6);
  Eigen::VectorXd c = Eigen::VectorXd::Random(4);
  posterior.set_weights(u, c);

  const std::string path = "checkpoint_test.bin";
  save_checkpoint(net, posterior, path);
  TrainedModels loaded = load_checkpoint(path);

  const ContextVector x{0.3, 0.6, 0.9};
  CHECK(embed_forward(net, x, 2) == embed_forward(loaded.net, x, 2));
  const std::vector<double> e = embed_forward(net, x, 2);
  std::vector<double> p1(4), p2(4);
  posterior.probs(x, e, p1);
  loaded.posterior.probs(x, e, p2);
  CHECK(p1 == p2);
  std::remove(path.c_str());
}

TEST_CASE("posterior fits separable classes") {
  // One-hot embeddings per action: with plenty of data the posterior should
  // concentrate on the encoded action.
  const int k = 4;
  const int n = 400;
  Rng rng(17);
  std::vector<std::pair<ContextVector, std::vector<double>>> features;
  std::vector<ActionId> labels;
  for (int i = 0; i < n; ++i) {
    const int a = static_cast<int>(rng.uniform_int(k));
    std::vector<double> e(k, 0.0);
    e[static_cast<std::size_t>(a)] = 1.0;
    features.push_back({{rng.uniform()}, e});
    labels.push_back(a);
  }
  PosteriorFitConfig cfg;
  cfg.epochs = 600;
  cfg.batch_size = 128;
  cfg.learning_rate = 2.0;
  cfg.l2 = 1e-5;
  const PosteriorModel model = fit_posterior(features, labels, k, cfg, 5);
  for (int a = 0; a < k; ++a) {
    std::vector<double> e(k, 0.0);
    e[static_cast<std::size_t>(a)] = 1.0;
    std::vector<double> p(k);
    model.probs({0.5}, e, p);
    CHECK(p[static_cast<std::size_t>(a)] >= 0.95);
  }
}

TEST_CASE("posterior with no signal stays near uniform") {
  const int k = 5;
  const int n = 500;
  Rng rng(23);
  std::vector<std::pair<ContextVector, std::vector<double>>> features;
  std::vector<ActionId> labels;
  for (int i = 0; i < n; ++i) {
    features.push_back({{0.5}, {1.0, 1.0}});  // identical features
    labels.push_back(i % k);                  // near-uniform labels
  }
  PosteriorFitConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 100;
  cfg.learning_rate = 0.5;
  const PosteriorModel model = fit_posterior(features, labels, k, cfg, 6);
  std::vector<double> p(k);
  const std::vector<double> e_probe{1.0, 1.0};
  model.probs({0.5}, e_probe, p);
  for (double v : p) CHECK(std::abs(v - 1.0 / k) < 0.05);
}

TEST_CASE("posterior orders two linearly separable samples") {
  std::vector<std::pair<ContextVector, std::vector<double>>> features{
      {{0.0}, {1.0}}, {{0.0}, {-1.0}}};
  std::vector<ActionId> labels{0, 1};
  PosteriorFitConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 2;
  cfg.learning_rate = 1.0;
  const PosteriorModel model = fit_posterior(features, labels, 2, cfg, 8);
  std::vector<double> p(2);
  const std::vector<double> plus{1.0};
  const std::vector<double> minus{-1.0};
  model.probs({0.0}, plus, p);
  CHECK(p[0] > p[1]);
  model.probs({0.0}, minus, p);
  CHECK(p[1] > p[0]);
}

TEST_CASE("posterior single-class batch degenerates gracefully") {
  std::vector<std::pair<ContextVector, std::vector<double>>> features;
  std::vector<ActionId> labels;
  for (int i = 0; i < 50; ++i) {
    features.push_back({{0.1}, {0.7}});
    labels.push_back(2);
  }
  PosteriorFitConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 50;
  cfg.learning_rate = 1.0;
  cfg.l2 = 0.0;
  const PosteriorModel model = fit_posterior(features, labels, 4, cfg, 9);
  std::vector<double> p(4);
  const std::vector<double> e_probe{0.7};
  model.probs({0.1}, e_probe, p);
  CHECK(p[2] > 0.9);
}

TEST_CASE("posterior rows sum to one") {
  PosteriorModel model(2, 3, 6);
  Eigen::MatrixXd u = Eigen::MatrixXd::Random(6, 5) * 3.0;
  Eigen::VectorXd c = Eigen::VectorXd::Random(6);
  model.set_weights(u, c);
  Rng rng(44);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> p(6);
    model.probs({rng.uniform(), rng.uniform()},
                std::vector<double>{rng.normal(), rng.normal(), rng.normal()},
                p);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("collision entropy") {
  CHECK(collision_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(collision_entropy(std::vector<double>{1.0, 0.0}) ==
        doctest::Approx(0.0));
  CHECK(collision_entropy(std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(collision_entropy(std::vector<double>{0.0, 0.0}),
                  InvalidArgument);
}
