#include <doctest.h>

#include "robusttc/bench.hpp"
#include "robusttc/encoder.hpp"
#include "robusttc/rng.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

using namespace robusttc;

namespace {

LabeledExample ex(std::initializer_list<Scalar> coords, int label) {
  Vector v(static_cast<Index>(coords.size()));
  Index i = 0;
  for (Scalar c : coords) v(i++) = c;
  return {label, v};
}

// From-scratch reimplementations of both heads and the episode loss, written
// directly from their definitions.
Vector naive_mnet(const Vector& x, const SupportSet& s, const Encoder& enc) {
  Vector fx = enc.weights * x;
  Vector scores(static_cast<Index>(s.instances.size()));
  for (size_t i = 0; i < s.instances.size(); ++i)
    scores(static_cast<Index>(i)) = fx.dot(enc.weights * s.instances[i].features);
  Scalar m = scores.maxCoeff();
  Vector alpha = (scores.array() - m).exp();
  alpha /= alpha.sum();
  Vector probs = Vector::Zero(s.num_labels);
  for (size_t i = 0; i < s.instances.size(); ++i)
    probs(s.instances[i].label) += alpha(static_cast<Index>(i));
  return probs;
}

Vector naive_protonet(const Vector& x, const SupportSet& s, const Encoder& enc) {
  Matrix sums = Matrix::Zero(enc.embed_dim(), s.num_labels);
  for (const auto& inst : s.instances) sums.col(inst.label) += enc.weights * inst.features;
  Vector fx = enc.weights * x;
  Vector scores = sums.transpose() * fx;
  Scalar m = scores.maxCoeff();
  Vector probs = (scores.array() - m).exp();
  probs /= probs.sum();
  return probs;
}

Scalar naive_loss(const Episode& e, const Encoder& enc, PredictionHead head) {
  Scalar total = 0.0;
  for (const auto& q : e.batch) {
    Vector p = head == PredictionHead::MNet ? naive_mnet(q.features, e.support, enc)
                                            : naive_protonet(q.features, e.support, enc);
    total -= std::log(std::max(p(q.label), 1e-12));
  }
  return total / static_cast<Scalar>(e.batch.size());
}

Episode random_episode(Index d, int num_labels, int support_per, int batch, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<Scalar> normal;
  auto draw = [&](int label) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v(i) = normal(gen);
    return LabeledExample{label, v};
  };
  Episode e;
  std::vector<LabeledExample> sup;
  for (int l = 0; l < num_labels; ++l)
    for (int s = 0; s < support_per; ++s) sup.push_back(draw(l));
  e.support = make_support(std::move(sup), num_labels);
  std::uniform_int_distribution<int> pick(0, num_labels - 1);
  for (int b = 0; b < batch; ++b) e.batch.push_back(draw(pick(gen)));
  return e;
}

}  // namespace

TEST_CASE("encoder initialization is bounded and deterministic") {
  auto enc = init_encoder(16, 4, 99);
  CHECK(enc.input_dim() == 16);
  CHECK(enc.embed_dim() == 4);
  Scalar bound = 1.0 / std::sqrt(16.0);
  CHECK(enc.weights.maxCoeff() <= bound);
  CHECK(enc.weights.minCoeff() >= -bound);
  CHECK(enc.weights.cwiseAbs().maxCoeff() > 0.0);

  auto again = init_encoder(16, 4, 99);
  CHECK((enc.weights - again.weights).cwiseAbs().maxCoeff() == 0.0);
  auto other = init_encoder(16, 4, 100);
  CHECK((enc.weights - other.weights).cwiseAbs().maxCoeff() != 0.0);

  CHECK_THROWS_AS(init_encoder(0, 4, 1), std::invalid_argument);
}

TEST_CASE("encoders round trip through disk bitwise") {
  namespace fs = std::filesystem;
  auto enc = init_encoder(7, 3, 5);
  enc.weights(1, 2) = 1e-300;
  enc.weights(2, 6) = -1.0 / 3.0;
  auto path = fs::temp_directory_path() / "enc_roundtrip_test.csv";
  save_encoder(path, enc);
  auto back = load_encoder(path);
  fs::remove(path);
  REQUIRE(back.weights.rows() == 3);
  REQUIRE(back.weights.cols() == 7);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 7; ++j) CHECK(back.weights(i, j) == enc.weights(i, j));
}

TEST_CASE("softmax is shift-stable and argmax breaks ties low") {
  Vector big(2);
  big << 1000.0, 1001.0;
  Vector p = softmax(big);
  CHECK(std::isfinite(p(0)));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(1) > p(0));

  Vector shifted(2);
  shifted << 0.0, 1.0;
  Vector q = softmax(shifted);
  CHECK(std::abs(p(0) - q(0)) <= 1e-12);

  Vector tie(3);
  tie << 2.0, 5.0, 5.0;
  CHECK(argmax(tie) == 1);
}

TEST_CASE("attention head hand examples") {
  Encoder zero{Matrix::Zero(2, 2)};
  SupportSet s = make_support({ex({1.0, 0.0}, 0), ex({0.0, 1.0}, 1)}, 2);
  Vector q(2);
  q << 1.0, 0.0;
  Vector p = mnet_predict(q, s, zero);
  CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-12));

  Encoder id{Matrix::Identity(2, 2)};
  Vector pi = mnet_predict(q, s, id);
  // Scores are (1, 0), so the label mass is the logistic pair.
  CHECK(std::abs(pi(0) - 0.7310585786300049) <= 1e-12);
  CHECK(std::abs(pi(1) - 0.26894142136999512) <= 1e-12);

  SupportSet lone = make_support({ex({3.0, -1.0}, 0)}, 1);
  Vector one = mnet_predict(q, lone, id);
  CHECK(one(0) == doctest::Approx(1.0).epsilon(1e-12));

  SupportSet empty;
  empty.num_labels = 2;
  CHECK_THROWS_AS(mnet_predict(q, empty, id), std::invalid_argument);
}

TEST_CASE("attention head outputs distributions invariant to support order") {
  auto e = random_episode(5, 3, 2, 4, 7);
  Encoder enc = init_encoder(5, 3, 8);
  for (const auto& q : e.batch) {
    Vector p = mnet_predict(q.features, e.support, enc);
    CHECK(p.size() == 3);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
  }

  SupportSet reversed = e.support;
  std::reverse(reversed.instances.begin(), reversed.instances.end());
  for (const auto& q : e.batch) {
    Vector a = mnet_predict(q.features, e.support, enc);
    Vector b = mnet_predict(q.features, reversed, enc);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("prototype head hand examples") {
  Encoder id{Matrix::Identity(2, 2)};
  Vector q(2);
  q << 1.0, 0.0;
  SupportSet s =
      make_support({ex({1.0, 0.0}, 0), ex({1.0, 0.0}, 0), ex({0.0, 1.0}, 1)}, 2);
  Vector p = protonet_predict(q, s, id);
  // Class sums give scores (2, 0).
  CHECK(std::abs(p(0) - 0.8807970779778823) <= 1e-12);
  CHECK(std::abs(p(1) - 0.11920292202211755) <= 1e-12);

  SupportSet balanced =
      make_support({ex({1.0, 1.0}, 0), ex({1.0, 1.0}, 1)}, 2);
  Vector u = protonet_predict(q, balanced, id);
  CHECK(u(0) == doctest::Approx(0.5).epsilon(1e-12));

  SupportSet missing = make_support({ex({1.0, 0.0}, 0)}, 2);
  CHECK_THROWS_AS(protonet_predict(q, missing, id), std::invalid_argument);
}

TEST_CASE("one support instance per class makes both heads agree") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto e = random_episode(4, 3, 1, 6, seed);
    Encoder enc = init_encoder(4, 3, seed + 50);
    for (const auto& q : e.batch) {
      Vector a = mnet_predict(q.features, e.support, enc);
      Vector b = protonet_predict(q.features, e.support, enc);
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("episode loss matches a naive reimplementation") {
  Encoder zero{Matrix::Zero(3, 4)};
  auto e2 = random_episode(4, 2, 2, 5, 11);
  CHECK(episode_loss(e2, zero, PredictionHead::MNet) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(episode_loss(e2, zero, PredictionHead::ProtoNet) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // A query that coincides with a far-away support point of its own class is
  // predicted almost surely.
  Encoder id{Matrix::Identity(2, 2)};
  Episode close;
  close.support = make_support({ex({20.0, 0.0}, 0), ex({-20.0, 0.0}, 1)}, 2);
  close.batch = {ex({20.0, 0.0}, 0)};
  CHECK(episode_loss(close, id, PredictionHead::ProtoNet) <= 1e-9);

  for (std::uint64_t seed : {21, 22, 23}) {
    auto e = random_episode(5, 3, 2, 7, seed);
    Encoder enc = init_encoder(5, 4, seed);
    for (auto head : {PredictionHead::MNet, PredictionHead::ProtoNet})
      CHECK(std::abs(episode_loss(e, enc, head) - naive_loss(e, enc, head)) <= 1e-12);
  }
}

TEST_CASE("analytic gradients match central differences") {
  const Scalar h = 1e-5;
  struct Config {
    Index d;
    Index e;
    int labels;
    PredictionHead head;
    std::uint64_t seed;
  };
  std::vector<Config> configs = {
      {3, 2, 2, PredictionHead::MNet, 101},
      {4, 3, 3, PredictionHead::MNet, 102},
      {5, 2, 2, PredictionHead::ProtoNet, 103},
      {4, 4, 3, PredictionHead::ProtoNet, 104},
      {3, 3, 2, PredictionHead::ProtoNet, 105},
      {5, 3, 3, PredictionHead::MNet, 106},
  };
  for (const auto& cfg : configs) {
    auto ep = random_episode(cfg.d, cfg.labels, 2, 6, cfg.seed);
    Encoder enc = init_encoder(cfg.d, cfg.e, cfg.seed + 1000);
    auto [loss, grad] = episode_loss_and_gradient(ep, enc, cfg.head);
    CHECK(std::abs(loss - episode_loss(ep, enc, cfg.head)) <= 1e-12);

    Matrix fd(cfg.e, cfg.d);
    for (Index i = 0; i < cfg.e; ++i)
      for (Index j = 0; j < cfg.d; ++j) {
        Encoder up = enc;
        Encoder down = enc;
        up.weights(i, j) += h;
        down.weights(i, j) -= h;
        fd(i, j) =
            (episode_loss(ep, up, cfg.head) - episode_loss(ep, down, cfg.head)) / (2 * h);
      }
    Scalar rel = (grad - fd).norm() / std::max<Scalar>(1e-12, fd.norm());
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("zero training episodes return the initial encoder") {
  TaskSuiteSpec spec;
  spec.num_clusters = 1;
  spec.tasks_per_cluster = 1;
  spec.instances_per_label = 15;
  spec.ambient_dim = 10;
  spec.subspace_dim = 3;
  spec.min_labels_per_task = 2;
  spec.max_labels_per_task = 2;
  spec.num_targets = 0;
  spec.seed = 55;
  auto suite = generate_task_suite(spec);

  TrainConfig config;
  config.episodes = 0;
  auto trained = train_cluster_encoder(suite.tasks, config, 321);
  auto fresh = init_encoder(10, config.embed_dim, derive_seed(321, 0));
  CHECK((trained.weights - fresh.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("episodic training reduces the loss and is deterministic") {
  TaskSuiteSpec spec;
  spec.num_clusters = 1;
  spec.tasks_per_cluster = 2;
  spec.instances_per_label = 30;
  spec.ambient_dim = 16;
  spec.subspace_dim = 4;
  spec.min_labels_per_task = 3;
  spec.max_labels_per_task = 3;
  spec.noise_scale = 0.5;
  spec.num_targets = 0;
  spec.seed = 70;
  auto suite = generate_task_suite(spec);

  TrainConfig config;
  config.embed_dim = 4;
  config.episodes = 200;
  std::vector<Scalar> losses;
  auto enc = train_cluster_encoder(suite.tasks, config, 7, &losses);
  REQUIRE(losses.size() == 200);
  Scalar head = std::accumulate(losses.begin(), losses.begin() + 10, 0.0) / 10.0;
  Scalar tail = std::accumulate(losses.end() - 10, losses.end(), 0.0) / 10.0;
  CHECK(tail <= head);

  auto enc2 = train_cluster_encoder(suite.tasks, config, 7);
  CHECK((enc.weights - enc2.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training solves a cleanly separable task") {
  TaskSuiteSpec spec;
  spec.num_clusters = 1;
  spec.tasks_per_cluster = 1;
  spec.instances_per_label = 40;
  spec.ambient_dim = 12;
  spec.subspace_dim = 4;
  spec.min_labels_per_task = 3;
  spec.max_labels_per_task = 3;
  spec.noise_scale = 0.1;
  spec.num_targets = 0;
  spec.seed = 80;
  auto suite = generate_task_suite(spec);
  const auto& task = suite.tasks[0];

  // Closed-form least-squares one-hot regression certifies the task itself
  // is linearly solvable before the metric learner is held to it.
  Matrix a(static_cast<Index>(task.train.size()), task.dim + 1);
  Matrix y = Matrix::Zero(static_cast<Index>(task.train.size()), task.num_labels);
  for (size_t i = 0; i < task.train.size(); ++i) {
    a.row(static_cast<Index>(i)).head(task.dim) = task.train[i].features.transpose();
    a(static_cast<Index>(i), task.dim) = 1.0;
    y(static_cast<Index>(i), task.train[i].label) = 1.0;
  }
  Matrix coef = a.colPivHouseholderQr().solve(y);
  int ls_hits = 0;
  for (const auto& q : task.test) {
    Vector scores = coef.topRows(task.dim).transpose() * q.features + coef.row(task.dim).transpose();
    if (argmax(scores) == q.label) ++ls_hits;
  }
  CHECK(static_cast<Scalar>(ls_hits) / static_cast<Scalar>(task.test.size()) >= 0.9);

  TrainConfig config;
  config.embed_dim = 4;
  config.episodes = 300;
  auto enc = train_cluster_encoder(suite.tasks, config, 13);
  auto support = make_support(task.train, task.num_labels);
  int hits = 0;
  for (const auto& q : task.test)
    if (argmax(protonet_predict(q.features, support, enc)) == q.label) ++hits;
  CHECK(static_cast<Scalar>(hits) / static_cast<Scalar>(task.test.size()) >= 0.9);
}

TEST_CASE("duplicated task lists train comparable metrics") {
  TaskSuiteSpec spec;
  spec.num_clusters = 1;
  spec.tasks_per_cluster = 1;
  spec.instances_per_label = 30;
  spec.ambient_dim = 12;
  spec.subspace_dim = 3;
  spec.min_labels_per_task = 3;
  spec.max_labels_per_task = 3;
  spec.noise_scale = 0.3;
  spec.num_targets = 0;
  spec.seed = 90;
  auto suite = generate_task_suite(spec);
  const auto& task = suite.tasks[0];
  std::vector<Task> once = {task};
  std::vector<Task> twice = {task, task};

  TrainConfig config;
  config.embed_dim = 3;
  config.episodes = 300;
  auto support = make_support(task.train, task.num_labels);
  auto accuracy = [&](const Encoder& enc) {
    int hits = 0;
    for (const auto& q : task.test)
      if (argmax(protonet_predict(q.features, support, enc)) == q.label) ++hits;
    return static_cast<Scalar>(hits) / static_cast<Scalar>(task.test.size());
  };
  Scalar diff_total = 0.0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    Scalar a = accuracy(train_cluster_encoder(once, config, seed));
    Scalar b = accuracy(train_cluster_encoder(twice, config, seed));
    diff_total += std::abs(a - b);
  }
  CHECK(diff_total / 5.0 <= 0.05);
}

TEST_CASE("training configuration is validated") {
  TrainConfig ok;
  ok.episodes = 0;
  CHECK_NOTHROW(ok.validate());

  TrainConfig bad;
  bad.embed_dim = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  TrainConfig neg;
  neg.lr = -0.5;
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
  TrainConfig batch;
  batch.batch_size = 0;
  CHECK_THROWS_AS(batch.validate(), std::invalid_argument);
}
