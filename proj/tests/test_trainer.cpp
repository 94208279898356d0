#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "rasba/trainer.hpp"

using rasba::Dataset;
using rasba::ModelParams;

namespace {

Dataset tiny_dataset() {
  Dataset d;
  d.num_classes = 2;
  d.features.resize(4, 2);
  d.features << 1, 0, 0, 1, 1, 1, 2, -1;
  d.labels = {0, 1, 1, 1};
  return d;
}

std::vector<std::size_t> all_rows(const Dataset& d) {
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Plain-loop softmax cross-entropy, independent of the Eigen path.
double reference_loss(const ModelParams& m, const Dataset& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> z(static_cast<std::size_t>(m.num_classes));
    for (int k = 0; k < m.num_classes; ++k) {
      double s = m.values[m.num_classes * m.dim + k];
      for (int j = 0; j < m.dim; ++j) s += m.values[k * m.dim + j] * d.features(static_cast<long>(i), j);
      z[static_cast<std::size_t>(k)] = s;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double norm = 0.0;
    for (double v : z) norm += std::exp(v - mx);
    total += -(z[static_cast<std::size_t>(d.labels[i])] - mx - std::log(norm));
  }
  return total / static_cast<double>(d.size());
}

ModelParams random_model(int k, int dim, rasba::Rng& rng, double scale = 1.0) {
  auto m = ModelParams::zeros(k, dim);
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("full-batch step matches a hand-computed gradient") {
  const auto data = tiny_dataset();
  const auto shard = all_rows(data);
  const auto zero = ModelParams::zeros(2, 2);

  Eigen::VectorXd grad;
  const double loss = rasba::loss_and_gradient(zero, data, shard, grad);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // At the zero model every probability is 1/2, so grad = mean((p - y) x).
  const Eigen::VectorXd expected_grad{{0.25, 0.125, -0.25, -0.125, 0.25, -0.25}};
  CHECK((grad - expected_grad).cwiseAbs().maxCoeff() < 1e-12);

  rasba::Rng rng(1);
  const auto result = rasba::local_train(zero, data, shard, 4, 1, 0.5, rng);
  CHECK(result.steps == 1);
  const Eigen::VectorXd expected{{-0.125, -0.0625, 0.125, 0.0625, -0.125, 0.125}};
  CHECK((result.model.values - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("analytic gradient matches central finite differences") {
  rasba::BlobSpec spec;
  spec.num_classes = 4;
  spec.dim = 5;
  spec.n_train = 40;
  spec.n_test = 4;
  const auto data = rasba::make_blobs(spec, 3).train;
  const auto rows = all_rows(data);
  rasba::Rng rng(17);
  for (int point = 0; point < 100; ++point) {
    auto model = random_model(spec.num_classes, spec.dim, rng);
    Eigen::VectorXd grad;
    const double loss = rasba::loss_and_gradient(model, data, rows, grad);
    CHECK(loss == doctest::Approx(reference_loss(model, data)).epsilon(1e-12));

    Eigen::VectorXd fd(grad.size());
    constexpr double h = 1e-5;
    Eigen::VectorXd scratch;
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      auto plus = model;
      auto minus = model;
      plus.values[i] += h;
      minus.values[i] -= h;
      fd[i] = (rasba::loss_and_gradient(plus, data, rows, scratch) -
               rasba::loss_and_gradient(minus, data, rows, scratch)) /
              (2 * h);
    }
    const double rel = (grad - fd).norm() / std::max({grad.norm(), fd.norm(), 1e-12});
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("zero learning rate leaves the model unchanged") {
  const auto data = tiny_dataset();
  rasba::Rng rng(2);
  auto model = random_model(2, 2, rng);
  const auto result = rasba::local_train(model, data, all_rows(data), 2, 3, 0.0, rng);
  CHECK(result.model.values == model.values);
  CHECK(result.steps == 6);
}

TEST_CASE("one epoch takes ceil(n / b) steps") {
  rasba::BlobSpec spec;
  spec.n_train = 1000;
  const auto data = rasba::make_blobs(spec, 5).train;
  std::vector<std::size_t> shard(997);
  std::iota(shard.begin(), shard.end(), 0);
  for (rasba::BatchSize b : {1, 4, 64, 100, 256, 996, 997}) {
    rasba::Rng rng(3);
    const auto result = rasba::local_train(ModelParams::zeros(10, 32), data, shard, b, 1, 0.01, rng);
    CHECK(result.steps == static_cast<std::size_t>((997 + b - 1) / b));
  }
  rasba::Rng rng(3);
  CHECK_THROWS_AS(rasba::local_train(ModelParams::zeros(10, 32), data, shard, 998, 1, 0.1, rng),
                  std::invalid_argument);
}

TEST_CASE("an epoch at small learning rate does not increase training loss") {
  const auto split = rasba::make_blobs(rasba::BlobSpec{}, 8);
  std::vector<std::size_t> shard(1000);
  std::iota(shard.begin(), shard.end(), 0);
  const auto start = ModelParams::zeros(10, 32);
  Eigen::VectorXd grad;
  const double before = rasba::loss_and_gradient(start, split.train, shard, grad);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    rasba::Rng rng(seed);
    const auto trained = rasba::local_train(start, split.train, shard, 32, 1, 0.01, rng);
    CHECK(rasba::loss_and_gradient(trained.model, split.train, shard, grad) <= before);
  }
}

TEST_CASE("non-finite loss is surfaced") {
  const auto data = tiny_dataset();
  auto model = ModelParams::zeros(2, 2);
  model.values[0] = std::numeric_limits<double>::quiet_NaN();
  rasba::Rng rng(1);
  CHECK_THROWS_AS(rasba::local_train(model, data, all_rows(data), 2, 1, 0.1, rng), rasba::NonFiniteLoss);
}

TEST_CASE("fedavg weighted means") {
  auto scalar = [](double v) {
    ModelParams p;
    p.num_classes = 1;
    p.dim = 0;
    p.values = Eigen::VectorXd::Constant(1, v);
    return p;
  };
  const std::vector<rasba::WeightedUpdate> weighted{{0, scalar(0.0), 1.0}, {1, scalar(4.0), 3.0}};
  CHECK(rasba::fedavg(weighted).values[0] == doctest::Approx(3.0).epsilon(1e-15));

  rasba::Rng rng(4);
  const auto a = random_model(3, 4, rng);
  const auto b = random_model(3, 4, rng);
  const std::vector<rasba::WeightedUpdate> pair{{0, a, 50.0}, {1, b, 50.0}};
  const auto mid = rasba::fedavg(pair);
  CHECK((mid.values - 0.5 * (a.values + b.values)).cwiseAbs().maxCoeff() < 1e-12);

  const std::vector<rasba::WeightedUpdate> one{{3, a, 7.0}};
  CHECK((rasba::fedavg(one).values - a.values).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("fedavg result does not depend on input order") {
  rasba::Rng rng(6);
  std::vector<rasba::WeightedUpdate> updates;
  for (int i = 0; i < 9; ++i) updates.push_back({i, random_model(10, 32, rng), 100.0 + 37.0 * i});
  const auto reference = rasba::fedavg(updates);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(updates.begin(), updates.end(), rng);
    CHECK(rasba::fedavg(updates).values == reference.values);  // bitwise
  }
}

TEST_CASE("fedavg rejects bad input") {
  CHECK_THROWS_AS(rasba::fedavg({}), std::invalid_argument);
  const std::vector<rasba::WeightedUpdate> mismatch{{0, ModelParams::zeros(2, 2), 1.0},
                                                    {1, ModelParams::zeros(2, 3), 1.0}};
  CHECK_THROWS_AS(rasba::fedavg(mismatch), std::invalid_argument);
  const std::vector<rasba::WeightedUpdate> weightless{{0, ModelParams::zeros(2, 2), 0.0}};
  CHECK_THROWS_AS(rasba::fedavg(weightless), std::invalid_argument);
}

TEST_CASE("evaluate: chance level and a perfect classifier") {
  // Random labels with random features: any fixed model sits near 1/K.
  rasba::Rng rng(9);
  Dataset noise;
  noise.num_classes = 10;
  noise.features.resize(50'000, 8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, 9);
  for (Eigen::Index i = 0; i < noise.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) noise.features(i, j) = n(rng);
    noise.labels.push_back(label(rng));
  }
  const auto chance = rasba::evaluate(random_model(10, 8, rng), noise);
  CHECK(chance.accuracy == doctest::Approx(0.1).epsilon(0.05));

  // Nearest-center rule on well separated blobs classifies everything.
  rasba::BlobSpec spec;
  spec.center_scale = 10.0;
  spec.noise = 0.1;
  const auto blobs = rasba::make_blobs(spec, 2);
  auto oracle = ModelParams::zeros(10, 32);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd center = Eigen::VectorXd::Zero(32);
    int count = 0;
    for (std::size_t i = 0; i < blobs.train.size(); ++i) {
      if (blobs.train.labels[i] != k) continue;
      center += blobs.train.features.row(static_cast<Eigen::Index>(i)).transpose();
      ++count;
    }
    center /= count;
    oracle.weights().row(k) = center.transpose();
    oracle.biases()[k] = -0.5 * center.squaredNorm();
  }
  CHECK(rasba::evaluate(oracle, blobs.test).accuracy == 1.0);
}

TEST_CASE("dirichlet_partition is a partition") {
  const auto data = rasba::make_blobs(rasba::BlobSpec{}, 1).train;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (double alpha : {0.05, 1.0, 10.0}) {
      rasba::Rng rng(seed);
      const auto shards = rasba::dirichlet_partition(data.labels, 10, {alpha, 10, 20}, rng);
      REQUIRE(shards.size() == 10);
      std::vector<int> hits(data.size(), 0);
      for (const auto& s : shards) {
        CHECK(s.size() >= 20);
        for (auto i : s) ++hits[i];
      }
      CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
  }
}

TEST_CASE("dirichlet_partition concentrates to uniform class shares as alpha grows") {
  const auto data = rasba::make_blobs(rasba::BlobSpec{}, 1).train;  // 1000 per class
  rasba::Rng rng(12);
  const auto shards = rasba::dirichlet_partition(data.labels, 10, {1e6, 10, 1}, rng);
  for (const auto& s : shards) {
    std::vector<int> per_class(10, 0);
    for (auto i : s) ++per_class[static_cast<std::size_t>(data.labels[i])];
    for (int c : per_class) CHECK(std::abs(c - 100) <= 3);
  }
}

TEST_CASE("alpha = 10 over 10 clients gives near-balanced shards") {
  // Monte Carlo over seeds: max/min shard size ratio below 1.6 in >= 95% of runs.
  const auto data = rasba::make_blobs(rasba::BlobSpec{}, 1).train;
  int balanced = 0;
  constexpr int kSeeds = 200;
  for (int seed = 0; seed < kSeeds; ++seed) {
    rasba::Rng rng(static_cast<std::uint64_t>(seed));
    const auto shards = rasba::dirichlet_partition(data.labels, 10, {10.0, 10, 1}, rng);
    auto [lo, hi] = std::minmax_element(shards.begin(), shards.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
    if (static_cast<double>(hi->size()) / static_cast<double>(lo->size()) < 1.6) ++balanced;
  }
  CHECK(balanced >= kSeeds * 95 / 100);
}

TEST_CASE("dirichlet_partition rejects infeasible minimum shard sizes") {
  const std::vector<int> labels(100, 0);
  rasba::Rng rng(1);
  CHECK_THROWS_AS(rasba::dirichlet_partition(labels, 1, {10.0, 10, 11}, rng), std::invalid_argument);
  CHECK_NOTHROW(rasba::dirichlet_partition(labels, 1, {10.0, 10, 10}, rng));
}

TEST_CASE("csv dataset import") {
  const auto dir = std::filesystem::temp_directory_path() / "rasba_csv_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "x.csv");
    for (int i = 0; i < 20; ++i) f << i << ", " << (i % 3) * 0.5 << "\n";
    std::ofstream l(dir / "y.csv");
    for (int i = 0; i < 20; ++i) l << (i % 2) << "\n";
  }
  const auto split = rasba::load_csv_dataset(dir / "x.csv", dir / "y.csv", 0.25, 1);
  CHECK(split.train.size() == 15);
  CHECK(split.test.size() == 5);
  CHECK(split.train.dim() == 2);
  CHECK(split.train.num_classes == 2);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "1,2\n3,oops\n";
  }
  CHECK_THROWS_AS(rasba::load_csv_dataset(dir / "bad.csv", dir / "y.csv", 0.25, 1), std::invalid_argument);
  CHECK_THROWS_AS(rasba::load_csv_dataset(dir / "missing.csv", dir / "y.csv", 0.25, 1), std::invalid_argument);
  std::filesystem::remove_all(dir);
}
