#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "rasba/bounds.hpp"
#include "rasba/rng.hpp"

namespace rasba {

/// Row-major feature matrix with integer class labels in [0, num_classes).
struct Dataset {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// Throws std::invalid_argument on shape mismatch, bad labels, non-finite
// features or a missing class.
void validate(const Dataset& data);

/// Gaussian blobs: one random center per class, isotropic noise around it.
struct BlobSpec {
  int num_classes = 10;
  int dim = 32;
  std::size_t n_train = 10'000;
  std::size_t n_test = 2'000;
  double center_scale = 1.0;  // per-coordinate std-dev of class centers
  double noise = 1.0;         // per-coordinate std-dev around a center
};

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

TrainTestSplit make_blobs(const BlobSpec& spec, std::uint64_t seed);

/// Feature CSV: n rows of d comma-separated reals. Label CSV: n integers, one
/// per line. The last `test_fraction` of rows (after a seeded shuffle) is the
/// test split.
TrainTestSplit load_csv_dataset(const std::filesystem::path& features_csv,
                                const std::filesystem::path& labels_csv, double test_fraction,
                                std::uint64_t seed);

struct PartitionSpec {
  double alpha = 10.0;
  int num_clients = 10;
  std::size_t min_shard = 1;
};

using Shard = std::vector<std::size_t>;

/// Per-class Dirichlet(alpha) split over clients with largest-remainder
/// rounding, followed by a minimal rebalance so every shard reaches
/// `min_shard`. Shards are disjoint and cover every index.
std::vector<Shard> dirichlet_partition(std::span<const int> labels, int num_classes,
                                       const PartitionSpec& spec, Rng& rng);

/// Multinomial logistic regression parameters, laid out as K x d weights
/// (row-major) followed by K biases.
struct ModelParams {
  Eigen::VectorXd values;
  int num_classes = 0;
  int dim = 0;

  static ModelParams zeros(int num_classes, int dim);

  auto weights() const {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), num_classes, dim);
  }
  auto weights() {
    return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), num_classes, dim);
  }
  auto biases() const { return values.tail(num_classes); }
  auto biases() { return values.tail(num_classes); }
};

/// Raised when training produces a non-finite loss.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean softmax cross-entropy over `rows` of `data`; writes the gradient with
/// respect to every parameter into `grad` (resized as needed).
double loss_and_gradient(const ModelParams& model, const Dataset& data,
                         std::span<const std::size_t> rows, Eigen::VectorXd& grad);

struct LocalTrainResult {
  ModelParams model;
  std::size_t steps = 0;
  double last_loss = 0.0;
};

/// Mini-batch SGD over a shard. Each epoch shuffles the shard and takes
/// ceil(n / b) steps; the last batch may be short.
LocalTrainResult local_train(const ModelParams& model, const Dataset& data, const Shard& shard,
                             BatchSize batch, int epochs, double lr, Rng& rng);

struct WeightedUpdate {
  int client_id = 0;
  ModelParams params;
  double weight = 0.0;  // sample count
};

/// Sample-weighted mean. Inputs are reduced in ascending client id order.
ModelParams fedavg(std::span<const WeightedUpdate> updates);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate(const ModelParams& model, const Dataset& test);

}  // namespace rasba
