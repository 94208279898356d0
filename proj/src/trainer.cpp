#include "rasba/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace rasba {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-wise softmax in place, stabilised by the row maximum.
void softmax_rows(RowMatrix& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

RowMatrix logits_for(const ModelParams& model, const RowMatrix& x) {
  RowMatrix z = x * model.weights().transpose();
  z.rowwise() += model.biases().transpose();
  return z;
}

RowMatrix gather(const Dataset& data, std::span<const std::size_t> rows) {
  RowMatrix x(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(rows[i]));
  }
  return x;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out;
  out.features = gather(data, rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(data.labels[r]);
  out.num_classes = data.num_classes;
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

template <typename T>
T parse_cell(std::string cell, const std::filesystem::path& path, std::size_t line_no) {
  auto first = cell.find_first_not_of(" \t\r");
  auto last = cell.find_last_not_of(" \t\r");
  if (first == std::string::npos) {
    throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": empty cell");
  }
  cell = cell.substr(first, last - first + 1);
  T value{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                ": cannot parse '" + cell + "'");
  }
  return value;
}

}  // namespace

void validate(const Dataset& data) {
  if (data.num_classes < 1) throw std::invalid_argument("dataset needs at least one class");
  if (static_cast<std::size_t>(data.features.rows()) != data.labels.size()) {
    throw std::invalid_argument("feature rows and label count differ");
  }
  if (!data.features.allFinite()) throw std::invalid_argument("non-finite feature value");
  std::vector<bool> seen(static_cast<std::size_t>(data.num_classes), false);
  for (int y : data.labels) {
    if (y < 0 || y >= data.num_classes) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(data.num_classes) + ")");
    }
    seen[static_cast<std::size_t>(y)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw std::invalid_argument("every class must appear at least once");
  }
}

TrainTestSplit make_blobs(const BlobSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2 || spec.dim < 1 || spec.n_train < static_cast<std::size_t>(spec.num_classes) ||
      spec.n_test < 1) {
    throw std::invalid_argument("blob spec too small");
  }
  Rng rng = make_stream(seed, StreamTag::kDataset);
  std::normal_distribution<double> center_dist(0.0, spec.center_scale);
  RowMatrix centers(spec.num_classes, spec.dim);
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) centers(k, j) = center_dist(rng);
  }

  std::normal_distribution<double> noise(0.0, spec.noise);
  auto draw = [&](std::size_t n) {
    Dataset d;
    d.num_classes = spec.num_classes;
    d.features.resize(static_cast<Eigen::Index>(n), spec.dim);
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Round-robin labels guarantee every class is present.
      const int y = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
      d.labels[i] = y;
      for (Eigen::Index j = 0; j < spec.dim; ++j) {
        d.features(static_cast<Eigen::Index>(i), j) = centers(y, j) + noise(rng);
      }
    }
    return d;
  };
  TrainTestSplit out;
  out.train = draw(spec.n_train);
  out.test = draw(spec.n_test);
  return out;
}

TrainTestSplit load_csv_dataset(const std::filesystem::path& features_csv,
                                const std::filesystem::path& labels_csv, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  std::ifstream fin(features_csv);
  if (!fin) throw std::invalid_argument("cannot open " + features_csv.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(fin, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    for (auto& cell : split_csv_line(line)) row.push_back(parse_cell<double>(cell, features_csv, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument(features_csv.string() + ":" + std::to_string(line_no) +
                                  ": expected " + std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }

  std::ifstream lin(labels_csv);
  if (!lin) throw std::invalid_argument("cannot open " + labels_csv.string());
  std::vector<int> labels;
  line_no = 0;
  while (std::getline(lin, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    labels.push_back(parse_cell<int>(line, labels_csv, line_no));
  }
  if (rows.empty() || rows.size() != labels.size()) {
    throw std::invalid_argument("feature and label files must have the same, non-zero row count");
  }

  Dataset all;
  all.num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  all.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      all.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  all.labels = std::move(labels);
  validate(all);

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, StreamTag::kDataset);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(test_fraction * all.size()));
  if (n_test >= all.size()) throw std::invalid_argument("test split leaves no training data");
  const std::span<const std::size_t> idx(order);
  TrainTestSplit out;
  out.train = subset(all, idx.first(all.size() - n_test));
  out.test = subset(all, idx.last(n_test));
  return out;
}

std::vector<Shard> dirichlet_partition(std::span<const int> labels, int num_classes,
                                       const PartitionSpec& spec, Rng& rng) {
  if (spec.num_clients < 1) throw std::invalid_argument("need at least one client");
  if (!(spec.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const auto m = static_cast<std::size_t>(spec.num_clients);
  if (labels.size() < m * spec.min_shard) {
    throw std::invalid_argument("cannot give " + std::to_string(m) + " clients " +
                                std::to_string(spec.min_shard) + " samples each from " +
                                std::to_string(labels.size()));
  }

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  }

  std::vector<Shard> shards(m);
  std::gamma_distribution<double> gamma(spec.alpha, 1.0);
  std::vector<double> share(m);
  std::vector<std::size_t> count(m);
  std::vector<std::size_t> order(m);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    double total = 0.0;
    for (auto& s : share) total += (s = gamma(rng));
    if (!(total > 0.0)) {
      // Tiny alpha can underflow every gamma draw.
      std::fill(share.begin(), share.end(), 1.0);
      total = static_cast<double>(m);
    }

    // Largest-remainder rounding of share * |class|.
    const auto n = static_cast<double>(members.size());
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < m; ++j) {
      count[j] = static_cast<std::size_t>(std::floor(share[j] / total * n));
      assigned += count[j];
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double ra = share[a] / total * n - static_cast<double>(count[a]);
      const double rb = share[b] / total * n - static_cast<double>(count[b]);
      return ra > rb;
    });
    for (std::size_t r = 0; assigned < members.size(); ++r, ++assigned) ++count[order[r % m]];

    std::size_t pos = 0;
    for (std::size_t j = 0; j < m; ++j) {
      shards[j].insert(shards[j].end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                       members.begin() + static_cast<std::ptrdiff_t>(pos + count[j]));
      pos += count[j];
    }
  }

  // Move single samples from the largest shard to the smallest until all fit.
  for (;;) {
    auto [small, large] = std::minmax_element(shards.begin(), shards.end(),
                                              [](const Shard& a, const Shard& b) { return a.size() < b.size(); });
    if (small->size() >= spec.min_shard) break;
    small->push_back(large->back());
    large->pop_back();
  }
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

ModelParams ModelParams::zeros(int num_classes, int dim) {
  ModelParams p;
  p.num_classes = num_classes;
  p.dim = dim;
  p.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes) * (dim + 1));
  return p;
}

double loss_and_gradient(const ModelParams& model, const Dataset& data,
                         std::span<const std::size_t> rows, Eigen::VectorXd& grad) {
  if (rows.empty()) throw std::invalid_argument("loss over an empty batch");
  const RowMatrix x = gather(data, rows);
  RowMatrix probs = logits_for(model, x);
  softmax_rows(probs);

  const auto n = static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int y = data.labels[rows[i]];
    loss -= std::log(probs(r, y));
    probs(r, y) -= 1.0;  // probs now holds dLoss/dlogits * n
  }

  grad.resize(model.values.size());
  Eigen::Map<RowMatrix> grad_w(grad.data(), model.num_classes, model.dim);
  grad_w.noalias() = probs.transpose() * x / n;
  grad.tail(model.num_classes) = probs.colwise().sum().transpose() / n;
  return loss / n;
}

LocalTrainResult local_train(const ModelParams& model, const Dataset& data, const Shard& shard,
                             BatchSize batch, int epochs, double lr, Rng& rng) {
  const auto n = static_cast<BatchSize>(shard.size());
  if (batch < 1 || batch > n) {
    throw std::invalid_argument("local_train: batch " + std::to_string(batch) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  if (epochs < 1) throw std::invalid_argument("local_train: epochs must be positive");

  LocalTrainResult out{model, 0, 0.0};
  Shard order = shard;
  Eigen::VectorXd grad;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    const std::span<const std::size_t> all(order);
    for (BatchSize start = 0; start < n; start += batch) {
      const auto len = static_cast<std::size_t>(std::min(batch, n - start));
      const double loss =
          loss_and_gradient(out.model, data, all.subspan(static_cast<std::size_t>(start), len), grad);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(e) + ", step " +
                            std::to_string(out.steps) + " (batch " + std::to_string(batch) +
                            ", lr " + std::to_string(lr) + ")");
      }
      out.model.values -= lr * grad;
      out.last_loss = loss;
      ++out.steps;
    }
  }
  return out;
}

ModelParams fedavg(std::span<const WeightedUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg of no updates");
  std::vector<const WeightedUpdate*> sorted;
  sorted.reserve(updates.size());
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.params.values.size() != updates.front().params.values.size()) {
      throw std::invalid_argument("fedavg: parameter dimension mismatch");
    }
    if (u.weight < 0.0 || !std::isfinite(u.weight)) {
      throw std::invalid_argument("fedavg: weights must be finite and non-negative");
    }
    total += u.weight;
    sorted.push_back(&u);
  }
  if (!(total > 0.0)) throw std::invalid_argument("fedavg: zero total weight");
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return a->client_id < b->client_id; });

  ModelParams out = ModelParams::zeros(updates.front().params.num_classes, updates.front().params.dim);
  for (const auto* u : sorted) out.values += u->weight * u->params.values;
  out.values /= total;
  return out;
}

EvalResult evaluate(const ModelParams& model, const Dataset& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate on an empty test set");
  RowMatrix probs = logits_for(model, test.features);
  softmax_rows(probs);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int y = test.labels[i];
    loss -= std::log(probs(r, y));
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    if (best == y) ++correct;
  }
  const auto n = static_cast<double>(test.size());
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace rasba
