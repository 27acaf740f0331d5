#include "robusttc/bench.hpp"

#include "robusttc/completion.hpp"
#include "robusttc/io.hpp"
#include "robusttc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

namespace robusttc {

namespace {

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& engine) {
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(engine);
  return m;
}

Vector gaussian_vector(Index n, std::mt19937_64& engine) {
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(engine);
  return v;
}

std::vector<std::pair<Index, Index>> off_diagonal_pairs(Index n) {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(static_cast<size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

}  // namespace

PlantedMatrixInstance planted_partition_matrix(Index n, int k_star, std::uint64_t seed) {
  if (k_star < 1 || static_cast<Index>(k_star) > n)
    throw std::invalid_argument("planted_partition_matrix: need 1 <= K <= n");
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  auto engine = make_engine(seed);
  std::shuffle(order.begin(), order.end(), engine);

  std::vector<int> assignments(n, 0);
  const Index base = n / k_star;
  const Index extra = n % k_star;
  Index pos = 0;
  for (int k = 0; k < k_star; ++k) {
    const Index size = base + (k < extra ? 1 : 0);
    for (Index s = 0; s < size; ++s) assignments[order[pos++]] = k;
  }

  PlantedMatrixInstance inst;
  inst.partition = Partition(std::move(assignments), k_star);
  inst.x_star = inst.partition.block_matrix();
  return inst;
}

PartialMatrix observe_and_corrupt(PlantedMatrixInstance& inst, Scalar observe_frac,
                                  Scalar corrupt_frac, std::uint64_t seed) {
  if (observe_frac < 0.0 || observe_frac > 1.0 || corrupt_frac < 0.0 || corrupt_frac > 1.0)
    throw std::invalid_argument("observe_and_corrupt: fractions must lie in [0,1]");
  const Index n = inst.x_star.rows();
  auto pairs = off_diagonal_pairs(n);
  auto engine = make_engine(seed);
  std::shuffle(pairs.begin(), pairs.end(), engine);

  const auto num_observed =
      static_cast<size_t>(std::ceil(observe_frac * static_cast<Scalar>(pairs.size())));
  pairs.resize(std::min(num_observed, pairs.size()));

  PartialMatrix y(n);
  for (Index i = 0; i < n; ++i) y.set(i, i, 1.0);
  for (const auto& [i, j] : pairs) {
    y.set(i, j, inst.x_star(i, j));
    y.set(j, i, inst.x_star(j, i));
  }

  std::shuffle(pairs.begin(), pairs.end(), engine);
  const auto num_corrupt =
      static_cast<size_t>(std::ceil(corrupt_frac * static_cast<Scalar>(pairs.size())));
  inst.corrupted.assign(pairs.begin(), pairs.begin() + std::min(num_corrupt, pairs.size()));
  for (const auto& [i, j] : inst.corrupted) {
    const Scalar flipped = 1.0 - y.values(i, j);
    y.values(i, j) = flipped;
    y.values(j, i) = flipped;
  }

  inst.observed = y;
  return y;
}

Scalar ari(const Partition& p, const Partition& q) {
  if (p.size() != q.size()) throw std::invalid_argument("ari: partition sizes differ");
  const Index n = p.size();
  Scalar both = 0, neither = 0, only_p = 0, only_q = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const bool in_p = p.assignments[i] == p.assignments[j];
      const bool in_q = q.assignments[i] == q.assignments[j];
      if (in_p && in_q)
        both += 1;
      else if (!in_p && !in_q)
        neither += 1;
      else if (in_p)
        only_p += 1;
      else
        only_q += 1;
    }
  }
  if (only_p == 0 && only_q == 0) return 1.0;
  const Scalar numer = 2.0 * (both * neither - only_p * only_q);
  const Scalar denom =
      (both + only_p) * (only_p + neither) + (both + only_q) * (only_q + neither);
  return numer / denom;
}

void TaskSuiteSpec::validate() const {
  if (num_clusters < 1) throw std::invalid_argument("suite: num_clusters must be >= 1");
  if (tasks_per_cluster < 1)
    throw std::invalid_argument("suite: tasks_per_cluster must be >= 1");
  if (min_labels_per_task < 2 || max_labels_per_task < min_labels_per_task)
    throw std::invalid_argument("suite: need 2 <= min_labels <= max_labels");
  if (instances_per_label < 7)
    throw std::invalid_argument("suite: instances_per_label must be >= 7 for nonempty splits");
  if (subspace_dim < 1 || ambient_dim < 1)
    throw std::invalid_argument("suite: dimensions must be positive");
  const Index blocks = num_clusters + (include_novel_target ? 1 : 0);
  if (blocks * subspace_dim > ambient_dim)
    throw std::invalid_argument("suite: orthogonal subspaces need blocks*subspace_dim <= ambient_dim");
  if (noise_scale < 0.0) throw std::invalid_argument("suite: noise_scale must be >= 0");
  if (num_targets < 0) throw std::invalid_argument("suite: num_targets must be >= 0");
  if (target_shots < 1 || target_queries_per_label < 1)
    throw std::invalid_argument("suite: target sizes must be positive");
  if (include_novel_target && novel_target_labels < 2)
    throw std::invalid_argument("suite: novel_target_labels must be >= 2");
}

namespace {

struct SplitSizes {
  int train, valid, test;
};

SplitSizes stratified_sizes(int m) {
  SplitSizes s;
  s.train = static_cast<int>(std::floor(0.64 * m));
  s.valid = static_cast<int>(std::floor(0.16 * m));
  s.test = m - s.train - s.valid;
  return s;
}

Task sample_cluster_task(const TaskSuiteSpec& spec, const Matrix& basis,
                         const std::string& id, std::uint64_t seed) {
  auto engine = make_engine(seed);
  std::uniform_int_distribution<int> label_count(spec.min_labels_per_task,
                                                 spec.max_labels_per_task);
  const int labels = label_count(engine);
  const auto sizes = stratified_sizes(spec.instances_per_label);
  // 1/sqrt(d) keeps feature norms O(1) regardless of ambient_dim, so
  // inner-product logits stay in a trainable range.
  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(spec.ambient_dim));

  Task task;
  task.id = id;
  for (int label = 0; label < labels; ++label) {
    const Vector proto = basis * gaussian_vector(basis.cols(), engine);
    for (int i = 0; i < spec.instances_per_label; ++i) {
      LabeledExample ex;
      ex.label = label;
      ex.features =
          scale * (proto + spec.noise_scale * gaussian_vector(spec.ambient_dim, engine));
      if (i < sizes.train)
        task.train.push_back(std::move(ex));
      else if (i < sizes.train + sizes.valid)
        task.valid.push_back(std::move(ex));
      else
        task.test.push_back(std::move(ex));
    }
  }
  finalize_task(task);
  return task;
}

Task sample_target_task(const TaskSuiteSpec& spec, const Matrix& basis,
                        const std::string& id, std::uint64_t seed,
                        int forced_labels = 0) {
  auto engine = make_engine(seed);
  std::uniform_int_distribution<int> label_count(spec.min_labels_per_task,
                                                 spec.max_labels_per_task);
  const int labels = forced_labels > 0 ? forced_labels : label_count(engine);

  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(spec.ambient_dim));
  Task task;
  task.id = id;
  for (int label = 0; label < labels; ++label) {
    const Vector proto = basis * gaussian_vector(basis.cols(), engine);
    for (int i = 0; i < spec.target_shots + spec.target_queries_per_label; ++i) {
      LabeledExample ex;
      ex.label = label;
      ex.features =
          scale * (proto + spec.noise_scale * gaussian_vector(spec.ambient_dim, engine));
      if (i < spec.target_shots)
        task.train.push_back(std::move(ex));
      else
        task.test.push_back(std::move(ex));
    }
  }
  finalize_task(task);
  return task;
}

}  // namespace

TaskSuite generate_task_suite(const TaskSuiteSpec& spec) {
  spec.validate();
  const Index blocks = spec.num_clusters + (spec.include_novel_target ? 1 : 0);

  auto basis_engine = make_engine(spec.seed, 0);
  const Matrix gauss = gaussian_matrix(spec.ambient_dim, spec.ambient_dim, basis_engine);
  const Matrix q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
  std::vector<Matrix> bases;
  for (Index b = 0; b < blocks; ++b)
    bases.push_back(q.middleCols(b * spec.subspace_dim, spec.subspace_dim));

  TaskSuite suite;
  std::vector<int> assignments;
  for (int k = 0; k < spec.num_clusters; ++k) {
    for (int t = 0; t < spec.tasks_per_cluster; ++t) {
      const auto idx = static_cast<std::uint64_t>(suite.tasks.size());
      const std::string id =
          "train_c" + std::to_string(k) + "_t" + std::to_string(t);
      suite.tasks.push_back(
          sample_cluster_task(spec, bases[k], id, derive_seed(spec.seed, 1, idx)));
      assignments.push_back(k);
    }
  }
  suite.ground_truth = Partition(std::move(assignments), spec.num_clusters);

  for (int j = 0; j < spec.num_targets; ++j) {
    const int k = j % spec.num_clusters;
    suite.targets.push_back(sample_target_task(
        spec, bases[k], "target_" + std::to_string(j),
        derive_seed(spec.seed, 2, static_cast<std::uint64_t>(j))));
    suite.target_true_cluster.push_back(k);
  }
  if (spec.include_novel_target) {
    suite.targets.push_back(sample_target_task(
        spec, bases[spec.num_clusters], "target_novel",
        derive_seed(spec.seed, 2, static_cast<std::uint64_t>(spec.num_targets)),
        spec.novel_target_labels));
    suite.target_true_cluster.push_back(-1);
  }
  return suite;
}

std::vector<SweepCell> recovery_sweep(Index n, int k_star,
                                      const std::vector<Scalar>& observe_grid,
                                      const std::vector<Scalar>& corrupt_grid,
                                      int trials, std::uint64_t seed) {
  if (observe_grid.empty() || corrupt_grid.empty())
    throw std::invalid_argument("recovery_sweep: grids must be nonempty");
  if (trials < 1) throw std::invalid_argument("recovery_sweep: trials must be >= 1");

  std::vector<SweepCell> cells;
  std::uint64_t cell_index = 0;
  for (Scalar cf : corrupt_grid) {
    for (Scalar of : observe_grid) {
      SweepCell cell;
      cell.observe_frac = of;
      cell.corrupt_frac = cf;
      cell.trials = trials;
      int recovered = 0;
      Scalar iter_sum = 0;
      for (int t = 0; t < trials; ++t) {
        auto inst = planted_partition_matrix(
            n, k_star, derive_seed(seed, cell_index, 2 * static_cast<std::uint64_t>(t)));
        auto y = observe_and_corrupt(
            inst, of, cf, derive_seed(seed, cell_index, 2 * static_cast<std::uint64_t>(t) + 1));
        auto config = SolverConfig::defaults(n);
        // Subsampling shrinks the effective problem size; scale the sparsity
        // penalty by the observed fraction so the corruption term is weighted
        // consistently across the grid. The 1.4 factor centers the exact
        // recovery window at high observation rates for planted partitions.
        config.lambda = 1.4 / std::sqrt(of * static_cast<Scalar>(n));
        config.symmetric = true;
        const auto result = complete(y, config);
        iter_sum += result.iterations;
        if ((result.X - inst.x_star).cwiseAbs().maxCoeff() < 1e-3) ++recovered;
      }
      cell.recovery_rate = static_cast<Scalar>(recovered) / trials;
      cell.mean_iterations = iter_sum / trials;
      cells.push_back(cell);
      ++cell_index;
    }
  }
  return cells;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepCell>& cells) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "observe_frac,corrupt_frac,trials,recovery_rate,mean_iterations\n";
  for (const auto& c : cells) {
    out << format_scalar(c.observe_frac) << "," << format_scalar(c.corrupt_frac) << ","
        << c.trials << "," << format_scalar(c.recovery_rate) << ","
        << format_scalar(c.mean_iterations) << "\n";
  }
}

}  // namespace robusttc
