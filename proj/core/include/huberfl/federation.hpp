#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "huberfl/adversary.hpp"
#include "huberfl/aggregation.hpp"
#include "huberfl/rng.hpp"
#include "huberfl/tasks.hpp"

namespace huberfl {

/// Disjoint sample shards covering the dataset, one per client.
struct Allocation {
  std::vector<std::vector<std::size_t>> shards;

  std::size_t client_count() const { return shards.size(); }
  std::vector<std::int64_t> sizes() const;
  /// Inverse map: owning client per sample index.
  std::vector<int> client_of_sample(std::size_t n_samples) const;
};

/// Equal shards after a seeded shuffle; the remainder spreads one sample at a
/// time over the first clients.
Allocation allocate_balanced(std::size_t n_samples, std::size_t m, Rng& rng);

/// Random contiguous partition of the shuffled samples: m-1 distinct cut
/// points, half-open blocks. Redraws the cut set while any block is empty;
/// per-client fractions follow Beta(1, m) asymptotically.
Allocation allocate_stick_breaking(std::size_t n_samples, std::size_t m, Rng& rng);

struct ProjectionSpec {
  enum class Mode { None, Ball };
  Mode mode = Mode::None;
  Vector center;
  double radius = 0.0;
};

/// Euclidean projection; Mode::None is the identity.
Vector project(const Vector& w, const ProjectionSpec& spec);

/// Gradient/metric provider for one learning problem. Implementations own
/// their train and test data and are immutable during training.
class TrainingTask {
 public:
  virtual ~TrainingTask() = default;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t sample_count() const = 0;
  virtual Vector initial_weights(Rng& rng) const = 0;
  virtual Vector gradient(const Vector& w, IndexSpan shard) const = 0;
  virtual double metric(const Vector& w) const = 0;
  virtual const char* metric_name() const = 0;
  /// Population gradient when the task knows it (synthetic regression).
  virtual std::optional<Vector> true_gradient(const Vector&) const { return std::nullopt; }
};

/// Synthetic linear regression with RMSE metric, optional per-client
/// heterogeneity, and an analytic population gradient.
class RegressionTask final : public TrainingTask {
 public:
  RegressionTask(RegressionDataset train, RegressionDataset test);
  /// Applies Eq.-style per-client target perturbations; the population
  /// gradient shifts to w - (w* + sum n_i delta_i / N).
  void apply_heterogeneity(const ClientPerturbation& perturbation,
                           const std::vector<int>& client_of_sample);

  std::size_t param_dim() const override { return train_.dim(); }
  std::size_t sample_count() const override { return train_.size(); }
  Vector initial_weights(Rng& rng) const override;
  Vector gradient(const Vector& w, IndexSpan shard) const override;
  double metric(const Vector& w) const override;
  const char* metric_name() const override { return "rmse"; }
  std::optional<Vector> true_gradient(const Vector& w) const override;

  const RegressionDataset& train_data() const { return train_; }

 private:
  RegressionDataset train_;
  RegressionDataset test_;
  Vector effective_weights_;  // w* plus the sample-weighted mean perturbation
};

/// One-hidden-layer softmax classifier with accuracy metric.
class ClassifierTask final : public TrainingTask {
 public:
  ClassifierTask(ClassifierDataset train, ClassifierDataset test, std::size_t hidden_dim);

  std::size_t param_dim() const override;
  std::size_t sample_count() const override { return train_.size(); }
  Vector initial_weights(Rng& rng) const override;
  Vector gradient(const Vector& w, IndexSpan shard) const override;
  double metric(const Vector& w) const override;
  const char* metric_name() const override { return "accuracy"; }

  std::size_t hidden_dim() const { return hidden_; }
  const ClassifierDataset& train_data() const { return train_; }

 private:
  ClassifierDataset train_;
  ClassifierDataset test_;
  std::size_t hidden_;
};

struct RoundLog {
  int round = 0;
  double metric = 0.0;
  std::optional<double> aggregation_error;
  bool attack_success = false;  // Krum-attack search outcome
  double elapsed_ms = 0.0;
};

/// Mutable loop state: parameters, round counter, the round-level generator
/// (consumed by randomized aggregators) and the fixed attack and allocation.
struct RoundState {
  int round = 0;
  Vector w;
  Rng rng;
  AttackSpec attack;
  Allocation allocation;
};

struct TrainOptions {
  AggregatorSpec aggregator;
  AttackSpec attack;
  std::vector<double> attack_thresholds;  // per-client T_i for the HLM attack
  double eta = 0.0;
  int rounds = 0;
  ProjectionSpec projection;
  std::uint64_t seed = 0;
};

/// ||aggregate(updates) - true_grad||.
double aggregation_error(const UpdateSet& updates, const AggregatorSpec& aggregator,
                         const Vector& true_grad, Rng& rng);

/// The honest upload of one client: the task gradient over exactly the
/// shard's samples.
Vector client_gradient(const TrainingTask& task, IndexSpan shard, const Vector& w);

/// One full round: honest gradients, adversarial corruption, aggregation,
/// projected update. Advances state and returns the round record. Throws on
/// a non-finite update.
RoundLog run_round(RoundState& state, const TrainingTask& task,
                   const AggregatorSpec& aggregator,
                   const std::vector<double>& attack_thresholds, double eta,
                   const ProjectionSpec& projection);

/// Full training loop; deterministic given (options.seed, task, allocation).
/// final_w receives the last parameter vector when non-null.
std::vector<RoundLog> train(const TrainingTask& task, const Allocation& allocation,
                            const TrainOptions& options, Vector* final_w = nullptr);

}  // namespace huberfl
