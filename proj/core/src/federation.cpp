#include "huberfl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "huberfl/vec.hpp"

namespace huberfl {

namespace {

// Fixed stream ids hung off the run seed.
constexpr std::uint64_t kInitStream = 101;
constexpr std::uint64_t kRoundStream = 102;

}  // namespace

std::vector<std::int64_t> Allocation::sizes() const {
  std::vector<std::int64_t> out;
  out.reserve(shards.size());
  for (const auto& shard : shards) out.push_back(static_cast<std::int64_t>(shard.size()));
  return out;
}

std::vector<int> Allocation::client_of_sample(std::size_t n_samples) const {
  std::vector<int> owner(n_samples, -1);
  for (std::size_t i = 0; i < shards.size(); ++i) {
    for (std::size_t j : shards[i]) {
      if (j >= n_samples || owner[j] != -1)
        throw std::invalid_argument("Allocation: shards are not a disjoint cover");
      owner[j] = static_cast<int>(i);
    }
  }
  for (int o : owner) {
    if (o == -1) throw std::invalid_argument("Allocation: shards do not cover all samples");
  }
  return owner;
}

Allocation allocate_balanced(std::size_t n_samples, std::size_t m, Rng& rng) {
  if (m < 1 || m > n_samples)
    throw std::invalid_argument("allocate_balanced: requires 1 <= m <= N");
  std::vector<std::size_t> order(n_samples);
  for (std::size_t j = 0; j < n_samples; ++j) order[j] = j;
  rng.shuffle(order);

  Allocation alloc;
  alloc.shards.resize(m);
  const std::size_t base = n_samples / m;
  const std::size_t extra = n_samples % m;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t size = base + (i < extra ? 1 : 0);
    alloc.shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                           order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return alloc;
}

Allocation allocate_stick_breaking(std::size_t n_samples, std::size_t m, Rng& rng) {
  if (m < 1 || m > n_samples)
    throw std::invalid_argument("allocate_stick_breaking: requires 1 <= m <= N");
  std::vector<std::size_t> order(n_samples);
  for (std::size_t j = 0; j < n_samples; ++j) order[j] = j;
  rng.shuffle(order);

  std::vector<std::size_t> bounds;
  while (true) {
    bounds = rng.sample_indices(n_samples, m - 1);
    std::sort(bounds.begin(), bounds.end());
    // Half-open blocks [b_i, b_{i+1}); distinct sorted cuts can only produce
    // an empty block when 0 is drawn, but check all of them anyway.
    bool ok = true;
    std::size_t prev = 0;
    for (std::size_t b : bounds) {
      if (b == prev) { ok = false; break; }
      prev = b;
    }
    if (ok && prev == n_samples) ok = false;
    if (ok) break;
  }

  Allocation alloc;
  alloc.shards.resize(m);
  std::size_t start = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t end = i + 1 < m ? bounds[i] : n_samples;
    alloc.shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    start = end;
  }
  return alloc;
}

Vector project(const Vector& w, const ProjectionSpec& spec) {
  if (spec.mode == ProjectionSpec::Mode::None) return w;
  if (spec.radius <= 0.0)
    throw std::invalid_argument("project: ball mode needs a positive radius");
  if (spec.center.size() != w.size())
    throw std::invalid_argument("project: center dimension mismatch");
  double dist = distance(w, spec.center);
  if (dist <= spec.radius) return w;
  const double scale = spec.radius / dist;
  Vector out(w.size());
  for (std::size_t k = 0; k < w.size(); ++k)
    out[k] = spec.center[k] + scale * (w[k] - spec.center[k]);
  return out;
}

RegressionTask::RegressionTask(RegressionDataset train, RegressionDataset test)
    : train_(std::move(train)), test_(std::move(test)),
      effective_weights_(train_.true_weights) {}

void RegressionTask::apply_heterogeneity(const ClientPerturbation& perturbation,
                                         const std::vector<int>& client_of_sample) {
  train_ = heterogeneous_targets(train_, perturbation, client_of_sample);
  // Population gradient of the n_i-weighted mixture: w - w* - sum n_i delta_i / N.
  std::vector<std::int64_t> counts(perturbation.deltas.size(), 0);
  for (int c : client_of_sample) counts[static_cast<std::size_t>(c)] += 1;
  effective_weights_ = train_.true_weights;
  const double n = static_cast<double>(client_of_sample.size());
  for (std::size_t i = 0; i < perturbation.deltas.size(); ++i) {
    const double frac = static_cast<double>(counts[i]) / n;
    for (std::size_t k = 0; k < effective_weights_.size(); ++k)
      effective_weights_[k] += frac * perturbation.deltas[i][k];
  }
}

Vector RegressionTask::initial_weights(Rng&) const {
  return Vector(train_.dim(), 0.0);
}

Vector RegressionTask::gradient(const Vector& w, IndexSpan shard) const {
  return linreg_gradient(w, train_, shard);
}

double RegressionTask::metric(const Vector& w) const {
  return regression_metric(w, test_);
}

std::optional<Vector> RegressionTask::true_gradient(const Vector& w) const {
  Vector grad(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) grad[k] = w[k] - effective_weights_[k];
  return grad;
}

ClassifierTask::ClassifierTask(ClassifierDataset train, ClassifierDataset test,
                               std::size_t hidden_dim)
    : train_(std::move(train)), test_(std::move(test)), hidden_(hidden_dim) {}

std::size_t ClassifierTask::param_dim() const {
  const std::size_t p = train_.dim();
  const std::size_t kc = static_cast<std::size_t>(train_.num_classes);
  return p * hidden_ + hidden_ + hidden_ * kc + kc;
}

Vector ClassifierTask::initial_weights(Rng& rng) const {
  return MlpWeights::init(train_.dim(), hidden_,
                          static_cast<std::size_t>(train_.num_classes), rng)
      .flatten();
}

Vector ClassifierTask::gradient(const Vector& w, IndexSpan shard) const {
  MlpWeights weights = MlpWeights::unflatten(
      w, train_.dim(), hidden_, static_cast<std::size_t>(train_.num_classes));
  return mlp_gradient(weights, train_, shard);
}

double ClassifierTask::metric(const Vector& w) const {
  MlpWeights weights = MlpWeights::unflatten(
      w, train_.dim(), hidden_, static_cast<std::size_t>(train_.num_classes));
  return classifier_metric(weights, test_);
}

double aggregation_error(const UpdateSet& updates, const AggregatorSpec& aggregator,
                         const Vector& true_grad, Rng& rng) {
  Vector g = aggregate(updates, aggregator, rng);
  return distance(g, true_grad);
}

Vector client_gradient(const TrainingTask& task, IndexSpan shard, const Vector& w) {
  if (shard.empty()) throw std::invalid_argument("client_gradient: shard is empty");
  return task.gradient(w, shard);
}

RoundLog run_round(RoundState& state, const TrainingTask& task,
                   const AggregatorSpec& aggregator,
                   const std::vector<double>& attack_thresholds, double eta,
                   const ProjectionSpec& projection) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t m = state.allocation.client_count();

  UpdateSet honest;
  honest.vectors.reserve(m);
  honest.weights = state.allocation.sizes();
  for (std::size_t i = 0; i < m; ++i)
    honest.vectors.push_back(client_gradient(task, state.allocation.shards[i], state.w));

  AttackContext ctx = make_attack_context(std::move(honest), attack_thresholds);
  const int q_for_ka = aggregator.kind == AggregatorKind::Krum
                           ? aggregator.q
                           : static_cast<int>(state.attack.byzantine.size());
  AttackOutcome attacked = apply_attack(ctx, state.attack, q_for_ka);

  Vector g = aggregate(attacked.updates, aggregator, state.rng);

  RoundLog log;
  log.round = state.round;
  log.attack_success = attacked.ka_success;
  if (auto true_grad = task.true_gradient(state.w))
    log.aggregation_error = distance(g, *true_grad);

  Vector next(state.w.size());
  for (std::size_t k = 0; k < state.w.size(); ++k) next[k] = state.w[k] - eta * g[k];
  next = project(next, projection);
  if (!all_finite(next))
    throw std::runtime_error("run_round: non-finite parameter update at round " +
                             std::to_string(state.round));
  state.w = std::move(next);
  state.round += 1;

  log.metric = task.metric(state.w);
  log.elapsed_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return log;
}

std::vector<RoundLog> train(const TrainingTask& task, const Allocation& allocation,
                            const TrainOptions& options, Vector* final_w) {
  if (options.eta <= 0.0) throw std::invalid_argument("train: eta must be positive");
  if (options.rounds < 0) throw std::invalid_argument("train: rounds must be >= 0");

  Rng init_rng(derive_seed(options.seed, kInitStream));
  RoundState state{0, task.initial_weights(init_rng),
                   Rng(derive_seed(options.seed, kRoundStream)), options.attack,
                   allocation};

  std::vector<RoundLog> logs;
  logs.reserve(static_cast<std::size_t>(options.rounds));
  for (int t = 0; t < options.rounds; ++t) {
    logs.push_back(run_round(state, task, options.aggregator, options.attack_thresholds,
                             options.eta, options.projection));
  }
  if (final_w) *final_w = std::move(state.w);
  return logs;
}

}  // namespace huberfl
