#include "huberfl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "huberfl/vec.hpp"

namespace huberfl {

RegressionDataset linreg_sample(const Vector& true_weights, std::size_t n, Rng& rng,
                                double noise_std) {
  const std::size_t d = true_weights.size();
  RegressionDataset data;
  data.true_weights = true_weights;
  data.noise_std = noise_std;
  data.features.reserve(n);
  data.targets.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector u(d);
    for (std::size_t k = 0; k < d; ++k) u[k] = rng.normal();
    double target = dot(u, true_weights) + noise_std * rng.normal();
    data.features.push_back(std::move(u));
    data.targets.push_back(target);
  }
  return data;
}

RegressionDataset linreg_synthesize(std::size_t d, std::size_t n, Rng& rng,
                                    double noise_std) {
  if (d < 1 || n < 1)
    throw std::invalid_argument("linreg_synthesize: d and n must be >= 1");
  Vector w_star(d);
  for (std::size_t k = 0; k < d; ++k) w_star[k] = rng.normal();
  return linreg_sample(w_star, n, rng, noise_std);
}

double linreg_loss(const Vector& w, const RegressionDataset& data, IndexSpan shard) {
  if (shard.empty()) throw std::invalid_argument("linreg_loss: shard is empty");
  double total = 0.0;
  for (std::size_t j : shard) {
    double residual = dot(data.features.at(j), w) - data.targets[j];
    total += 0.5 * residual * residual;
  }
  return total / static_cast<double>(shard.size());
}

Vector linreg_gradient(const Vector& w, const RegressionDataset& data, IndexSpan shard) {
  if (shard.empty()) throw std::invalid_argument("linreg_gradient: shard is empty");
  if (w.size() != data.dim())
    throw std::invalid_argument("linreg_gradient: weight dimension mismatch");
  const std::size_t d = data.dim();
  Vector grad(d, 0.0);
  for (std::size_t j : shard) {
    const Vector& u = data.features.at(j);
    double residual = dot(u, w) - data.targets[j];
    for (std::size_t k = 0; k < d; ++k) grad[k] += residual * u[k];
  }
  const double inv = 1.0 / static_cast<double>(shard.size());
  for (std::size_t k = 0; k < d; ++k) grad[k] *= inv;
  return grad;
}

Vector linreg_true_gradient(const Vector& w, const RegressionDataset& data) {
  if (w.size() != data.dim())
    throw std::invalid_argument("linreg_true_gradient: weight dimension mismatch");
  Vector grad(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) grad[k] = w[k] - data.true_weights[k];
  return grad;
}

double regression_metric(const Vector& w, const RegressionDataset& test) {
  if (test.size() == 0) throw std::invalid_argument("regression_metric: empty test set");
  double sum = 0.0;
  for (std::size_t j = 0; j < test.size(); ++j) {
    double residual = dot(test.features[j], w) - test.targets[j];
    sum += residual * residual;
  }
  return std::sqrt(sum / static_cast<double>(test.size()));
}

Vector MlpWeights::flatten() const {
  Vector flat;
  flat.reserve(flat_size());
  flat.insert(flat.end(), w1.begin(), w1.end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.insert(flat.end(), b2.begin(), b2.end());
  return flat;
}

MlpWeights MlpWeights::unflatten(const Vector& flat, std::size_t input_dim,
                                 std::size_t hidden_dim, std::size_t num_classes) {
  MlpWeights w;
  w.input_dim = input_dim;
  w.hidden_dim = hidden_dim;
  w.num_classes = num_classes;
  if (flat.size() != w.flat_size())
    throw std::invalid_argument("MlpWeights::unflatten: flat size mismatch");
  auto it = flat.begin();
  w.w1.assign(it, it + static_cast<std::ptrdiff_t>(input_dim * hidden_dim));
  it += static_cast<std::ptrdiff_t>(input_dim * hidden_dim);
  w.b1.assign(it, it + static_cast<std::ptrdiff_t>(hidden_dim));
  it += static_cast<std::ptrdiff_t>(hidden_dim);
  w.w2.assign(it, it + static_cast<std::ptrdiff_t>(hidden_dim * num_classes));
  it += static_cast<std::ptrdiff_t>(hidden_dim * num_classes);
  w.b2.assign(it, flat.end());
  return w;
}

MlpWeights MlpWeights::init(std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t num_classes, Rng& rng) {
  MlpWeights w;
  w.input_dim = input_dim;
  w.hidden_dim = hidden_dim;
  w.num_classes = num_classes;
  w.w1.resize(input_dim * hidden_dim);
  w.w2.resize(hidden_dim * num_classes);
  w.b1.assign(hidden_dim, 0.0);
  w.b2.assign(num_classes, 0.0);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (double& v : w.w1) v = s1 * rng.normal();
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (double& v : w.w2) v = s2 * rng.normal();
  return w;
}

namespace {

void check_classifier_shard(const MlpWeights& weights, const ClassifierDataset& data,
                            IndexSpan shard, const char* op) {
  if (shard.empty()) throw std::invalid_argument(std::string(op) + ": shard is empty");
  if (data.dim() != weights.input_dim ||
      static_cast<std::size_t>(data.num_classes) != weights.num_classes)
    throw std::invalid_argument(std::string(op) + ": weights do not match dataset shape");
}

struct ForwardPass {
  Vector hidden;  // post-ReLU activations
  Vector probs;   // softmax outputs
};

ForwardPass mlp_forward(const MlpWeights& w, const Vector& x) {
  const std::size_t h = w.hidden_dim;
  const std::size_t kc = w.num_classes;
  ForwardPass f;
  f.hidden.assign(h, 0.0);
  for (std::size_t i = 0; i < w.input_dim; ++i) {
    double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = &w.w1[i * h];
    for (std::size_t j = 0; j < h; ++j) f.hidden[j] += xi * row[j];
  }
  for (std::size_t j = 0; j < h; ++j) {
    f.hidden[j] += w.b1[j];
    if (f.hidden[j] < 0.0) f.hidden[j] = 0.0;
  }
  f.probs.assign(kc, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    double a = f.hidden[j];
    if (a == 0.0) continue;
    const double* row = &w.w2[j * kc];
    for (std::size_t c = 0; c < kc; ++c) f.probs[c] += a * row[c];
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < kc; ++c) {
    f.probs[c] += w.b2[c];
    peak = std::max(peak, f.probs[c]);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < kc; ++c) {
    f.probs[c] = std::exp(f.probs[c] - peak);
    total += f.probs[c];
  }
  for (std::size_t c = 0; c < kc; ++c) f.probs[c] /= total;
  return f;
}

}  // namespace

double mlp_loss(const MlpWeights& weights, const ClassifierDataset& data, IndexSpan shard) {
  check_classifier_shard(weights, data, shard, "mlp_loss");
  double total = 0.0;
  for (std::size_t j : shard) {
    ForwardPass f = mlp_forward(weights, data.images.at(j));
    double p = std::max(f.probs[static_cast<std::size_t>(data.labels[j])], 1e-300);
    total -= std::log(p);
  }
  return total / static_cast<double>(shard.size());
}

Vector mlp_gradient(const MlpWeights& weights, const ClassifierDataset& data,
                    IndexSpan shard) {
  check_classifier_shard(weights, data, shard, "mlp_gradient");
  const std::size_t p = weights.input_dim;
  const std::size_t h = weights.hidden_dim;
  const std::size_t kc = weights.num_classes;

  Vector gw1(p * h, 0.0), gb1(h, 0.0), gw2(h * kc, 0.0), gb2(kc, 0.0);
  Vector delta1(h);
  for (std::size_t j : shard) {
    const Vector& x = data.images.at(j);
    ForwardPass f = mlp_forward(weights, x);

    // delta2 = probs - onehot(label)
    f.probs[static_cast<std::size_t>(data.labels[j])] -= 1.0;
    const Vector& delta2 = f.probs;

    for (std::size_t c = 0; c < kc; ++c) gb2[c] += delta2[c];
    for (std::size_t jj = 0; jj < h; ++jj) {
      double a = f.hidden[jj];
      double back = 0.0;
      const double* w2row = &weights.w2[jj * kc];
      double* g2row = &gw2[jj * kc];
      for (std::size_t c = 0; c < kc; ++c) {
        g2row[c] += a * delta2[c];
        back += w2row[c] * delta2[c];
      }
      delta1[jj] = a > 0.0 ? back : 0.0;  // ReLU mask
    }
    for (std::size_t jj = 0; jj < h; ++jj) gb1[jj] += delta1[jj];
    for (std::size_t i = 0; i < p; ++i) {
      double xi = x[i];
      if (xi == 0.0) continue;
      double* g1row = &gw1[i * h];
      for (std::size_t jj = 0; jj < h; ++jj) g1row[jj] += xi * delta1[jj];
    }
  }

  const double inv = 1.0 / static_cast<double>(shard.size());
  Vector flat;
  flat.reserve(p * h + h + h * kc + kc);
  for (double v : gw1) flat.push_back(v * inv);
  for (double v : gb1) flat.push_back(v * inv);
  for (double v : gw2) flat.push_back(v * inv);
  for (double v : gb2) flat.push_back(v * inv);
  return flat;
}

double classifier_metric(const MlpWeights& weights, const ClassifierDataset& test) {
  if (test.size() == 0) throw std::invalid_argument("classifier_metric: empty test set");
  std::size_t correct = 0;
  for (std::size_t j = 0; j < test.size(); ++j) {
    ForwardPass f = mlp_forward(weights, test.images[j]);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < f.probs.size(); ++c) {
      if (f.probs[c] > f.probs[arg]) arg = c;  // strict: ties keep lowest index
    }
    if (arg == static_cast<std::size_t>(test.labels[j])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

ClientPerturbation sample_perturbation(std::size_t m, std::size_t d, double sigma_param,
                                       Rng& rng) {
  if (sigma_param < 0.0)
    throw std::invalid_argument("sample_perturbation: sigma_param must be >= 0");
  ClientPerturbation out;
  out.sigma_param = sigma_param;
  const double stddev = std::sqrt(sigma_param);  // sigma_param is a variance
  out.deltas.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.deltas[i].resize(d);
    for (std::size_t k = 0; k < d; ++k) out.deltas[i][k] = stddev * rng.normal();
  }
  return out;
}

RegressionDataset heterogeneous_targets(const RegressionDataset& data,
                                        const ClientPerturbation& perturbation,
                                        const std::vector<int>& client_of_sample) {
  if (client_of_sample.size() != data.size())
    throw std::invalid_argument("heterogeneous_targets: assignment does not cover all samples");
  RegressionDataset out = data;
  for (std::size_t j = 0; j < data.size(); ++j) {
    int client = client_of_sample[j];
    if (client < 0 || static_cast<std::size_t>(client) >= perturbation.deltas.size())
      throw std::invalid_argument("heterogeneous_targets: sample assigned to unknown client");
    out.targets[j] += dot(data.features[j], perturbation.deltas[static_cast<std::size_t>(client)]);
  }
  return out;
}

ClassifierDataset blobs_synthesize(int num_classes, std::size_t n, std::size_t p,
                                   double spread, Rng& rng) {
  auto pair = blobs_synthesize_pair(num_classes, n, 0, p, spread, rng);
  return std::move(pair.first);
}

std::pair<ClassifierDataset, ClassifierDataset> blobs_synthesize_pair(
    int num_classes, std::size_t n_train, std::size_t n_test, std::size_t p,
    double spread, Rng& rng) {
  if (num_classes < 2) throw std::invalid_argument("blobs_synthesize: needs K >= 2");
  if (spread < 0.0) throw std::invalid_argument("blobs_synthesize: spread must be >= 0");

  std::vector<Vector> centers(static_cast<std::size_t>(num_classes));
  for (auto& c : centers) {
    c.resize(p);
    for (std::size_t k = 0; k < p; ++k) c[k] = rng.normal();
  }

  auto draw = [&](std::size_t n) {
    ClassifierDataset data;
    data.num_classes = num_classes;
    data.images.reserve(n);
    data.labels.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      int label = static_cast<int>(j % static_cast<std::size_t>(num_classes));
      Vector x = centers[static_cast<std::size_t>(label)];
      for (std::size_t k = 0; k < p; ++k) x[k] += spread * rng.normal();
      data.images.push_back(std::move(x));
      data.labels.push_back(label);
    }
    return data;
  };

  ClassifierDataset train = draw(n_train);
  ClassifierDataset test = draw(n_test);
  return {std::move(train), std::move(test)};
}

}  // namespace huberfl
