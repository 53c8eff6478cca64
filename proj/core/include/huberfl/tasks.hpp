#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "huberfl/rng.hpp"
#include "huberfl/update_set.hpp"

namespace huberfl {

using IndexSpan = std::span<const std::size_t>;

/// Linear regression data: targets are <U_j, w*> + noise with standard normal
/// noise and standard normal i.i.d. features.
struct RegressionDataset {
  std::vector<Vector> features;  // N x d
  Vector targets;                // N
  Vector true_weights;           // w*, length d
  double noise_std = 1.0;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return true_weights.size(); }
};

/// Draws fresh samples for an existing true-weight vector.
RegressionDataset linreg_sample(const Vector& true_weights, std::size_t n, Rng& rng,
                                double noise_std = 1.0);

/// Draws w* elementwise from N(0,1), then samples features and targets.
RegressionDataset linreg_synthesize(std::size_t d, std::size_t n, Rng& rng,
                                    double noise_std = 1.0);

/// Mean squared loss over the shard: (1/n) sum (1/2)(<u_j, w> - v_j)^2.
double linreg_loss(const Vector& w, const RegressionDataset& data, IndexSpan shard);

/// Mean squared-loss gradient over the shard: (1/n) sum (<u_j, w> - v_j) u_j.
Vector linreg_gradient(const Vector& w, const RegressionDataset& data, IndexSpan shard);

/// Population gradient for identity feature covariance: w - w*.
Vector linreg_true_gradient(const Vector& w, const RegressionDataset& data);

/// Root of the mean squared residual on a test set.
double regression_metric(const Vector& w, const RegressionDataset& test);

struct ClassifierDataset {
  std::vector<Vector> images;  // N x p, entries in [0, 1]
  std::vector<int> labels;     // 0..num_classes-1
  int num_classes = 0;

  std::size_t size() const { return images.size(); }
  std::size_t dim() const { return images.empty() ? 0 : images.front().size(); }
};

/// One-hidden-layer ReLU network with softmax cross-entropy loss. The flat
/// view concatenates layer-1 weights (input-major), layer-1 bias, layer-2
/// weights (hidden-major) and layer-2 bias.
struct MlpWeights {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_classes = 0;
  Vector w1;  // input_dim x hidden_dim
  Vector b1;  // hidden_dim
  Vector w2;  // hidden_dim x num_classes
  Vector b2;  // num_classes

  std::size_t flat_size() const {
    return input_dim * hidden_dim + hidden_dim + hidden_dim * num_classes + num_classes;
  }
  Vector flatten() const;
  static MlpWeights unflatten(const Vector& flat, std::size_t input_dim,
                              std::size_t hidden_dim, std::size_t num_classes);
  /// Weights N(0, 1/fan_in), biases zero.
  static MlpWeights init(std::size_t input_dim, std::size_t hidden_dim,
                         std::size_t num_classes, Rng& rng);
};

/// Mean cross-entropy over the shard.
double mlp_loss(const MlpWeights& weights, const ClassifierDataset& data, IndexSpan shard);

/// Mean backpropagated gradient over the shard, flattened.
Vector mlp_gradient(const MlpWeights& weights, const ClassifierDataset& data, IndexSpan shard);

/// Test accuracy; argmax ties resolve to the lowest class index.
double classifier_metric(const MlpWeights& weights, const ClassifierDataset& test);

/// Per-client weight offsets for the heterogeneous regression model; each
/// component is N(0, sigma_param) with sigma_param read as a variance.
struct ClientPerturbation {
  std::vector<Vector> deltas;  // m x d
  double sigma_param = 0.0;
};

ClientPerturbation sample_perturbation(std::size_t m, std::size_t d, double sigma_param,
                                       Rng& rng);

/// Rewrites every target as <U_j, w* + delta_i> + W_j for the owning client i.
/// Noise realizations are preserved: the shift <U_j, delta_i> is added to the
/// original target.
RegressionDataset heterogeneous_targets(const RegressionDataset& data,
                                        const ClientPerturbation& perturbation,
                                        const std::vector<int>& client_of_sample);

/// Gaussian-blob classification data, a desk-scale stand-in for image data.
/// Class centers are standard normal in R^p; samples add spread * N(0, I).
ClassifierDataset blobs_synthesize(int num_classes, std::size_t n, std::size_t p,
                                   double spread, Rng& rng);

/// Train/test pair sharing one set of class centers.
std::pair<ClassifierDataset, ClassifierDataset> blobs_synthesize_pair(
    int num_classes, std::size_t n_train, std::size_t n_test, std::size_t p,
    double spread, Rng& rng);

}  // namespace huberfl
