#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "huberfl/rng.hpp"
#include "huberfl/update_set.hpp"

namespace huberfl {

/// Parameters of the Huber-center solver: one threshold per client plus the
/// stopping rule of the reweighting iteration.
struct HuberParams {
  std::vector<double> thresholds;  // T_i, one per client, all > 0
  double tol = 0.0;                // step-size stop; 0 selects 1e-8 * (1 + diameter)
  int max_iters = 10000;

  static HuberParams uniform(double threshold, std::size_t m, double tol = 0.0,
                             int max_iters = 10000);
};

struct AggregationResult {
  Vector center;
  int iters_used = 0;
  double objective = 0.0;  // weighted Huber objective at center
  double grad_norm = 0.0;  // norm of the objective gradient at center
  bool converged = true;   // false when max_iters was hit first
};

/// Weighted Huber objective: sum_i n_i * phi_i(||s - X_i||), with phi_i
/// quadratic up to T_i and linear beyond.
double huber_objective(const Vector& s, const UpdateSet& updates,
                       const HuberParams& params);

/// Gradient of huber_objective in s.
Vector huber_objective_gradient(const Vector& s, const UpdateSet& updates,
                                const HuberParams& params);

/// One reweighting step: convex combination of the X_i with coefficients
/// n_i * min{1, T_i / ||c - X_i||}; a zero distance contributes factor 1.
/// Never increases huber_objective.
Vector weiszfeld_step(const Vector& c, const UpdateSet& updates,
                      const HuberParams& params);

/// Iterates weiszfeld_step from init (default: coordinate-wise median) until
/// the step moves less than tol or max_iters is reached. Non-convergence is
/// reported through the converged flag, never thrown.
AggregationResult huber_center(const UpdateSet& updates, const HuberParams& params,
                               const Vector* init = nullptr);

/// sum n_i X_i / sum n_i.
Vector weighted_mean(const UpdateSet& updates);

struct MedianResult {
  Vector center;
  int iters_used = 0;
  bool converged = true;
};

/// Weighted geometric median by the classic smoothed reweighting iteration.
/// smoothing <= 0 selects 1e-12 * (1 + diameter).
MedianResult geometric_median(const UpdateSet& updates, double smoothing = 0.0,
                              double tol = 0.0, int max_iters = 10000);

/// Krum selection: returns the upload whose summed squared distance to its
/// k = m - q - 2 nearest neighbours is smallest; ties pick the lowest index.
Vector krum(const UpdateSet& updates, int q);
std::size_t krum_select_index(const UpdateSet& updates, int q);

namespace detail {
/// Krum scoring on a precomputed m x m squared-distance matrix (row-major,
/// diagonal ignored). Shared by krum() and the Krum attack's search loop.
std::size_t krum_select(const std::vector<double>& sq_dist, std::size_t m, int q);
}  // namespace detail

/// Geometric median of b = 2q+1 random batch means; batch sizes differ by at
/// most one. q = 0 degenerates to the unweighted mean.
Vector gmm(const UpdateSet& updates, int q, Rng& rng);

/// Per-coordinate median over clients, weights ignored; even counts average
/// the two middle values.
Vector coordinate_median(const UpdateSet& updates);

/// Per-coordinate mean after dropping the ceil(eps*m) largest and smallest
/// values; eps = 0 is exactly the unweighted mean.
Vector coordinate_trimmed_mean(const UpdateSet& updates, double eps);

/// T_i = t0 + big_m / sqrt(n_i).
std::vector<double> adaptive_thresholds(const std::vector<std::int64_t>& weights,
                                        double t0, double big_m);

enum class AggregatorKind {
  Mean,
  Huber,
  GeometricMedian,
  Krum,
  Gmm,
  CoordinateMedian,
  CoordinateTrimmedMean,
};

/// Aggregator choice plus every parameter any of the kinds needs.
struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::Mean;
  // Huber: either fixed threshold for all clients or the adaptive rule.
  std::optional<double> threshold;
  std::optional<double> t0;
  std::optional<double> big_m;
  double solver_tol = 0.0;  // 0 = auto
  int solver_max_iters = 10000;
  double trim_eps = 0.0;    // cwtm
  int q = 0;                // krum / gmm

  /// Resolved per-client thresholds for the Huber kind.
  std::vector<double> resolve_thresholds(const std::vector<std::int64_t>& weights) const;
};

const char* aggregator_name(AggregatorKind kind);
AggregatorKind aggregator_from_name(const std::string& name);

/// Dispatches to the configured aggregator. rng is consumed only by Gmm.
Vector aggregate(const UpdateSet& updates, const AggregatorSpec& spec, Rng& rng);

}  // namespace huberfl
