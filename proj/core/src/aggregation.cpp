#include "huberfl/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "huberfl/vec.hpp"

namespace huberfl {

namespace {

void check_dims(const Vector& s, const UpdateSet& updates, const HuberParams& params,
                const char* op) {
  if (s.size() != updates.dim())
    throw std::invalid_argument(std::string(op) + ": point dimension does not match updates");
  if (params.thresholds.size() != updates.count())
    throw std::invalid_argument(std::string(op) + ": thresholds count does not match client count");
}

double huber_phi(double u, double t) {
  return u <= t ? 0.5 * u * u : t * u - 0.5 * t * t;
}

/// One reweighting step written into `out`; returns the step displacement.
double step_into(const Vector& c, const UpdateSet& updates, const HuberParams& params,
                 Vector& out) {
  const std::size_t d = updates.dim();
  out.assign(d, 0.0);
  double denom = 0.0;
  for (std::size_t i = 0; i < updates.count(); ++i) {
    const Vector& x = updates.vectors[i];
    double u = distance(c, x);
    double factor = (u == 0.0) ? 1.0 : std::min(1.0, params.thresholds[i] / u);
    factor *= static_cast<double>(updates.weights[i]);
    for (std::size_t k = 0; k < d; ++k) out[k] += factor * x[k];
    denom += factor;
  }
  double move2 = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    out[k] /= denom;
    double diff = out[k] - c[k];
    move2 += diff * diff;
  }
  return std::sqrt(move2);
}

double resolve_tol(double tol, const UpdateSet& updates) {
  if (tol > 0.0) return tol;
  return 1e-8 * (1.0 + data_diameter(updates));
}

}  // namespace

HuberParams HuberParams::uniform(double threshold, std::size_t m, double tol,
                                 int max_iters) {
  HuberParams p;
  p.thresholds.assign(m, threshold);
  p.tol = tol;
  p.max_iters = max_iters;
  return p;
}

double huber_objective(const Vector& s, const UpdateSet& updates,
                       const HuberParams& params) {
  check_dims(s, updates, params, "huber_objective");
  double total = 0.0;
  for (std::size_t i = 0; i < updates.count(); ++i) {
    double u = distance(s, updates.vectors[i]);
    total += static_cast<double>(updates.weights[i]) * huber_phi(u, params.thresholds[i]);
  }
  return total;
}

Vector huber_objective_gradient(const Vector& s, const UpdateSet& updates,
                                const HuberParams& params) {
  check_dims(s, updates, params, "huber_objective_gradient");
  const std::size_t d = updates.dim();
  Vector grad(d, 0.0);
  for (std::size_t i = 0; i < updates.count(); ++i) {
    const Vector& x = updates.vectors[i];
    double u = distance(s, x);
    if (u == 0.0) continue;
    double factor = static_cast<double>(updates.weights[i]) *
                    std::min(1.0, params.thresholds[i] / u);
    for (std::size_t k = 0; k < d; ++k) grad[k] += factor * (s[k] - x[k]);
  }
  return grad;
}

Vector weiszfeld_step(const Vector& c, const UpdateSet& updates,
                      const HuberParams& params) {
  check_dims(c, updates, params, "weiszfeld_step");
  Vector out;
  step_into(c, updates, params, out);
  return out;
}

AggregationResult huber_center(const UpdateSet& updates, const HuberParams& params,
                               const Vector* init) {
  updates.validate();
  if (params.thresholds.size() != updates.count())
    throw std::invalid_argument("huber_center: thresholds count does not match client count");
  if (params.max_iters < 1)
    throw std::invalid_argument("huber_center: max_iters must be >= 1");

  double tol = resolve_tol(params.tol, updates);
  AggregationResult result;
  Vector c = init ? *init : coordinate_median(updates);
  if (init && init->size() != updates.dim())
    throw std::invalid_argument("huber_center: init dimension does not match updates");

  Vector next;
  result.converged = false;
  for (int iter = 0; iter < params.max_iters; ++iter) {
    double moved = step_into(c, updates, params, next);
    c.swap(next);
    result.iters_used = iter + 1;
    if (moved <= tol) {
      result.converged = true;
      break;
    }
  }
  result.center = std::move(c);
  result.objective = huber_objective(result.center, updates, params);
  result.grad_norm = norm(huber_objective_gradient(result.center, updates, params));
  return result;
}

Vector weighted_mean(const UpdateSet& updates) {
  updates.validate();
  const std::size_t d = updates.dim();
  Vector out(d, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < updates.count(); ++i) {
    double w = static_cast<double>(updates.weights[i]);
    for (std::size_t k = 0; k < d; ++k) out[k] += w * updates.vectors[i][k];
    total += w;
  }
  for (std::size_t k = 0; k < d; ++k) out[k] /= total;
  return out;
}

MedianResult geometric_median(const UpdateSet& updates, double smoothing, double tol,
                              int max_iters) {
  updates.validate();
  if (max_iters < 1)
    throw std::invalid_argument("geometric_median: max_iters must be >= 1");
  if (smoothing <= 0.0 || tol <= 0.0) {
    double diameter = data_diameter(updates);
    if (smoothing <= 0.0) smoothing = 1e-12 * (1.0 + diameter);
    if (tol <= 0.0) tol = 1e-8 * (1.0 + diameter);
  }

  const std::size_t d = updates.dim();
  MedianResult result;
  // Centroid start: a coordinate-median start can coincide with a data point,
  // where the smoothed weight pins the iteration.
  Vector c = weighted_mean(updates);
  Vector next(d);
  result.converged = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    double denom = 0.0;
    for (std::size_t i = 0; i < updates.count(); ++i) {
      const Vector& x = updates.vectors[i];
      double u = std::max(distance(c, x), smoothing);
      double w = static_cast<double>(updates.weights[i]) / u;
      for (std::size_t k = 0; k < d; ++k) next[k] += w * x[k];
      denom += w;
    }
    double move2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      next[k] /= denom;
      double diff = next[k] - c[k];
      move2 += diff * diff;
    }
    c.swap(next);
    result.iters_used = iter + 1;
    if (std::sqrt(move2) <= tol) {
      result.converged = true;
      break;
    }
  }
  result.center = std::move(c);
  return result;
}

namespace detail {

std::size_t krum_select(const std::vector<double>& sq_dist, std::size_t m, int q) {
  const int k = static_cast<int>(m) - q - 2;
  if (q < 0 || k < 1)
    throw std::invalid_argument("krum: requires m - q - 2 >= 1");
  std::size_t best_index = 0;
  double best_score = 0.0;
  std::vector<double> row(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t r = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) row[r++] = sq_dist[i * m + j];
    }
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    // Summed ascending so the result does not depend on nth_element's
    // internal arrangement of the k smallest.
    std::sort(row.begin(), row.begin() + k);
    double score = std::accumulate(row.begin(), row.begin() + k, 0.0);
    if (i == 0 || score < best_score) {
      best_score = score;
      best_index = i;
    }
  }
  return best_index;
}

}  // namespace detail

std::size_t krum_select_index(const UpdateSet& updates, int q) {
  updates.validate();
  const std::size_t m = updates.count();
  std::vector<double> sq_dist(m * m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double d2 = squared_distance(updates.vectors[i], updates.vectors[j]);
      sq_dist[i * m + j] = d2;
      sq_dist[j * m + i] = d2;
    }
  }
  return detail::krum_select(sq_dist, m, q);
}

Vector krum(const UpdateSet& updates, int q) {
  return updates.vectors[krum_select_index(updates, q)];
}

Vector gmm(const UpdateSet& updates, int q, Rng& rng) {
  updates.validate();
  if (q < 0) throw std::invalid_argument("gmm: q must be >= 0");
  const std::size_t m = updates.count();
  const std::size_t b = static_cast<std::size_t>(2 * q + 1);
  if (b > m) throw std::invalid_argument("gmm: requires 2q + 1 <= m");

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  rng.shuffle(order);

  const std::size_t d = updates.dim();
  const std::size_t base = m / b;
  const std::size_t extra = m % b;  // first `extra` batches get one more
  UpdateSet batch_means;
  batch_means.weights.assign(b, 1);
  std::size_t pos = 0;
  for (std::size_t g = 0; g < b; ++g) {
    std::size_t size = base + (g < extra ? 1 : 0);
    Vector mean(d, 0.0);
    for (std::size_t s = 0; s < size; ++s) {
      const Vector& x = updates.vectors[order[pos++]];
      for (std::size_t k = 0; k < d; ++k) mean[k] += x[k];
    }
    for (std::size_t k = 0; k < d; ++k) mean[k] /= static_cast<double>(size);
    batch_means.vectors.push_back(std::move(mean));
  }
  if (b == 1) return batch_means.vectors.front();
  return geometric_median(batch_means).center;
}

Vector coordinate_median(const UpdateSet& updates) {
  updates.validate();
  const std::size_t m = updates.count();
  const std::size_t d = updates.dim();
  Vector out(d);
  std::vector<double> column(m);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < m; ++i) column[i] = updates.vectors[i][k];
    std::size_t mid = m / 2;
    std::nth_element(column.begin(), column.begin() + mid, column.end());
    double upper = column[mid];
    if (m % 2 == 1) {
      out[k] = upper;
    } else {
      double lower = *std::max_element(column.begin(), column.begin() + mid);
      out[k] = 0.5 * (lower + upper);
    }
  }
  return out;
}

Vector coordinate_trimmed_mean(const UpdateSet& updates, double eps) {
  updates.validate();
  if (eps < 0.0 || eps >= 0.5)
    throw std::invalid_argument("coordinate_trimmed_mean: eps must be in [0, 0.5)");
  const std::size_t m = updates.count();
  const std::size_t d = updates.dim();
  const std::size_t trim = static_cast<std::size_t>(std::ceil(eps * static_cast<double>(m)));
  if (m < 2 * trim + 1)
    throw std::invalid_argument("coordinate_trimmed_mean: trimming leaves no values");

  Vector out(d, 0.0);
  if (trim == 0) {
    // Client-order summation so eps = 0 reproduces the unweighted mean bitwise.
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < d; ++k) out[k] += updates.vectors[i][k];
    for (std::size_t k = 0; k < d; ++k) out[k] /= static_cast<double>(m);
    return out;
  }

  std::vector<double> column(m);
  const std::size_t kept = m - 2 * trim;
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < m; ++i) column[i] = updates.vectors[i][k];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (std::size_t i = trim; i < m - trim; ++i) sum += column[i];
    out[k] = sum / static_cast<double>(kept);
  }
  return out;
}

std::vector<double> adaptive_thresholds(const std::vector<std::int64_t>& weights,
                                        double t0, double big_m) {
  if (t0 < 0.0 || big_m < 0.0 || t0 + big_m <= 0.0)
    throw std::invalid_argument(
        "adaptive_thresholds: requires t0 >= 0, M >= 0 and t0 + M > 0");
  std::vector<double> out;
  out.reserve(weights.size());
  for (std::int64_t n : weights) {
    if (n < 1) throw std::invalid_argument("adaptive_thresholds: weights must be >= 1");
    out.push_back(t0 + big_m / std::sqrt(static_cast<double>(n)));
  }
  return out;
}

std::vector<double> AggregatorSpec::resolve_thresholds(
    const std::vector<std::int64_t>& weights) const {
  if (threshold) {
    if (*threshold <= 0.0)
      throw std::invalid_argument("aggregator: threshold must be positive");
    return std::vector<double>(weights.size(), *threshold);
  }
  if (t0 && big_m) return adaptive_thresholds(weights, *t0, *big_m);
  throw std::invalid_argument(
      "aggregator: huber needs either a fixed threshold or t0 and M");
}

const char* aggregator_name(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::Mean: return "mean";
    case AggregatorKind::Huber: return "huber";
    case AggregatorKind::GeometricMedian: return "gm";
    case AggregatorKind::Krum: return "krum";
    case AggregatorKind::Gmm: return "gmm";
    case AggregatorKind::CoordinateMedian: return "cwm";
    case AggregatorKind::CoordinateTrimmedMean: return "cwtm";
  }
  return "unknown";
}

AggregatorKind aggregator_from_name(const std::string& name) {
  if (name == "mean") return AggregatorKind::Mean;
  if (name == "huber") return AggregatorKind::Huber;
  if (name == "gm") return AggregatorKind::GeometricMedian;
  if (name == "krum") return AggregatorKind::Krum;
  if (name == "gmm") return AggregatorKind::Gmm;
  if (name == "cwm") return AggregatorKind::CoordinateMedian;
  if (name == "cwtm") return AggregatorKind::CoordinateTrimmedMean;
  throw std::invalid_argument("unknown aggregator '" + name + "'");
}

Vector aggregate(const UpdateSet& updates, const AggregatorSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case AggregatorKind::Mean:
      return weighted_mean(updates);
    case AggregatorKind::Huber: {
      HuberParams params;
      params.thresholds = spec.resolve_thresholds(updates.weights);
      params.tol = spec.solver_tol;
      params.max_iters = spec.solver_max_iters;
      return huber_center(updates, params).center;
    }
    case AggregatorKind::GeometricMedian:
      return geometric_median(updates, 0.0, spec.solver_tol, spec.solver_max_iters).center;
    case AggregatorKind::Krum:
      return krum(updates, spec.q);
    case AggregatorKind::Gmm:
      return gmm(updates, spec.q, rng);
    case AggregatorKind::CoordinateMedian:
      return coordinate_median(updates);
    case AggregatorKind::CoordinateTrimmedMean:
      return coordinate_trimmed_mean(updates, spec.trim_eps);
  }
  throw std::invalid_argument("aggregate: unknown aggregator kind");
}

}  // namespace huberfl
