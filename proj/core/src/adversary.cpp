#include "huberfl/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "huberfl/aggregation.hpp"
#include "huberfl/vec.hpp"

namespace huberfl {

const char* attack_name(AttackStrategy strategy) {
  switch (strategy) {
    case AttackStrategy::None: return "none";
    case AttackStrategy::SignFlip: return "signflip";
    case AttackStrategy::KrumAttack: return "ka";
    case AttackStrategy::TrimmedMeanAttack: return "tma";
    case AttackStrategy::HlmAttack: return "hlma";
  }
  return "unknown";
}

AttackStrategy attack_from_name(const std::string& name) {
  if (name == "none") return AttackStrategy::None;
  if (name == "signflip") return AttackStrategy::SignFlip;
  if (name == "ka") return AttackStrategy::KrumAttack;
  if (name == "tma") return AttackStrategy::TrimmedMeanAttack;
  if (name == "hlma") return AttackStrategy::HlmAttack;
  throw std::invalid_argument("unknown attack '" + name + "'");
}

bool AttackSpec::is_byzantine(std::size_t client) const {
  return std::binary_search(byzantine.begin(), byzantine.end(), client);
}

Vector reference_mean(const UpdateSet& honest) {
  honest.validate();
  const std::size_t d = honest.dim();
  const std::size_t m = honest.count();
  Vector out(d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < d; ++k) out[k] += honest.vectors[i][k];
  for (std::size_t k = 0; k < d; ++k) out[k] /= static_cast<double>(m);
  return out;
}

Vector sign_vector(const Vector& g0) {
  Vector s(g0.size());
  for (std::size_t k = 0; k < g0.size(); ++k) s[k] = g0[k] < 0.0 ? -1.0 : 1.0;
  return s;
}

AttackContext make_attack_context(UpdateSet honest, std::vector<double> huber_thresholds) {
  AttackContext ctx;
  ctx.g0 = reference_mean(honest);
  ctx.sign_vec = sign_vector(ctx.g0);
  ctx.honest = std::move(honest);
  ctx.huber_thresholds = std::move(huber_thresholds);
  return ctx;
}

UpdateSet sign_flip(const AttackContext& ctx, const AttackSpec& spec) {
  UpdateSet out = ctx.honest;
  for (std::size_t b : spec.byzantine)
    for (double& x : out.vectors.at(b)) x = -x;
  return out;
}

KrumAttackResult krum_attack(const AttackContext& ctx, const AttackSpec& spec, int q) {
  KrumAttackResult result;
  result.updates = ctx.honest;
  if (spec.byzantine.empty()) return result;

  const std::size_t m = ctx.honest.count();
  const std::size_t d = ctx.honest.dim();
  std::vector<bool> is_byz(m, false);
  for (std::size_t b : spec.byzantine) is_byz.at(b) = true;

  // Honest-honest distances never change across lambda trials; only the rows
  // and columns of the (identical) Byzantine placements get rewritten.
  std::vector<double> sq_dist(m * m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (is_byz[i]) continue;
    for (std::size_t j = i + 1; j < m; ++j) {
      if (is_byz[j]) continue;
      double d2 = squared_distance(ctx.honest.vectors[i], ctx.honest.vectors[j]);
      sq_dist[i * m + j] = d2;
      sq_dist[j * m + i] = d2;
    }
  }

  Vector placement(d);
  constexpr double kLambdaFloor = 1e-4;
  double lambda = 1.0;
  while (true) {
    ++result.trials;
    result.lambda = lambda;
    for (std::size_t k = 0; k < d; ++k)
      placement[k] = ctx.g0[k] - lambda * ctx.sign_vec[k];
    for (std::size_t i = 0; i < m; ++i) {
      if (is_byz[i]) continue;
      double d2 = squared_distance(ctx.honest.vectors[i], placement);
      for (std::size_t b : spec.byzantine) {
        sq_dist[i * m + b] = d2;
        sq_dist[b * m + i] = d2;
      }
    }
    std::size_t selected = detail::krum_select(sq_dist, m, q);
    if (is_byz[selected]) {
      result.success = true;
      break;
    }
    lambda /= 2.0;
    if (lambda < kLambdaFloor) break;
  }

  for (std::size_t b : spec.byzantine) result.updates.vectors[b] = placement;
  return result;
}

UpdateSet trimmed_mean_attack(const AttackContext& ctx, const AttackSpec& spec) {
  UpdateSet out = ctx.honest;
  if (spec.byzantine.empty()) return out;

  const std::size_t m = ctx.honest.count();
  const std::size_t d = ctx.honest.dim();
  Vector extreme(d);
  for (std::size_t k = 0; k < d; ++k) {
    double lo = ctx.honest.vectors[0][k];
    double hi = lo;
    for (std::size_t i = 1; i < m; ++i) {
      double v = ctx.honest.vectors[i][k];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    extreme[k] = ctx.sign_vec[k] < 0.0 ? hi : lo;
  }
  for (std::size_t b : spec.byzantine) out.vectors.at(b) = extreme;
  return out;
}

UpdateSet hlm_attack(const AttackContext& ctx, const AttackSpec& spec) {
  UpdateSet out = ctx.honest;
  if (spec.byzantine.empty()) return out;
  if (ctx.huber_thresholds.size() != ctx.honest.count())
    throw std::invalid_argument("hlm_attack: huber thresholds unavailable");

  const double root_d = std::sqrt(static_cast<double>(ctx.honest.dim()));
  for (std::size_t b : spec.byzantine) {
    const double offset = ctx.huber_thresholds[b] / root_d;
    Vector& x = out.vectors.at(b);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= ctx.sign_vec[k] * offset;
  }
  return out;
}

AttackSpec select_byzantine(std::size_t m, const std::vector<std::int64_t>& weights,
                            double target_eps, Rng& rng) {
  if (target_eps < 0.0 || target_eps >= 0.5)
    throw std::invalid_argument("select_byzantine: target_eps must be in [0, 0.5)");
  if (weights.size() != m)
    throw std::invalid_argument("select_byzantine: weights count does not match m");

  AttackSpec spec;
  spec.target_eps = target_eps;
  const std::size_t count = static_cast<std::size_t>(target_eps * static_cast<double>(m));
  spec.byzantine = rng.sample_indices(m, count);
  std::sort(spec.byzantine.begin(), spec.byzantine.end());

  std::int64_t total = 0;
  for (std::int64_t w : weights) total += w;
  std::int64_t captured = 0;
  for (std::size_t b : spec.byzantine) captured += weights[b];
  spec.realized_client_frac = static_cast<double>(count) / static_cast<double>(m);
  spec.realized_sample_frac =
      total > 0 ? static_cast<double>(captured) / static_cast<double>(total) : 0.0;
  return spec;
}

AttackOutcome apply_attack(const AttackContext& ctx, const AttackSpec& spec, int q_for_ka) {
  AttackOutcome outcome;
  switch (spec.strategy) {
    case AttackStrategy::None:
      outcome.updates = ctx.honest;
      return outcome;
    case AttackStrategy::SignFlip:
      outcome.updates = sign_flip(ctx, spec);
      return outcome;
    case AttackStrategy::KrumAttack: {
      KrumAttackResult r = krum_attack(ctx, spec, q_for_ka);
      outcome.updates = std::move(r.updates);
      outcome.ka_success = r.success;
      return outcome;
    }
    case AttackStrategy::TrimmedMeanAttack:
      outcome.updates = trimmed_mean_attack(ctx, spec);
      return outcome;
    case AttackStrategy::HlmAttack:
      outcome.updates = hlm_attack(ctx, spec);
      return outcome;
  }
  throw std::invalid_argument("apply_attack: unknown strategy");
}

}  // namespace huberfl
