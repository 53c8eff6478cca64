#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "huberfl/rng.hpp"
#include "huberfl/update_set.hpp"

namespace huberfl {

enum class AttackStrategy { None, SignFlip, KrumAttack, TrimmedMeanAttack, HlmAttack };

const char* attack_name(AttackStrategy strategy);
AttackStrategy attack_from_name(const std::string& name);

/// Which clients the adversary controls, fixed for a whole run.
struct AttackSpec {
  AttackStrategy strategy = AttackStrategy::None;
  std::vector<std::size_t> byzantine;  // sorted 0-based client indices
  double target_eps = 0.0;
  double realized_client_frac = 0.0;
  double realized_sample_frac = 0.0;

  bool is_byzantine(std::size_t client) const;
};

/// Everything the omniscient adversary sees in a round: all honest gradients,
/// their unweighted mean g0, its element-wise sign, and the defender's Huber
/// thresholds (used by the HLM attack).
struct AttackContext {
  UpdateSet honest;
  Vector g0;
  Vector sign_vec;
  std::vector<double> huber_thresholds;
};

AttackContext make_attack_context(UpdateSet honest, std::vector<double> huber_thresholds = {});

/// Unweighted mean over all m honest gradients (sample counts ignored).
Vector reference_mean(const UpdateSet& honest);

/// Element-wise sign; sign(0) = +1.
Vector sign_vector(const Vector& g0);

/// Byzantine clients upload the negated honest gradient.
UpdateSet sign_flip(const AttackContext& ctx, const AttackSpec& spec);

struct KrumAttackResult {
  UpdateSet updates;
  double lambda = 0.0;
  bool success = false;
  int trials = 0;
};

/// Places every Byzantine upload at g0 - lambda * sign, halving lambda from 1
/// until Krum (with the given q) selects a Byzantine index or lambda drops
/// below 1e-4. On failure the smallest-lambda placement is kept.
KrumAttackResult krum_attack(const AttackContext& ctx, const AttackSpec& spec, int q);

/// Every Byzantine client uploads, per coordinate, the honest maximum where
/// the sign is -1 and the honest minimum where it is +1.
UpdateSet trimmed_mean_attack(const AttackContext& ctx, const AttackSpec& spec);

/// Byzantine client i shifts its own honest gradient by -sign_j * T_i/sqrt(d)
/// per coordinate, an l2 displacement of exactly T_i.
UpdateSet hlm_attack(const AttackContext& ctx, const AttackSpec& spec);

/// Samples floor(target_eps * m) distinct Byzantine clients and records both
/// realized fractions. target_eps must be in [0, 0.5).
AttackSpec select_byzantine(std::size_t m, const std::vector<std::int64_t>& weights,
                            double target_eps, Rng& rng);

struct AttackOutcome {
  UpdateSet updates;
  bool ka_success = false;  // meaningful only for the Krum attack
};

/// Dispatch on spec.strategy. q_for_ka parameterises the Krum attack's
/// internal Krum evaluations.
AttackOutcome apply_attack(const AttackContext& ctx, const AttackSpec& spec, int q_for_ka);

}  // namespace huberfl
