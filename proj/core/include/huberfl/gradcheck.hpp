#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace huberfl {

/// One finite-difference comparison: the largest per-parameter error within a
/// parameter group, against the 1e-5 relative tolerance.
struct GradCheckEntry {
  std::string name;
  double max_err = 0.0;        // |analytic - fd| / max(1, |analytic|, |fd|)
  std::size_t worst_index = 0; // flat parameter index of the worst entry
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass() const;
};

/// Central finite differences (step 1e-5) against the analytic regression and
/// MLP gradients, one entry per parameter group. `perturb` injects a
/// deliberate error into the first analytic component, as a self-test of the
/// checker.
GradCheckReport gradient_checks(bool perturb = false);

/// Prints one line per entry plus a summary; returns all-pass.
bool run_gradient_checks(std::ostream& out, bool perturb = false);

}  // namespace huberfl
