#pragma once

#include <cstdint>
#include <vector>

namespace huberfl {

using Vector = std::vector<double>;

/// The per-round uploads seen by the server: m vectors of dimension d with
/// per-client sample counts. Honest entries hold client gradients, Byzantine
/// entries hold whatever the adversary chose.
struct UpdateSet {
  std::vector<Vector> vectors;       // m rows, each of length d
  std::vector<std::int64_t> weights; // sample counts n_i

  std::size_t count() const { return vectors.size(); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }
  std::int64_t total_weight() const;

  /// Throws std::invalid_argument on ragged rows, empty set, non-positive
  /// weights or non-finite entries.
  void validate() const;
};

/// Largest pairwise distance between uploads. O(m^2 d).
double data_diameter(const UpdateSet& updates);

}  // namespace huberfl
