#include "huberfl/update_set.hpp"

#include <stdexcept>
#include <string>

#include "huberfl/vec.hpp"

namespace huberfl {

std::int64_t UpdateSet::total_weight() const {
  std::int64_t total = 0;
  for (std::int64_t w : weights) total += w;
  return total;
}

void UpdateSet::validate() const {
  if (vectors.empty()) throw std::invalid_argument("UpdateSet: needs at least one vector");
  if (weights.size() != vectors.size())
    throw std::invalid_argument("UpdateSet: weights count does not match vector count");
  std::size_t d = vectors.front().size();
  if (d == 0) throw std::invalid_argument("UpdateSet: vectors must have dimension >= 1");
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d)
      throw std::invalid_argument("UpdateSet: vector " + std::to_string(i) +
                                  " has mismatched dimension");
    if (!all_finite(vectors[i]))
      throw std::invalid_argument("UpdateSet: vector " + std::to_string(i) +
                                  " has non-finite entries");
    if (weights[i] < 1)
      throw std::invalid_argument("UpdateSet: weight " + std::to_string(i) +
                                  " must be >= 1");
  }
}

double data_diameter(const UpdateSet& updates) {
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < updates.vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < updates.vectors.size(); ++j) {
      double d2 = squared_distance(updates.vectors[i], updates.vectors[j]);
      if (d2 > best) best = d2;
    }
  }
  return std::sqrt(best);
}

}  // namespace huberfl
