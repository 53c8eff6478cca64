#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace huberfl {

using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

inline double distance(const Vector& a, const Vector& b) {
  return std::sqrt(squared_distance(a, b));
}

inline double norm(const Vector& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

inline bool all_finite(const Vector& a) {
  for (double x : a) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace huberfl
