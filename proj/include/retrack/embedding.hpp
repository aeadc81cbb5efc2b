#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace retrack {

using Embedding = std::vector<double>;

inline double dot(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Embedding& a) { return std::sqrt(dot(a, a)); }

inline Embedding normalized(const Embedding& a) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n))
    throw std::invalid_argument("normalized: vector must have positive finite norm");
  Embedding out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / n;
  return out;
}

inline double euclidean(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("euclidean: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace retrack
