#pragma once

#include <cstdint>
#include <random>

#include "repobs/linalg.hpp"
#include "repobs/random.hpp"

namespace testing_support {

inline repobs::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  repobs::CounterRng rng(seed);
  std::normal_distribution<double> n;
  repobs::Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline repobs::Vector random_vector(std::size_t d, std::uint64_t seed) {
  repobs::CounterRng rng(seed);
  std::normal_distribution<double> n;
  repobs::Vector v(d);
  for (auto& x : v) x = n(rng);
  return v;
}

/// BᵀB + shift·I
inline repobs::Matrix random_spd(std::size_t d, std::uint64_t seed, double shift = 0.5) {
  const repobs::Matrix b = random_matrix(d, d, seed);
  repobs::Matrix s = b.transpose() * b;
  for (std::size_t i = 0; i < d; ++i) s(i, i) += shift;
  return repobs::symmetrized(s, 1e-8);
}

}  // namespace testing_support
