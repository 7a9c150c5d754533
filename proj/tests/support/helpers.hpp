#pragma once

#include "stabposi/linmodel.hpp"

#include <cmath>
#include <random>

namespace testutil {

inline stabposi::Matrix gaussian_matrix(int n, int d, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  stabposi::Matrix m(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = z(gen);
  return m;
}

inline stabposi::Vector gaussian_vector(int n, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  stabposi::Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = z(gen);
  return v;
}

// Monte Carlo standard error of a proportion.
inline double mc_sigma(double p, double trials) { return std::sqrt(p * (1.0 - p) / trials); }

}  // namespace testutil
