#pragma once

#include <cstdint>
#include <cmath>
#include <span>
#include <vector>

#include "pioracle/common.hpp"

namespace pioracle {

// The nonrandom mean vector of the exchangeable Gaussian sequence model
// Z_i ~ N(theta_i, sigma^2), independent, with common known sigma.
struct ParamVector {
  std::vector<double> values;
  double sigma = 1.0;

  ParamVector() = default;
  ParamVector(std::vector<double> v, double s = 1.0);

  int n() const { return static_cast<int>(values.size()); }
};

// One realization z of Z.
struct DataVector {
  std::vector<double> values;

  DataVector() = default;
  explicit DataVector(std::vector<double> v) : values(std::move(v)) {}

  int n() const { return static_cast<int>(values.size()); }
};

// A relabeling g of {0,..,n-1}; acting on a vector u gives
// result[i] = u[map[i]].
struct Permutation {
  std::vector<int> map;

  Permutation() = default;
  explicit Permutation(std::vector<int> m) : map(std::move(m)) {}

  int n() const { return static_cast<int>(map.size()); }
  bool valid() const;
  Permutation inverse() const;

  static Permutation identity(int n);
};

// (g o h)(u) == g(h(u)).
Permutation compose(const Permutation& g, const Permutation& h);

std::vector<double> apply_permutation(const Permutation& g,
                                      std::span<const double> u);

inline double log_normal_pdf(double x, double mean, double sigma) {
  const double u = (x - mean) / sigma;
  return -0.5 * u * u - 0.5 * kLogTwoPi - std::log(sigma);
}

// Sum_i log phi((z_i - theta_i)/sigma) - n log sigma. Summed in a canonical
// order so jointly permuting (theta, z) reproduces the value bit for bit.
double log_likelihood(const ParamVector& theta, const DataVector& z);

// `count` independent draws Z = theta + sigma * eps. Draw j depends only on
// (seed, j), so prefixes agree across different counts.
std::vector<DataVector> sample_data(const ParamVector& theta,
                                    std::uint64_t seed, std::int64_t count);

// Fills an existing buffer with draw number `stream` (used by hot loops).
void sample_data_into(const ParamVector& theta, std::uint64_t seed,
                      std::int64_t stream, std::vector<double>& out);

}  // namespace pioracle
