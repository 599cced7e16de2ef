#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pioracle/model.hpp"

namespace pioracle {

enum class EnsembleMode { Exact, Sampled };

// The "prior" over permutations: all of S_n (Exact) or m uniform draws with
// replacement (Sampled). Members are stored flat, one byte per index.
class PermutationEnsemble {
 public:
  static constexpr int kDefaultExactCap = 10;

  // All n! permutations in lexicographic order of their index arrays.
  static PermutationEnsemble enumerate_exact(int n, int n_max = kDefaultExactCap);

  // m uniform draws from S_n (with replacement) via seeded Fisher-Yates.
  static PermutationEnsemble sample(int n, std::int64_t m, std::uint64_t seed);

  EnsembleMode mode() const { return mode_; }
  int n() const { return n_; }
  std::int64_t size() const { return m_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const std::uint8_t> member(std::int64_t i) const {
    return {flat_.data() + i * n_, static_cast<std::size_t>(n_)};
  }
  Permutation member_permutation(std::int64_t i) const;

 private:
  PermutationEnsemble() = default;

  EnsembleMode mode_ = EnsembleMode::Exact;
  int n_ = 0;
  std::int64_t m_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> flat_;
};

// Conditional law of G given W = z under the uniform-permutation mixture:
// log_weights[g] = log_likelihood(g(theta), z) - logsumexp over members.
struct WeightedPosterior {
  const PermutationEnsemble* ensemble = nullptr;
  ParamVector theta;
  DataVector data;
  std::vector<double> log_weights;  // normalized: logsumexp == 0
};

WeightedPosterior posterior_weights(const PermutationEnsemble& ensemble,
                                    const ParamVector& theta,
                                    const DataVector& z);

}  // namespace pioracle
