#include "pioracle/permutation_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pioracle {

namespace {

std::int64_t factorial(int n) {
  std::int64_t f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace

PermutationEnsemble PermutationEnsemble::enumerate_exact(int n, int n_max) {
  if (n < 1) throw std::invalid_argument("enumerate_exact: n must be >= 1");
  if (n > n_max)
    throw CapacityError("enumerate_exact: n = " + std::to_string(n) +
                        " exceeds the exact cap " + std::to_string(n_max) +
                        "; use a sampled ensemble instead");
  PermutationEnsemble e;
  e.mode_ = EnsembleMode::Exact;
  e.n_ = n;
  e.m_ = factorial(n);
  e.flat_.reserve(e.m_ * n);
  std::vector<std::uint8_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  do {
    e.flat_.insert(e.flat_.end(), p.begin(), p.end());
  } while (std::next_permutation(p.begin(), p.end()));
  return e;
}

PermutationEnsemble PermutationEnsemble::sample(int n, std::int64_t m,
                                                std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  if (n > 255) throw std::invalid_argument("sample: n exceeds index storage");
  if (m < 1) throw std::invalid_argument("sample: m must be >= 1");
  PermutationEnsemble e;
  e.mode_ = EnsembleMode::Sampled;
  e.n_ = n;
  e.m_ = m;
  e.seed_ = seed;
  e.flat_.resize(m * n);
  std::vector<std::uint8_t> p(n);
  for (std::int64_t j = 0; j < m; ++j) {
    RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const auto k = rng.uniform_int(i + 1);
      std::swap(p[i], p[k]);
    }
    std::copy(p.begin(), p.end(), e.flat_.begin() + j * n);
  }
  return e;
}

Permutation PermutationEnsemble::member_permutation(std::int64_t i) const {
  auto span = member(i);
  Permutation p;
  p.map.assign(span.begin(), span.end());
  return p;
}

WeightedPosterior posterior_weights(const PermutationEnsemble& ensemble,
                                    const ParamVector& theta,
                                    const DataVector& z) {
  if (ensemble.n() != theta.n() || theta.n() != z.n())
    throw std::invalid_argument("posterior_weights: dimension mismatch");
  WeightedPosterior wp;
  wp.ensemble = &ensemble;
  wp.theta = theta;
  wp.data = z;
  wp.log_weights.resize(ensemble.size());

  ParamVector permuted = theta;
  for (std::int64_t g = 0; g < ensemble.size(); ++g) {
    auto idx = ensemble.member(g);
    for (int i = 0; i < theta.n(); ++i)
      permuted.values[i] = theta.values[idx[i]];
    wp.log_weights[g] = log_likelihood(permuted, z);
  }
  // The uniform prior cancels; normalize with a permutation-stable sum so
  // relabeled instances reproduce identical weight multisets.
  const double lse = log_sum_exp_canonical(wp.log_weights);
  for (double& w : wp.log_weights) w -= lse;
  return wp;
}

}  // namespace pioracle
