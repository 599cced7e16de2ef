#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pioracle/permutation_engine.hpp"

namespace pioracle {

// The null parameter set T0: a point or a closed interval.
struct NullSet {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  bool is_point() const { return lo == hi; }
  std::string describe() const;

  static NullSet point_zero() { return NullSet{0.0, 0.0}; }
  static NullSet interval(double lo, double hi);
};

// Per-coordinate marginals of xi given W = z: everything the oracle rules
// consume.
struct PosteriorSummary {
  std::vector<double> q_null;     // P(xi_i in T0 | z)
  std::vector<double> p_pos;      // P(xi_i > 0 | z)
  std::vector<double> p_neg;      // P(xi_i < 0 | z)
  std::vector<double> post_mean;  // E[xi_i | z]
  NullSet null_set;

  int n() const { return static_cast<int>(q_null.size()); }
};

// Member-level marginals from an explicit weighted posterior.
PosteriorSummary summarize(const WeightedPosterior& wp,
                           const NullSet& null_set = NullSet::point_zero());

// log[(1/m) sum_g exp(log_likelihood(g(theta), z))]; in Exact mode the exact
// mixture density of W at z.
double marginal_log_density(const ParamVector& theta,
                            const PermutationEnsemble& ensemble,
                            const DataVector& z);

// Mixture representation tuned for repeated evaluation. Rows are the
// arrangements of theta charged by the prior: in Exact mode the distinct
// arrangements of the multiset (ties collapse to one row each, which leaves
// all marginals unchanged because tied arrangements carry equal mass), in
// Sampled mode one row per drawn member. Values are stored as indices into
// the distinct-value table so a row's log likelihood is n table lookups.
class MixtureEngine {
 public:
  static constexpr std::int64_t kMaxRows = 4'000'000;

  static MixtureEngine exact(const ParamVector& theta);
  static MixtureEngine from_ensemble(const ParamVector& theta,
                                     const PermutationEnsemble& ensemble);

  int n() const { return n_; }
  double sigma() const { return sigma_; }
  std::int64_t rows() const { return static_cast<std::int64_t>(row_idx_.size()) / n_; }
  EnsembleMode mode() const { return mode_; }
  std::int64_t ensemble_size() const { return ensemble_m_; }

  struct Workspace {
    std::vector<double> table;    // n x D log-density terms
    std::vector<double> row_ll;   // per-row log likelihood (unnormalized)
    std::vector<double> weights;  // per-row posterior weight
  };

  PosteriorSummary summarize(std::span<const double> z, const NullSet& null_set,
                             Workspace* ws = nullptr) const;
  double log_marginal(std::span<const double> z, Workspace* ws = nullptr) const;

  // One pass producing both the summary and the marginal log density.
  PosteriorSummary summarize_with_density(std::span<const double> z,
                                          const NullSet& null_set,
                                          double* log_marginal_out,
                                          Workspace* ws = nullptr) const;

 private:
  MixtureEngine() = default;

  void eval_rows(std::span<const double> z, Workspace& ws) const;

  int n_ = 0;
  double sigma_ = 1.0;
  EnsembleMode mode_ = EnsembleMode::Exact;
  std::int64_t ensemble_m_ = 0;            // n! or sampled m
  std::vector<double> distinct_;           // D distinct parameter values
  std::vector<std::uint16_t> row_idx_;     // rows x n indices into distinct_
  double log_prior_ = 0.0;                 // -log(rows), uniform
};

}  // namespace pioracle
