#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pioracle/oracles.hpp"
#include "pioracle/risk.hpp"

namespace pioracle {

// The coordinatewise marginal problem: xi-bar uniform on the entries of theta,
// W-bar ~ N(xi-bar, sigma^2).
struct EmpiricalPrior {
  std::vector<double> atoms;
  double sigma = 1.0;

  static EmpiricalPrior from(const ParamVector& theta) {
    return EmpiricalPrior{theta.values, theta.sigma};
  }
  int n() const { return static_cast<int>(atoms.size()); }
};

struct SimpleMarginal {
  double q_null = 0.0;
  double p_pos = 0.0;
  double p_neg = 0.0;
  double post_mean = 0.0;
};

// Posterior of xi-bar given W-bar = z_i under the n-atom mixture.
SimpleMarginal simple_posterior(const EmpiricalPrior& prior, double z_i,
                                const NullSet& null_set = NullSet::point_zero());

// Coordinatewise application; plugs into the same rule constructors as the
// exact summary.
PosteriorSummary simple_summary(const EmpiricalPrior& prior,
                                std::span<const double> z,
                                const NullSet& null_set = NullSet::point_zero());

// Backend over the i.i.d. coordinatewise law; feeds the shared oracle
// machinery to produce the simple-rule analogue of each oracle.
PosteriorBackend simple_backend(const ParamVector& theta);

// Oracle simple rules for a problem spec (calibrated under the i.i.d. law
// where the problem is constrained).
OracleRules build_simple_rules(const ParamVector& theta, const ProblemSpec& spec,
                               std::int64_t calibration_draws, std::uint64_t seed);

// Frequentist risks at theta of the oracle simple rule and the exact oracle
// PI rule under common random numbers, and their gap.
struct GapResult {
  RiskReport risk_simple;
  RiskReport risk_pi;
  double gap = 0.0;     // risk_simple - risk_pi
  double gap_se = 0.0;  // paired standard error
};

GapResult gap_estimate(const ParamVector& theta, const ProblemSpec& spec,
                       std::int64_t draws, std::uint64_t seed,
                       std::int64_t calibration_draws = 20000);

}  // namespace pioracle
