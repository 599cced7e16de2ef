#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>

#include "pioracle/oracles.hpp"

namespace pioracle {

enum class Problem { Global, Fdr, Sign, Estimate };

std::string problem_name(Problem p);

struct ProblemSpec {
  Problem problem = Problem::Estimate;
  double alpha = 0.05;
  NullSet null_set = NullSet::point_zero();
  SelectionRule selection = SelectionRule::all();
};

enum class BoundDirection { Point, LowerBound, UpperApprox };

std::string bound_direction_name(BoundDirection b);

struct SideStat {
  double estimate = 0.0;
  double std_error = 0.0;
};

struct RiskReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t draws = 0;
  std::uint64_t seed = 0;
  std::map<std::string, SideStat> side_channels;
  std::string ensemble_mode = "exact";
  std::int64_t ensemble_m = 0;
  BoundDirection bound_direction = BoundDirection::Point;
};

using GlobalRule = std::function<GlobalTestAction(std::span<const double>)>;
using MtRule = std::function<MultiTestAction(std::span<const double>)>;
using SignRule = std::function<SignAction(std::span<const double>)>;
using EstRule = std::function<EstimateAction(std::span<const double>)>;

// Plain Monte Carlo risk R(theta, delta) over fresh draws Z ~ N(theta, s^2 I).
// The primary estimate is the problem's loss; constraint-side quantities ride
// along as side channels.
RiskReport estimate_risk(const ParamVector& theta, const GlobalRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed);
RiskReport estimate_risk(const ParamVector& theta, const MtRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed);
RiskReport estimate_risk(const ParamVector& theta, const SignRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed);
RiskReport estimate_risk(const ParamVector& theta, const EstRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed);

// Paired comparison under common random numbers; diff = risk(a) - risk(b)
// with the standard error of the per-draw differences.
struct PairedComparison {
  RiskReport a;
  RiskReport b;
  double diff = 0.0;
  double diff_se = 0.0;
};
PairedComparison paired_risk(const ParamVector& theta, const GlobalRule& a,
                             const GlobalRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed);
PairedComparison paired_risk(const ParamVector& theta, const MtRule& a,
                             const MtRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed);
PairedComparison paired_risk(const ParamVector& theta, const SignRule& a,
                             const SignRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed);
PairedComparison paired_risk(const ParamVector& theta, const EstRule& a,
                             const EstRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed);

// Builds the oracle for `spec` on the given backend. Calibrated oracles use
// calibration_draws MC draws with a seed derived from `seed`.
struct OracleRules {
  GlobalRule global;
  MtRule mt;
  SignRule sign;
  EstRule est;
};
OracleRules build_oracle_rules(const PosteriorBackend& backend,
                               const ProblemSpec& spec,
                               std::int64_t calibration_draws,
                               std::uint64_t seed,
                               CalibrationLaw law = CalibrationLaw::Mixture);

// Sampled-subset bound: Bayes risk of the best rule for a prior uniform on
// m sampled permutations, evaluated under that same mixture. Lower-bounds the
// exact oracle risk. The rule is a bound device, generally not PI.
RiskReport subset_lower_bound(const ParamVector& theta, std::int64_t m,
                              const ProblemSpec& spec, std::int64_t draws,
                              std::uint64_t seed,
                              std::int64_t calibration_draws = 20000);

// Frequentist risk at theta of the same sampled-subset rule (S treated as
// fixed): the MC approximation that over-estimates the exact oracle risk.
RiskReport mc_upper_approx(const ParamVector& theta, std::int64_t m,
                           const ProblemSpec& spec, std::int64_t draws,
                           std::uint64_t seed,
                           std::int64_t calibration_draws = 20000);

// Exact-oracle frequentist risk at theta (the Point reference in sandwiches).
RiskReport exact_oracle_risk(const ParamVector& theta, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed,
                             std::int64_t calibration_draws = 20000);

// ---- Competitor PI rules ----

double normal_cdf(double x);
double normal_quantile(double p);
double chi_squared_quantile(double p, int df);

// Benjamini-Hochberg step-up on two-sided p-values at level alpha.
MtRule bh_rule(double alpha, double sigma);
// Rejects for large sum of squares at exact level alpha.
GlobalRule chi_square_rule(int n, double alpha, double sigma);
EstRule identity_rule();
// Classic shrinkage estimator; requires n >= 3.
EstRule james_stein_rule(int n, double sigma);
// Calls sign(z_i) when |z_i|/sigma exceeds z_crit, otherwise NA.
SignRule naive_sign_rule(double z_crit, double sigma);

}  // namespace pioracle
