#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pioracle/losses.hpp"
#include "pioracle/model.hpp"
#include "pioracle/posterior.hpp"

namespace pioracle {

// Source of posterior marginals plus the joint (xi, W) sampler used for
// calibration. Three flavors share one interface: the exact permutation
// mixture, a sampled-subset mixture, and the coordinatewise empirical-prior
// mixture of the simple rule.
class PosteriorBackend {
 public:
  enum class Kind { ExactPi, SampledPi, Simple };

  using SummaryFn =
      std::function<PosteriorSummary(std::span<const double>, const NullSet&)>;
  using LogMarginalFn = std::function<double(std::span<const double>)>;
  using JointDrawFn = std::function<void(RngStream&, std::vector<double>&,
                                         std::vector<double>&)>;

  static PosteriorBackend exact_pi(const ParamVector& theta);
  static PosteriorBackend sampled_pi(const ParamVector& theta,
                                     std::shared_ptr<const PermutationEnsemble> ens);
  static PosteriorBackend custom(Kind kind, ParamVector theta,
                                 std::int64_t ensemble_size, SummaryFn summary,
                                 LogMarginalFn log_marginal, JointDrawFn draw);

  PosteriorSummary summarize(std::span<const double> z, const NullSet& ns) const {
    return summary_(z, ns);
  }
  double log_marginal(std::span<const double> z) const { return log_marginal_(z); }

  // One draw of (xi, W): xi is a prior arrangement of theta, W ~ N(xi, sigma^2).
  void draw_joint(RngStream& rng, std::vector<double>& xi,
                  std::vector<double>& w) const {
    draw_(rng, xi, w);
  }

  Kind kind() const { return kind_; }
  const ParamVector& theta() const { return theta_; }
  int n() const { return theta_.n(); }
  double sigma() const { return theta_.sigma; }
  std::int64_t ensemble_size() const { return ensemble_m_; }
  std::string mode_label() const;

  // Exact-mode rules evaluate on sorted data and map the action back, making
  // equivariance hold bit for bit; a sampled mixture is not symmetric, so
  // there the posterior must see the data as given.
  bool canonical_decide() const { return kind_ == Kind::ExactPi; }

 private:
  Kind kind_ = Kind::ExactPi;
  ParamVector theta_;
  std::int64_t ensemble_m_ = 0;
  SummaryFn summary_;
  LogMarginalFn log_marginal_;
  JointDrawFn draw_;
};

// ---- Rules at a fixed multiplier ----

// Minimum over r of the posterior expected fnp + lambda * fdp, realized by
// rejecting a prefix of the q-sorted coordinates.
struct MtScan {
  int r_star = 0;
  std::vector<double> rho;  // rho[r], r = 0..n
};
MtScan mt_scan(std::span<const double> q, double lambda);
MultiTestAction mt_rule_at_lambda(const PosteriorSummary& summary, double lambda);

// Minimum over r of the posterior expected dir-fnp + lambda * dir-fdp. For
// each count r the classified set minimizes the exact per-index trade-off
// (identical to picking the r smallest q_i = min(p_pos, p_neg) whenever the
// no-sign mass is constant across coordinates); labels take the likelier
// sign, ties going to "+".
SignAction sign_rule_at_lambda(const PosteriorSummary& summary, double lambda);

// Posterior-mean estimates; unselected coordinates carry them too.
EstimateAction selective_estimate(const PosteriorSummary& summary,
                                  const SelectionRule& selection,
                                  std::span<const double> z);

// ---- Global test ----

// Likelihood ratio of the all-null density to the permutation mixture.
double lr_statistic(const ParamVector& theta, const PermutationEnsemble& ensemble,
                    const DataVector& z);

struct GlobalTestOracle {
  PosteriorBackend backend;
  double alpha = 0.05;
  double log_c = 0.0;  // log of the critical value c(alpha)
  double log_c_se = 0.0;
  bool degenerate = false;  // theta == 0: Lambda is constant
  std::int64_t calibration_draws = 0;
  std::uint64_t calibration_seed = 0;

  double c() const { return std::exp(log_c); }
  double log_lr(std::span<const double> z) const;
  double lr(std::span<const double> z) const { return std::exp(log_lr(z)); }
  GlobalTestAction decide(std::span<const double> z) const;
};

GlobalTestOracle calibrate_global(const PosteriorBackend& backend, double alpha,
                                  std::int64_t draws, std::uint64_t seed);
GlobalTestOracle calibrate_global(const ParamVector& theta,
                                  const PermutationEnsemble& ensemble, double alpha,
                                  std::int64_t draws, std::uint64_t seed);

// ---- Constrained multiple-decision oracles ----

enum class ConstrainedProblem { Fdr, DirFdr };

// Law the constraint expectation is taken over: the backend's (xi, W) mixture
// (the oracle's own definition) or fresh Z ~ N(theta, sigma^2 I) with the
// truth held at theta (used when approximating the oracle's calibration for a
// subset rule evaluated frequentist at theta).
enum class CalibrationLaw { Mixture, FixedTheta };

struct BisectionConfig {
  double lambda_lo = 1e-4;
  double lambda_hi = 1e4;
  int max_iter = 80;
  int fallback_grid = 129;  // used only if the constraint map is non-monotone
};

struct CalibrationPoint {
  double lambda = 0.0;
  double constraint = 0.0;  // estimated E[fdp] or E[dir-fdp]
  double se = 0.0;
};

struct LagrangianOracle {
  PosteriorBackend backend;
  ConstrainedProblem problem = ConstrainedProblem::Fdr;
  NullSet null_set;
  double alpha = 0.1;
  double lambda_star = 1.0;
  double constraint_at_star = 0.0;
  double constraint_se = 0.0;
  bool at_lower_edge = false;   // constraint slack over the whole bracket
  bool infeasible = false;      // constraint above alpha everywhere; never reject
  bool nonmonotone = false;     // bisection premise violated; grid fallback used
  std::vector<CalibrationPoint> trace;
  std::int64_t calibration_draws = 0;
  std::uint64_t calibration_seed = 0;
  BisectionConfig config;

  MultiTestAction decide_mt(std::span<const double> z) const;
  SignAction decide_sign(std::span<const double> z) const;
};

LagrangianOracle calibrate_lambda(const PosteriorBackend& backend, double alpha,
                                  ConstrainedProblem problem, std::int64_t draws,
                                  std::uint64_t seed,
                                  const BisectionConfig& config = {},
                                  const NullSet& null_set = NullSet::point_zero(),
                                  CalibrationLaw law = CalibrationLaw::Mixture);
LagrangianOracle calibrate_lambda(const ParamVector& theta,
                                  const PermutationEnsemble& ensemble, double alpha,
                                  ConstrainedProblem problem, std::int64_t draws,
                                  std::uint64_t seed,
                                  const BisectionConfig& config = {},
                                  const NullSet& null_set = NullSet::point_zero());

// ---- Selective estimation oracle ----

struct SelectiveEstimator {
  PosteriorBackend backend;
  SelectionRule selection = SelectionRule::all();
  NullSet null_set;

  EstimateAction decide(std::span<const double> z) const;
};

}  // namespace pioracle
