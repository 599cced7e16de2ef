#include "pioracle/simple_rule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pioracle {

SimpleMarginal simple_posterior(const EmpiricalPrior& prior, double z_i,
                                const NullSet& null_set) {
  if (!std::isfinite(z_i))
    throw std::invalid_argument("simple_posterior: z must be finite");
  const int n = prior.n();
  if (n < 1) throw std::invalid_argument("simple_posterior: empty prior");

  const bool degenerate =
      std::all_of(prior.atoms.begin(), prior.atoms.end(),
                  [&](double v) { return v == prior.atoms.front(); });
  if (degenerate) {
    const double c = prior.atoms.front();
    SimpleMarginal out;
    out.q_null = null_set.contains(c) ? 1.0 : 0.0;
    out.p_pos = c > 0.0 ? 1.0 : 0.0;
    out.p_neg = c < 0.0 ? 1.0 : 0.0;
    out.post_mean = c;
    return out;
  }

  std::vector<double> lw(n);
  for (int j = 0; j < n; ++j) {
    const double u = (z_i - prior.atoms[j]) / prior.sigma;
    lw[j] = -0.5 * u * u;
  }
  const double lse = log_sum_exp(lw);
  SimpleMarginal out;
  for (int j = 0; j < n; ++j) {
    const double w = std::exp(lw[j] - lse);
    const double v = prior.atoms[j];
    if (null_set.contains(v)) out.q_null += w;
    if (v > 0.0) out.p_pos += w;
    else if (v < 0.0) out.p_neg += w;
    out.post_mean += w * v;
  }
  return out;
}

PosteriorSummary simple_summary(const EmpiricalPrior& prior,
                                std::span<const double> z,
                                const NullSet& null_set) {
  PosteriorSummary s;
  s.null_set = null_set;
  const int n = static_cast<int>(z.size());
  s.q_null.resize(n);
  s.p_pos.resize(n);
  s.p_neg.resize(n);
  s.post_mean.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto m = simple_posterior(prior, z[i], null_set);
    s.q_null[i] = m.q_null;
    s.p_pos[i] = m.p_pos;
    s.p_neg[i] = m.p_neg;
    s.post_mean[i] = m.post_mean;
  }
  return s;
}

PosteriorBackend simple_backend(const ParamVector& theta) {
  const EmpiricalPrior prior = EmpiricalPrior::from(theta);
  auto summary = [prior](std::span<const double> z, const NullSet& ns) {
    return simple_summary(prior, z, ns);
  };
  auto log_marginal = [prior](std::span<const double> z) {
    // Product over coordinates of the univariate atom mixture.
    double total = 0.0;
    std::vector<double> lw(prior.n());
    for (double zi : z) {
      for (int j = 0; j < prior.n(); ++j)
        lw[j] = log_normal_pdf(zi, prior.atoms[j], prior.sigma);
      total += log_sum_exp(lw) - std::log(static_cast<double>(prior.n()));
    }
    return total;
  };
  auto draw = [prior](RngStream& rng, std::vector<double>& xi,
                      std::vector<double>& w) {
    const int n = prior.n();
    xi.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
      xi[i] = prior.atoms[rng.uniform_int(n)];
      w[i] = xi[i] + prior.sigma * rng.normal();
    }
  };
  return PosteriorBackend::custom(PosteriorBackend::Kind::Simple, theta,
                                  theta.n(), std::move(summary),
                                  std::move(log_marginal), std::move(draw));
}

OracleRules build_simple_rules(const ParamVector& theta, const ProblemSpec& spec,
                               std::int64_t calibration_draws,
                               std::uint64_t seed) {
  return build_oracle_rules(simple_backend(theta), spec, calibration_draws, seed);
}

GapResult gap_estimate(const ParamVector& theta, const ProblemSpec& spec,
                       std::int64_t draws, std::uint64_t seed,
                       std::int64_t calibration_draws) {
  // The gap needs the exact PI oracle; exact_pi throws a CapacityError past
  // the enumeration cap, which is the contract here.
  const auto pi_backend = PosteriorBackend::exact_pi(theta);
  const auto pi_rules =
      build_oracle_rules(pi_backend, spec, calibration_draws, derive_seed(seed, 1));
  const auto simple_rules =
      build_simple_rules(theta, spec, calibration_draws, derive_seed(seed, 2));

  PairedComparison cmp;
  switch (spec.problem) {
    case Problem::Global:
      cmp = paired_risk(theta, simple_rules.global, pi_rules.global, spec, draws, seed);
      break;
    case Problem::Fdr:
      cmp = paired_risk(theta, simple_rules.mt, pi_rules.mt, spec, draws, seed);
      break;
    case Problem::Sign:
      cmp = paired_risk(theta, simple_rules.sign, pi_rules.sign, spec, draws, seed);
      break;
    case Problem::Estimate:
      cmp = paired_risk(theta, simple_rules.est, pi_rules.est, spec, draws, seed);
      break;
  }
  GapResult out;
  out.risk_simple = cmp.a;
  out.risk_simple.ensemble_mode = "simple";
  out.risk_simple.ensemble_m = theta.n();
  out.risk_pi = cmp.b;
  out.risk_pi.ensemble_mode = "exact";
  out.risk_pi.ensemble_m = pi_backend.ensemble_size();
  out.gap = cmp.diff;
  out.gap_se = cmp.diff_se;
  return out;
}

}  // namespace pioracle
