#include "pioracle/risk.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pioracle {

namespace {

constexpr std::uint64_t kEnsembleTag = 0x5ede5ede;
constexpr std::uint64_t kCalibrationTag = 0xca11b;
constexpr std::uint64_t kDrawTag = 0xd4a3;

std::int64_t factorial_capped(int n) {
  std::int64_t f = 1;
  for (int k = 2; k <= n; ++k) {
    f *= k;
    if (f > 100'000'000) return -1;
  }
  return f;
}

// One row of per-draw channel values; index 0 is the primary loss.
using Channels = std::vector<double>;

struct Accumulator {
  std::vector<double> sum, sum_sq;
  std::int64_t count = 0;
  void init(std::size_t k) {
    sum.assign(k, 0.0);
    sum_sq.assign(k, 0.0);
    count = 0;
  }
  void add(const Channels& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      sum[i] += v[i];
      sum_sq[i] += v[i] * v[i];
    }
    ++count;
  }
  void merge(const Accumulator& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sum_sq[i] += o.sum_sq[i];
    }
    count += o.count;
  }
};

RiskReport report_from(const Accumulator& acc,
                       const std::vector<std::string>& names,
                       std::int64_t draws, std::uint64_t seed) {
  RiskReport r;
  r.draws = draws;
  r.seed = seed;
  const auto primary = mean_se(acc.sum[0], acc.sum_sq[0], acc.count);
  r.estimate = primary.mean;
  r.std_error = primary.se;
  for (std::size_t i = 1; i < names.size(); ++i) {
    const auto ms = mean_se(acc.sum[i], acc.sum_sq[i], acc.count);
    r.side_channels[names[i]] = SideStat{ms.mean, ms.se};
  }
  return r;
}

// Per-problem channel evaluation on a fresh draw.
struct GlobalEval {
  ProblemSpec spec;
  static std::vector<std::string> names() { return {"loss", "rejection_rate"}; }
  void operator()(std::span<const double> z, const ParamVector& truth,
                  const GlobalTestAction& a, Channels& out) const {
    (void)z;
    out[0] = global_loss(truth, a, spec.null_set);
    out[1] = a.reject ? 1.0 : 0.0;
  }
};

struct FdrEval {
  ProblemSpec spec;
  static std::vector<std::string> names() {
    return {"loss", "fdr", "avg_rejections"};
  }
  void operator()(std::span<const double> z, const ParamVector& truth,
                  const MultiTestAction& a, Channels& out) const {
    (void)z;
    out[0] = fnp(truth, a, spec.null_set);
    out[1] = fdp(truth, a, spec.null_set);
    out[2] = static_cast<double>(a.rejections());
  }
};

struct SignEval {
  ProblemSpec spec;
  static std::vector<std::string> names() {
    return {"loss", "dir_fdr", "avg_classified"};
  }
  void operator()(std::span<const double> z, const ParamVector& truth,
                  const SignAction& a, Channels& out) const {
    (void)z;
    out[0] = dir_fnp(truth, a);
    out[1] = dir_fdp(truth, a);
    out[2] = static_cast<double>(a.classified());
  }
};

struct EstimateEval {
  ProblemSpec spec;
  static std::vector<std::string> names() {
    return {"loss", "avg_selected", "degenerate_rate"};
  }
  void operator()(std::span<const double> z, const ParamVector& truth,
                  const EstimateAction& a, Channels& out) const {
    out[0] = selective_sq_loss(z, truth, a, spec.selection);
    const auto sel = spec.selection.select(z);
    out[1] = static_cast<double>(sel.count());
    out[2] = sel.degenerate ? 1.0 : 0.0;
  }
};

// Frequentist risk loop: Z ~ N(theta, sigma^2 I), deterministic per-draw
// seeds, chunked reduction in fixed order.
template <class Rule, class Eval>
RiskReport frequentist_risk(const ParamVector& theta, const Rule& rule,
                            const Eval& eval, std::int64_t draws,
                            std::uint64_t seed) {
  if (draws < 1) throw std::invalid_argument("estimate_risk: draws must be >= 1");
  const auto names = Eval::names();
  const std::int64_t chunk = 512;
  const int n_chunks = static_cast<int>((draws + chunk - 1) / chunk);
  std::vector<Accumulator> slots(n_chunks);
  parallel_chunks(draws, chunk, [&](int c, std::int64_t b, std::int64_t e) {
    Accumulator acc;
    acc.init(names.size());
    Channels vals(names.size());
    std::vector<double> z;
    for (std::int64_t j = b; j < e; ++j) {
      sample_data_into(theta, seed, j, z);
      const auto action = rule(std::span<const double>(z));
      eval(z, theta, action, vals);
      acc.add(vals);
    }
    slots[c] = std::move(acc);
  });
  Accumulator total;
  total.init(names.size());
  for (const auto& s : slots) total.merge(s);
  return report_from(total, names, draws, seed);
}

template <class Rule, class Eval>
PairedComparison paired_impl(const ParamVector& theta, const Rule& rule_a,
                             const Rule& rule_b, const Eval& eval,
                             std::int64_t draws, std::uint64_t seed) {
  const auto names = Eval::names();
  const std::int64_t chunk = 512;
  const int n_chunks = static_cast<int>((draws + chunk - 1) / chunk);
  struct Slot {
    Accumulator a, b;
    double dsum = 0.0, dsum_sq = 0.0;
  };
  std::vector<Slot> slots(n_chunks);
  parallel_chunks(draws, chunk, [&](int c, std::int64_t b, std::int64_t e) {
    Slot s;
    s.a.init(names.size());
    s.b.init(names.size());
    Channels va(names.size()), vb(names.size());
    std::vector<double> z;
    for (std::int64_t j = b; j < e; ++j) {
      sample_data_into(theta, seed, j, z);
      const auto action_a = rule_a(std::span<const double>(z));
      const auto action_b = rule_b(std::span<const double>(z));
      eval(z, theta, action_a, va);
      eval(z, theta, action_b, vb);
      s.a.add(va);
      s.b.add(vb);
      const double d = va[0] - vb[0];
      s.dsum += d;
      s.dsum_sq += d * d;
    }
    slots[c] = std::move(s);
  });
  Slot total;
  total.a.init(names.size());
  total.b.init(names.size());
  for (const auto& s : slots) {
    total.a.merge(s.a);
    total.b.merge(s.b);
    total.dsum += s.dsum;
    total.dsum_sq += s.dsum_sq;
  }
  PairedComparison out;
  out.a = report_from(total.a, names, draws, seed);
  out.b = report_from(total.b, names, draws, seed);
  const auto d = mean_se(total.dsum, total.dsum_sq, draws);
  out.diff = d.mean;
  out.diff_se = d.se;
  return out;
}

}  // namespace

std::string problem_name(Problem p) {
  switch (p) {
    case Problem::Global: return "global";
    case Problem::Fdr: return "fdr";
    case Problem::Sign: return "sign";
    case Problem::Estimate: return "estimate";
  }
  return "?";
}

std::string bound_direction_name(BoundDirection b) {
  switch (b) {
    case BoundDirection::Point: return "point";
    case BoundDirection::LowerBound: return "lower_bound";
    case BoundDirection::UpperApprox: return "upper_approx";
  }
  return "?";
}

RiskReport estimate_risk(const ParamVector& theta, const GlobalRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed) {
  return frequentist_risk(theta, rule, GlobalEval{spec}, draws, seed);
}
RiskReport estimate_risk(const ParamVector& theta, const MtRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed) {
  return frequentist_risk(theta, rule, FdrEval{spec}, draws, seed);
}
RiskReport estimate_risk(const ParamVector& theta, const SignRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed) {
  return frequentist_risk(theta, rule, SignEval{spec}, draws, seed);
}
RiskReport estimate_risk(const ParamVector& theta, const EstRule& rule,
                         const ProblemSpec& spec, std::int64_t draws,
                         std::uint64_t seed) {
  return frequentist_risk(theta, rule, EstimateEval{spec}, draws, seed);
}

PairedComparison paired_risk(const ParamVector& theta, const GlobalRule& a,
                             const GlobalRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed) {
  return paired_impl(theta, a, b, GlobalEval{spec}, draws, seed);
}
PairedComparison paired_risk(const ParamVector& theta, const MtRule& a,
                             const MtRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed) {
  return paired_impl(theta, a, b, FdrEval{spec}, draws, seed);
}
PairedComparison paired_risk(const ParamVector& theta, const SignRule& a,
                             const SignRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed) {
  return paired_impl(theta, a, b, SignEval{spec}, draws, seed);
}
PairedComparison paired_risk(const ParamVector& theta, const EstRule& a,
                             const EstRule& b, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed) {
  return paired_impl(theta, a, b, EstimateEval{spec}, draws, seed);
}

OracleRules build_oracle_rules(const PosteriorBackend& backend,
                               const ProblemSpec& spec,
                               std::int64_t calibration_draws,
                               std::uint64_t seed, CalibrationLaw law) {
  OracleRules rules;
  switch (spec.problem) {
    case Problem::Global: {
      auto oracle = calibrate_global(backend, spec.alpha, calibration_draws,
                                     derive_seed(seed, kCalibrationTag));
      rules.global = [oracle](std::span<const double> z) {
        return oracle.decide(z);
      };
      break;
    }
    case Problem::Fdr: {
      auto oracle = calibrate_lambda(backend, spec.alpha, ConstrainedProblem::Fdr,
                                     calibration_draws,
                                     derive_seed(seed, kCalibrationTag), {},
                                     spec.null_set, law);
      rules.mt = [oracle](std::span<const double> z) {
        return oracle.decide_mt(z);
      };
      break;
    }
    case Problem::Sign: {
      auto oracle = calibrate_lambda(backend, spec.alpha,
                                     ConstrainedProblem::DirFdr,
                                     calibration_draws,
                                     derive_seed(seed, kCalibrationTag), {},
                                     spec.null_set, law);
      rules.sign = [oracle](std::span<const double> z) {
        return oracle.decide_sign(z);
      };
      break;
    }
    case Problem::Estimate: {
      SelectiveEstimator est{backend, spec.selection, spec.null_set};
      rules.est = [est](std::span<const double> z) { return est.decide(z); };
      break;
    }
  }
  return rules;
}

namespace {

PosteriorBackend subset_backend(const ParamVector& theta, std::int64_t m,
                                std::uint64_t seed) {
  // Passing the full group size recovers the exact oracle.
  const std::int64_t full = factorial_capped(theta.n());
  if (full > 0 && m == full && theta.n() <= PermutationEnsemble::kDefaultExactCap)
    return PosteriorBackend::exact_pi(theta);
  auto ens = std::make_shared<PermutationEnsemble>(PermutationEnsemble::sample(
      theta.n(), m, derive_seed(seed, kEnsembleTag)));
  return PosteriorBackend::sampled_pi(theta, std::move(ens));
}

// Bayes risk of `rules` under the backend's own (xi, W) mixture.
RiskReport mixture_bayes_risk(const PosteriorBackend& backend,
                              const OracleRules& rules, const ProblemSpec& spec,
                              std::int64_t draws, std::uint64_t seed) {
  std::vector<std::string> names;
  switch (spec.problem) {
    case Problem::Global: names = GlobalEval::names(); break;
    case Problem::Fdr: names = FdrEval::names(); break;
    case Problem::Sign: names = SignEval::names(); break;
    case Problem::Estimate: names = EstimateEval::names(); break;
  }
  const std::uint64_t draw_seed = derive_seed(seed, kDrawTag);
  const std::int64_t chunk = 512;
  const int n_chunks = static_cast<int>((draws + chunk - 1) / chunk);
  std::vector<Accumulator> slots(n_chunks);
  parallel_chunks(draws, chunk, [&](int c, std::int64_t b, std::int64_t e) {
    Accumulator acc;
    acc.init(names.size());
    Channels vals(names.size());
    std::vector<double> xi, w;
    for (std::int64_t j = b; j < e; ++j) {
      RngStream rng(derive_seed(draw_seed, static_cast<std::uint64_t>(j)));
      backend.draw_joint(rng, xi, w);
      const ParamVector truth(xi, backend.sigma());
      const std::span<const double> zs(w);
      switch (spec.problem) {
        case Problem::Global:
          GlobalEval{spec}(zs, truth, rules.global(zs), vals);
          break;
        case Problem::Fdr:
          FdrEval{spec}(zs, truth, rules.mt(zs), vals);
          break;
        case Problem::Sign:
          SignEval{spec}(zs, truth, rules.sign(zs), vals);
          break;
        case Problem::Estimate:
          EstimateEval{spec}(zs, truth, rules.est(zs), vals);
          break;
      }
      acc.add(vals);
    }
    slots[c] = std::move(acc);
  });
  Accumulator total;
  total.init(names.size());
  for (const auto& s : slots) total.merge(s);
  return report_from(total, names, draws, seed);
}

RiskReport frequentist_risk_any(const ParamVector& theta, const OracleRules& rules,
                                const ProblemSpec& spec, std::int64_t draws,
                                std::uint64_t seed) {
  switch (spec.problem) {
    case Problem::Global: return estimate_risk(theta, rules.global, spec, draws, seed);
    case Problem::Fdr: return estimate_risk(theta, rules.mt, spec, draws, seed);
    case Problem::Sign: return estimate_risk(theta, rules.sign, spec, draws, seed);
    case Problem::Estimate: return estimate_risk(theta, rules.est, spec, draws, seed);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

RiskReport subset_lower_bound(const ParamVector& theta, std::int64_t m,
                              const ProblemSpec& spec, std::int64_t draws,
                              std::uint64_t seed, std::int64_t calibration_draws) {
  if (m < 1) throw std::invalid_argument("subset_lower_bound: m must be >= 1");
  const auto backend = subset_backend(theta, m, seed);
  const auto rules = build_oracle_rules(backend, spec, calibration_draws, seed);
  auto report = mixture_bayes_risk(backend, rules, spec, draws, seed);
  report.ensemble_mode = backend.mode_label();
  report.ensemble_m = backend.ensemble_size();
  report.bound_direction = BoundDirection::LowerBound;
  return report;
}

RiskReport mc_upper_approx(const ParamVector& theta, std::int64_t m,
                           const ProblemSpec& spec, std::int64_t draws,
                           std::uint64_t seed, std::int64_t calibration_draws) {
  if (m < 1) throw std::invalid_argument("mc_upper_approx: m must be >= 1");

  // With the full group the approximation is the exact oracle itself.
  const std::int64_t full = factorial_capped(theta.n());
  if (full > 0 && m == full && theta.n() <= PermutationEnsemble::kDefaultExactCap) {
    auto report = exact_oracle_risk(theta, spec, draws, seed, calibration_draws);
    report.bound_direction = BoundDirection::UpperApprox;
    return report;
  }

  // A single subset draw is a noisy approximation of the oracle; the risk of
  // delta*_S only over-estimates the oracle risk on average over S, so the
  // estimate averages several independent subsets and its standard error
  // carries the between-subset spread. Constrained rules are re-tuned to the
  // frequentist constraint at theta, which is what they approximate.
  const int replicates = 5;
  const std::int64_t draws_per = std::max<std::int64_t>(1, draws / replicates);
  std::vector<RiskReport> reps;
  reps.reserve(replicates);
  for (int r = 0; r < replicates; ++r) {
    const std::uint64_t rep_seed = derive_seed(seed, 0x9c0 + r);
    const auto backend = subset_backend(theta, m, rep_seed);
    const auto rules = build_oracle_rules(backend, spec, calibration_draws,
                                          rep_seed, CalibrationLaw::FixedTheta);
    reps.push_back(frequentist_risk_any(theta, rules, spec, draws_per,
                                        derive_seed(rep_seed, kDrawTag)));
  }

  RiskReport report;
  report.draws = draws_per * replicates;
  report.seed = seed;
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& r : reps) {
    sum += r.estimate;
    sum_sq += r.estimate * r.estimate;
  }
  const auto ms = mean_se(sum, sum_sq, replicates);
  report.estimate = ms.mean;
  // between-replicate spread; add the mean within-replicate variance so the
  // error bar stays honest even when the subsets happen to agree
  double within = 0.0;
  for (const auto& r : reps) within += r.std_error * r.std_error;
  within /= replicates * replicates;
  report.std_error = std::sqrt(ms.se * ms.se + within);
  for (const auto& [name, stat] : reps.front().side_channels) {
    double s = 0.0, s2 = 0.0;
    for (const auto& r : reps) {
      const auto& st = r.side_channels.at(name);
      s += st.estimate;
      s2 += st.estimate * st.estimate;
    }
    const auto cms = mean_se(s, s2, replicates);
    report.side_channels[name] = SideStat{cms.mean, cms.se};
  }
  report.ensemble_mode = "sampled(" + std::to_string(m) + ")x" +
                         std::to_string(replicates);
  report.ensemble_m = m;
  report.bound_direction = BoundDirection::UpperApprox;
  return report;
}

RiskReport exact_oracle_risk(const ParamVector& theta, const ProblemSpec& spec,
                             std::int64_t draws, std::uint64_t seed,
                             std::int64_t calibration_draws) {
  const auto backend = PosteriorBackend::exact_pi(theta);
  const auto rules = build_oracle_rules(backend, spec, calibration_draws, seed);
  auto report = frequentist_risk_any(theta, rules, spec, draws,
                                     derive_seed(seed, kDrawTag));
  report.ensemble_mode = backend.mode_label();
  report.ensemble_m = backend.ensemble_size();
  return report;
}

// ---- Competitors ----

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  boost::math::normal_distribution<double> d;
  return boost::math::quantile(d, p);
}

double chi_squared_quantile(double p, int df) {
  boost::math::chi_squared_distribution<double> d(df);
  return boost::math::quantile(d, p);
}

MtRule bh_rule(double alpha, double sigma) {
  return [alpha, sigma](std::span<const double> z) {
    const int n = static_cast<int>(z.size());
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i)
      p[i] = std::erfc(std::abs(z[i]) / (sigma * std::sqrt(2.0)));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return p[a] < p[b]; });
    int k_star = 0;
    for (int k = 1; k <= n; ++k) {
      if (p[order[k - 1]] <= alpha * k / n) k_star = k;
    }
    MultiTestAction a;
    a.reject.assign(n, 0);
    if (k_star > 0) {
      const double thresh = p[order[k_star - 1]];
      for (int i = 0; i < n; ++i)
        if (p[i] <= thresh) a.reject[i] = 1;
    }
    return a;
  };
}

GlobalRule chi_square_rule(int n, double alpha, double sigma) {
  const double threshold = chi_squared_quantile(1.0 - alpha, n);
  return [threshold, sigma](std::span<const double> z) {
    std::vector<double> sq(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      sq[i] = (z[i] / sigma) * (z[i] / sigma);
    return GlobalTestAction{canonical_sum(std::move(sq)) > threshold};
  };
}

EstRule identity_rule() {
  return [](std::span<const double> z) {
    EstimateAction a;
    a.values.assign(z.begin(), z.end());
    return a;
  };
}

EstRule james_stein_rule(int n, double sigma) {
  if (n < 3)
    throw std::invalid_argument("james_stein_rule: requires n >= 3");
  return [n, sigma](std::span<const double> z) {
    std::vector<double> sq(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) sq[i] = z[i] * z[i];
    const double norm_sq = canonical_sum(std::move(sq));
    const double shrink =
        norm_sq > 0.0 ? 1.0 - (n - 2) * sigma * sigma / norm_sq : 0.0;
    EstimateAction a;
    a.values.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a.values[i] = shrink * z[i];
    return a;
  };
}

SignRule naive_sign_rule(double z_crit, double sigma) {
  return [z_crit, sigma](std::span<const double> z) {
    SignAction a;
    a.labels.assign(z.size(), SignLabel::NA);
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (std::abs(z[i]) / sigma > z_crit)
        a.labels[i] = z[i] > 0.0 ? SignLabel::Plus : SignLabel::Minus;
    }
    return a;
  };
}

}  // namespace pioracle
