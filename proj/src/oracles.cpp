#include "pioracle/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pioracle {

namespace {

// Shared by decide paths: exact-mode rules act on sorted data and the action
// is mapped back through the sorting permutation afterwards.
struct Canon {
  bool active = false;
  std::vector<int> perm;  // zs[k] = z[perm[k]]
  std::vector<double> zs;
};

Canon canonicalize(const PosteriorBackend& backend, std::span<const double> z) {
  Canon c;
  if (backend.canonical_decide()) {
    c.active = true;
    c.perm = sort_perm(z);
    c.zs.resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) c.zs[k] = z[c.perm[k]];
  } else {
    c.zs.assign(z.begin(), z.end());
  }
  return c;
}

template <typename T>
std::vector<T> unsort(const Canon& c, const std::vector<T>& sorted_action) {
  if (!c.active) return sorted_action;
  std::vector<T> out(sorted_action.size());
  for (std::size_t k = 0; k < sorted_action.size(); ++k)
    out[c.perm[k]] = sorted_action[k];
  return out;
}

// Rejection scan: minimize over r the posterior expected fnp + lambda * fdp,
//   rho_lambda(r) = (lambda/r) sum_{i<=r} q_(i) + (1/(n-r)) sum_{i>r} (1-q_(i)),
// empty sums = 0. Returns r*; `order` holds the q-ascending index order.
int mt_core(std::span<const double> q, double lambda, std::vector<int>& order,
            std::vector<double>* rho_out) {
  const int n = static_cast<int>(q.size());
  order.resize(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return q[a] < q[b]; });
  double pref_q = 0.0;
  double tail_one_minus = 0.0;
  for (int i = 0; i < n; ++i) tail_one_minus += 1.0 - q[i];

  int r_star = 0;
  double best = std::numeric_limits<double>::infinity();
  if (rho_out) rho_out->assign(n + 1, 0.0);
  for (int r = 0; r <= n; ++r) {
    if (r > 0) {
      pref_q += q[order[r - 1]];
      tail_one_minus -= 1.0 - q[order[r - 1]];
    }
    const double fdp_part = r > 0 ? lambda * pref_q / r : 0.0;
    const double fnp_part = r < n ? tail_one_minus / (n - r) : 0.0;
    const double rho = fdp_part + fnp_part;
    if (rho_out) (*rho_out)[r] = rho;
    if (rho < best) {
      best = rho;
      r_star = r;
    }
  }
  return r_star;
}

void mt_fill(std::span<const double> q, double lambda, std::uint8_t* reject,
             std::vector<int>& order) {
  const int n = static_cast<int>(q.size());
  const int r_star = mt_core(q, lambda, order, nullptr);
  std::fill(reject, reject + n, 0);
  for (int r = 0; r < r_star; ++r) reject[order[r]] = 1;
}

// Sign scan: minimize over r the posterior expected dir-fnp + lambda*dir-fdp.
// For fixed r the classified set minimizes the exact per-index score
//   lambda*min(p_pos,p_neg)/r - (p_pos+p_neg)/(n-r);
// with equal no-sign mass across coordinates this reduces to the r smallest
// min(p_pos, p_neg). Labels follow the likelier sign, ties to "+".
void sign_fill(std::span<const double> p_pos, std::span<const double> p_neg,
               double lambda, SignLabel* out, std::vector<int>& order,
               std::vector<double>& score) {
  const int n = static_cast<int>(p_pos.size());
  double sum_q = 0.0, sum_s = 0.0;
  for (int i = 0; i < n; ++i) {
    sum_q += std::min(p_pos[i], p_neg[i]);
    sum_s += p_pos[i] + p_neg[i];
  }

  int best_r = 0;
  double best = sum_s / n;  // r = 0: everything NA
  std::vector<int> best_set;

  order.resize(n);
  score.resize(n);
  for (int r = 1; r <= n; ++r) {
    double objective;
    if (r == n) {
      objective = lambda * sum_q / n;
      if (objective < best) {
        best = objective;
        best_r = n;
        best_set.resize(n);
        std::iota(best_set.begin(), best_set.end(), 0);
      }
      continue;
    }
    for (int i = 0; i < n; ++i) {
      const double q = std::min(p_pos[i], p_neg[i]);
      score[i] = lambda * q / r - (p_pos[i] + p_neg[i]) / (n - r);
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return score[a] < score[b]; });
    double q_sel = 0.0, s_sel = 0.0;
    for (int j = 0; j < r; ++j) {
      const int i = order[j];
      q_sel += std::min(p_pos[i], p_neg[i]);
      s_sel += p_pos[i] + p_neg[i];
    }
    objective = lambda * q_sel / r + (sum_s - s_sel) / (n - r);
    if (objective < best) {
      best = objective;
      best_r = r;
      best_set.assign(order.begin(), order.begin() + r);
    }
  }

  std::fill(out, out + n, SignLabel::NA);
  (void)best_r;
  for (int i : best_set)
    out[i] = p_neg[i] > p_pos[i] ? SignLabel::Minus : SignLabel::Plus;
}

double null_log_density(std::span<const double> z, double sigma) {
  double s = 0.0;
  for (double v : z) s += log_normal_pdf(v, 0.0, sigma);
  return s;
}

std::uint64_t hash_doubles(std::span<const double> v, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (double x : v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(x));
    std::memcpy(&bits, &x, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

// ---- PosteriorBackend ----

PosteriorBackend PosteriorBackend::exact_pi(const ParamVector& theta) {
  if (theta.n() > PermutationEnsemble::kDefaultExactCap)
    throw CapacityError("exact_pi: n = " + std::to_string(theta.n()) +
                        " exceeds the exact cap " +
                        std::to_string(PermutationEnsemble::kDefaultExactCap) +
                        "; use a sampled ensemble instead");
  auto engine = std::make_shared<MixtureEngine>(MixtureEngine::exact(theta));
  PosteriorBackend b;
  b.kind_ = Kind::ExactPi;
  b.theta_ = theta;
  b.ensemble_m_ = engine->ensemble_size();
  b.summary_ = [engine](std::span<const double> z, const NullSet& ns) {
    return engine->summarize(z, ns);
  };
  b.log_marginal_ = [engine](std::span<const double> z) {
    return engine->log_marginal(z);
  };
  b.draw_ = [theta](RngStream& rng, std::vector<double>& xi,
                    std::vector<double>& w) {
    xi = theta.values;
    for (int i = theta.n() - 1; i > 0; --i) {
      const auto k = rng.uniform_int(i + 1);
      std::swap(xi[i], xi[k]);
    }
    w.resize(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i)
      w[i] = xi[i] + theta.sigma * rng.normal();
  };
  return b;
}

PosteriorBackend PosteriorBackend::sampled_pi(
    const ParamVector& theta, std::shared_ptr<const PermutationEnsemble> ens) {
  if (!ens) throw std::invalid_argument("sampled_pi: null ensemble");
  if (ens->n() != theta.n())
    throw std::invalid_argument("sampled_pi: dimension mismatch");
  auto engine = std::make_shared<MixtureEngine>(
      MixtureEngine::from_ensemble(theta, *ens));
  PosteriorBackend b;
  b.kind_ = ens->mode() == EnsembleMode::Exact ? Kind::ExactPi : Kind::SampledPi;
  b.theta_ = theta;
  b.ensemble_m_ = ens->size();
  b.summary_ = [engine](std::span<const double> z, const NullSet& ns) {
    return engine->summarize(z, ns);
  };
  b.log_marginal_ = [engine](std::span<const double> z) {
    return engine->log_marginal(z);
  };
  b.draw_ = [theta, ens](RngStream& rng, std::vector<double>& xi,
                         std::vector<double>& w) {
    const auto g = rng.uniform_int(ens->size());
    auto idx = ens->member(g);
    xi.resize(theta.values.size());
    for (int i = 0; i < theta.n(); ++i) xi[i] = theta.values[idx[i]];
    w.resize(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i)
      w[i] = xi[i] + theta.sigma * rng.normal();
  };
  return b;
}

PosteriorBackend PosteriorBackend::custom(Kind kind, ParamVector theta,
                                          std::int64_t ensemble_size,
                                          SummaryFn summary,
                                          LogMarginalFn log_marginal,
                                          JointDrawFn draw) {
  PosteriorBackend b;
  b.kind_ = kind;
  b.theta_ = std::move(theta);
  b.ensemble_m_ = ensemble_size;
  b.summary_ = std::move(summary);
  b.log_marginal_ = std::move(log_marginal);
  b.draw_ = std::move(draw);
  return b;
}

std::string PosteriorBackend::mode_label() const {
  switch (kind_) {
    case Kind::ExactPi: return "exact";
    case Kind::SampledPi: return "sampled(" + std::to_string(ensemble_m_) + ")";
    case Kind::Simple: return "simple";
  }
  return "?";
}

// ---- Rules at fixed lambda ----

MtScan mt_scan(std::span<const double> q, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("mt_scan: lambda must be >= 0");
  MtScan out;
  std::vector<int> order;
  out.r_star = mt_core(q, lambda, order, &out.rho);
  return out;
}

MultiTestAction mt_rule_at_lambda(const PosteriorSummary& summary, double lambda) {
  if (lambda < 0.0)
    throw std::invalid_argument("mt_rule_at_lambda: lambda must be >= 0");
  MultiTestAction a;
  a.reject.resize(summary.n());
  std::vector<int> order;
  mt_fill(summary.q_null, lambda, a.reject.data(), order);
  return a;
}

SignAction sign_rule_at_lambda(const PosteriorSummary& summary, double lambda) {
  if (lambda < 0.0)
    throw std::invalid_argument("sign_rule_at_lambda: lambda must be >= 0");
  SignAction a;
  a.labels.resize(summary.n());
  std::vector<int> order;
  std::vector<double> score;
  sign_fill(summary.p_pos, summary.p_neg, lambda, a.labels.data(), order, score);
  return a;
}

EstimateAction selective_estimate(const PosteriorSummary& summary,
                                  const SelectionRule& selection,
                                  std::span<const double> z) {
  (void)selection;  // estimates do not depend on the selection; the loss does
  (void)z;
  EstimateAction a;
  a.values = summary.post_mean;
  return a;
}

// ---- Global test ----

double lr_statistic(const ParamVector& theta, const PermutationEnsemble& ensemble,
                    const DataVector& z) {
  std::vector<double> terms(theta.n());
  for (int i = 0; i < theta.n(); ++i)
    terms[i] = log_normal_pdf(z.values[i], 0.0, theta.sigma);
  const double num = canonical_sum(std::move(terms));
  return std::exp(num - marginal_log_density(theta, ensemble, z));
}

double GlobalTestOracle::log_lr(std::span<const double> z) const {
  const Canon c = canonicalize(backend, z);
  return null_log_density(c.zs, backend.sigma()) - backend.log_marginal(c.zs);
}

GlobalTestAction GlobalTestOracle::decide(std::span<const double> z) const {
  if (degenerate) {
    // Lambda is constant; reject with probability alpha using external
    // randomization keyed on (sorted data, calibration seed).
    const Canon c = canonicalize(backend, z);
    std::uint64_t h = hash_doubles(c.zs, calibration_seed);
    const double u = static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
    return GlobalTestAction{u < alpha};
  }
  return GlobalTestAction{log_lr(z) <= log_c};
}

GlobalTestOracle calibrate_global(const PosteriorBackend& backend, double alpha,
                                  std::int64_t draws, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("calibrate_global: alpha must be in (0,1)");
  if (draws < 1000)
    throw std::invalid_argument("calibrate_global: need draws >= 1000");

  GlobalTestOracle oracle;
  oracle.backend = backend;
  oracle.alpha = alpha;
  oracle.calibration_draws = draws;
  oracle.calibration_seed = seed;

  const int n = backend.n();
  const double sigma = backend.sigma();
  std::vector<double> stats(draws);
  parallel_chunks(draws, 1024, [&](int, std::int64_t b, std::int64_t e) {
    std::vector<double> z(n);
    for (std::int64_t j = b; j < e; ++j) {
      RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
      for (int i = 0; i < n; ++i) z[i] = sigma * rng.normal();
      stats[j] = oracle.log_lr(z);
    }
  });
  std::sort(stats.begin(), stats.end());

  if (stats.back() - stats.front() < 1e-9) {
    oracle.degenerate = true;
    oracle.log_c = stats.front();
    oracle.log_c_se = 0.0;
    return oracle;
  }

  const auto clamp_idx = [&](std::int64_t k) {
    return std::min<std::int64_t>(draws - 1, std::max<std::int64_t>(0, k));
  };
  const std::int64_t k =
      clamp_idx(static_cast<std::int64_t>(std::floor(alpha * draws)) - 1);
  oracle.log_c = stats[k];
  const double half = 1.96 * std::sqrt(alpha * (1.0 - alpha) * draws);
  const std::int64_t k_lo = clamp_idx(k - static_cast<std::int64_t>(std::ceil(half)));
  const std::int64_t k_hi = clamp_idx(k + static_cast<std::int64_t>(std::ceil(half)));
  oracle.log_c_se = (stats[k_hi] - stats[k_lo]) / (2.0 * 1.96);
  return oracle;
}

GlobalTestOracle calibrate_global(const ParamVector& theta,
                                  const PermutationEnsemble& ensemble, double alpha,
                                  std::int64_t draws, std::uint64_t seed) {
  auto backend = ensemble.mode() == EnsembleMode::Exact
                     ? PosteriorBackend::exact_pi(theta)
                     : PosteriorBackend::sampled_pi(
                           theta, std::make_shared<PermutationEnsemble>(ensemble));
  return calibrate_global(backend, alpha, draws, seed);
}

// ---- Lagrangian oracles ----

namespace {

// Cached joint draws, stored in the rule's decision space (sorted data order
// for exact mode) so the lambda scan reproduces deployed actions exactly.
struct CalibrationCache {
  int n = 0;
  std::int64_t draws = 0;
  // Fdr: q and truth-null flags. DirFdr: p_pos/p_neg and truth signs.
  std::vector<double> q;          // draws x n
  std::vector<double> p_pos, p_neg;
  std::vector<std::uint8_t> is_null;  // draws x n
  std::vector<std::int8_t> sign;      // draws x n
};

CalibrationCache build_cache(const PosteriorBackend& backend,
                             ConstrainedProblem problem, const NullSet& null_set,
                             std::int64_t draws, std::uint64_t seed,
                             CalibrationLaw law) {
  CalibrationCache cache;
  const int n = backend.n();
  cache.n = n;
  cache.draws = draws;
  const bool dir = problem == ConstrainedProblem::DirFdr;
  if (dir) {
    cache.p_pos.resize(draws * n);
    cache.p_neg.resize(draws * n);
    cache.sign.resize(draws * n);
  } else {
    cache.q.resize(draws * n);
    cache.is_null.resize(draws * n);
  }

  parallel_chunks(draws, 256, [&](int, std::int64_t b, std::int64_t e) {
    std::vector<double> xi, w, ws, xis;
    for (std::int64_t j = b; j < e; ++j) {
      RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
      if (law == CalibrationLaw::Mixture) {
        backend.draw_joint(rng, xi, w);
      } else {
        xi = backend.theta().values;
        w.resize(xi.size());
        for (std::size_t i = 0; i < xi.size(); ++i)
          w[i] = xi[i] + backend.sigma() * rng.normal();
      }
      const double* wp = w.data();
      const double* xp = xi.data();
      if (backend.canonical_decide()) {
        auto perm = sort_perm(w);
        ws.resize(n);
        xis.resize(n);
        for (int k = 0; k < n; ++k) {
          ws[k] = w[perm[k]];
          xis[k] = xi[perm[k]];
        }
        wp = ws.data();
        xp = xis.data();
      }
      const auto summary =
          backend.summarize(std::span<const double>(wp, n), null_set);
      const std::int64_t off = j * n;
      if (dir) {
        for (int i = 0; i < n; ++i) {
          cache.p_pos[off + i] = summary.p_pos[i];
          cache.p_neg[off + i] = summary.p_neg[i];
          cache.sign[off + i] = xp[i] > 0.0 ? 1 : (xp[i] < 0.0 ? -1 : 0);
        }
      } else {
        for (int i = 0; i < n; ++i) {
          cache.q[off + i] = summary.q_null[i];
          cache.is_null[off + i] = null_set.contains(xp[i]) ? 1 : 0;
        }
      }
    }
  });
  return cache;
}

// Mean and SE of the constraint functional at a given lambda over the cache.
CalibrationPoint eval_constraint(const CalibrationCache& cache,
                                 ConstrainedProblem problem, double lambda) {
  const int n = cache.n;
  double sum = 0.0, sum_sq = 0.0;
  std::vector<int> order;
  std::vector<double> score;
  std::vector<std::uint8_t> reject(n);
  std::vector<SignLabel> labels(n);

  for (std::int64_t j = 0; j < cache.draws; ++j) {
    const std::int64_t off = j * n;
    double value = 0.0;
    if (problem == ConstrainedProblem::Fdr) {
      mt_fill(std::span<const double>(cache.q.data() + off, n), lambda,
              reject.data(), order);
      int r = 0, false_r = 0;
      for (int i = 0; i < n; ++i) {
        if (reject[i]) {
          ++r;
          if (cache.is_null[off + i]) ++false_r;
        }
      }
      value = r > 0 ? static_cast<double>(false_r) / r : 0.0;
    } else {
      sign_fill(std::span<const double>(cache.p_pos.data() + off, n),
                std::span<const double>(cache.p_neg.data() + off, n), lambda,
                labels.data(), order, score);
      int calls = 0, errors = 0;
      for (int i = 0; i < n; ++i) {
        if (labels[i] == SignLabel::NA) continue;
        ++calls;
        const int s = cache.sign[off + i];
        if ((labels[i] == SignLabel::Plus && s < 0) ||
            (labels[i] == SignLabel::Minus && s > 0))
          ++errors;
      }
      value = calls > 0 ? static_cast<double>(errors) / calls : 0.0;
    }
    sum += value;
    sum_sq += value * value;
  }
  const auto ms = mean_se(sum, sum_sq, cache.draws);
  return CalibrationPoint{lambda, ms.mean, ms.se};
}

}  // namespace

MultiTestAction LagrangianOracle::decide_mt(std::span<const double> z) const {
  if (problem != ConstrainedProblem::Fdr)
    throw std::logic_error("decide_mt: oracle was calibrated for dir-FDR");
  MultiTestAction a;
  a.reject.assign(z.size(), 0);
  if (infeasible) return a;
  const Canon c = canonicalize(backend, z);
  const auto summary = backend.summarize(c.zs, null_set);
  std::vector<int> order;
  std::vector<std::uint8_t> reject(z.size());
  mt_fill(summary.q_null, lambda_star, reject.data(), order);
  a.reject = unsort(c, reject);
  return a;
}

SignAction LagrangianOracle::decide_sign(std::span<const double> z) const {
  if (problem != ConstrainedProblem::DirFdr)
    throw std::logic_error("decide_sign: oracle was calibrated for FDR");
  SignAction a;
  a.labels.assign(z.size(), SignLabel::NA);
  if (infeasible) return a;
  const Canon c = canonicalize(backend, z);
  const auto summary = backend.summarize(c.zs, null_set);
  std::vector<int> order;
  std::vector<double> score;
  std::vector<SignLabel> labels(z.size());
  sign_fill(summary.p_pos, summary.p_neg, lambda_star, labels.data(), order, score);
  a.labels = unsort(c, labels);
  return a;
}

LagrangianOracle calibrate_lambda(const PosteriorBackend& backend, double alpha,
                                  ConstrainedProblem problem, std::int64_t draws,
                                  std::uint64_t seed, const BisectionConfig& config,
                                  const NullSet& null_set, CalibrationLaw law) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("calibrate_lambda: alpha must be in (0,1)");
  if (draws < 1000)
    throw std::invalid_argument("calibrate_lambda: need draws >= 1000");
  if (!(config.lambda_lo > 0.0 && config.lambda_lo < config.lambda_hi))
    throw std::invalid_argument("calibrate_lambda: bad bracket");

  LagrangianOracle oracle;
  oracle.backend = backend;
  oracle.problem = problem;
  oracle.null_set = null_set;
  oracle.alpha = alpha;
  oracle.calibration_draws = draws;
  oracle.calibration_seed = seed;
  oracle.config = config;

  const auto cache = build_cache(backend, problem, null_set, draws, seed, law);
  auto eval = [&](double lambda) {
    auto pt = eval_constraint(cache, problem, lambda);
    oracle.trace.push_back(pt);
    return pt;
  };

  const auto at_lo = eval(config.lambda_lo);
  if (at_lo.constraint <= alpha) {
    // Constraint slack even with the weakest penalty: keep the small-lambda
    // edge (most rejections) and flag it.
    oracle.at_lower_edge = true;
    oracle.lambda_star = config.lambda_lo;
    oracle.constraint_at_star = at_lo.constraint;
    oracle.constraint_se = at_lo.se;
    return oracle;
  }
  const auto at_hi = eval(config.lambda_hi);
  if (at_hi.constraint > alpha) {
    oracle.infeasible = true;
    oracle.lambda_star = config.lambda_hi;
    oracle.constraint_at_star = at_hi.constraint;
    oracle.constraint_se = at_hi.se;
    return oracle;
  }

  double lo = config.lambda_lo;   // constraint > alpha
  double hi = config.lambda_hi;   // constraint <= alpha
  CalibrationPoint at_star = at_hi;
  for (int iter = 0; iter < config.max_iter; ++iter) {
    if (std::log(hi / lo) < 1e-9) break;
    const double mid = std::sqrt(lo * hi);
    const auto at_mid = eval(mid);
    if (at_mid.constraint > alpha) {
      lo = mid;
    } else {
      hi = mid;
      at_star = at_mid;
    }
  }
  oracle.lambda_star = hi;
  oracle.constraint_at_star = at_star.constraint;
  oracle.constraint_se = at_star.se;

  // The bisection assumes the constraint is nonincreasing in lambda; verify
  // over the trace and fall back to a grid scan if it is not.
  std::vector<CalibrationPoint> by_lambda = oracle.trace;
  std::sort(by_lambda.begin(), by_lambda.end(),
            [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  for (std::size_t i = 0; i + 1 < by_lambda.size(); ++i) {
    const auto& a = by_lambda[i];
    const auto& b = by_lambda[i + 1];
    if (b.constraint > a.constraint + 2.0 * (a.se + b.se)) {
      oracle.nonmonotone = true;
      break;
    }
  }
  if (oracle.nonmonotone) {
    double best_lambda = config.lambda_hi;
    CalibrationPoint best = at_hi;
    const int grid = std::max(2, config.fallback_grid);
    const double step =
        std::log(config.lambda_hi / config.lambda_lo) / (grid - 1);
    for (int g = 0; g < grid; ++g) {
      const double lambda = config.lambda_lo * std::exp(step * g);
      const auto pt = eval(lambda);
      if (pt.constraint <= alpha && lambda < best_lambda) {
        best_lambda = lambda;
        best = pt;
      }
    }
    oracle.lambda_star = best_lambda;
    oracle.constraint_at_star = best.constraint;
    oracle.constraint_se = best.se;
  }
  return oracle;
}

LagrangianOracle calibrate_lambda(const ParamVector& theta,
                                  const PermutationEnsemble& ensemble, double alpha,
                                  ConstrainedProblem problem, std::int64_t draws,
                                  std::uint64_t seed, const BisectionConfig& config,
                                  const NullSet& null_set) {
  auto backend = ensemble.mode() == EnsembleMode::Exact
                     ? PosteriorBackend::exact_pi(theta)
                     : PosteriorBackend::sampled_pi(
                           theta, std::make_shared<PermutationEnsemble>(ensemble));
  return calibrate_lambda(backend, alpha, problem, draws, seed, config, null_set);
}

// ---- Selective estimation ----

EstimateAction SelectiveEstimator::decide(std::span<const double> z) const {
  const Canon c = canonicalize(backend, z);
  const auto summary = backend.summarize(c.zs, null_set);
  EstimateAction a;
  a.values = unsort(c, summary.post_mean);
  return a;
}

}  // namespace pioracle
