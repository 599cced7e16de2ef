#include "pioracle/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pioracle {

std::string NullSet::describe() const {
  if (is_point()) return "{" + std::to_string(lo) + "}";
  return "[" + std::to_string(lo) + "," + std::to_string(hi) + "]";
}

NullSet NullSet::interval(double lo, double hi) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("NullSet: need finite lo <= hi");
  return NullSet{lo, hi};
}

PosteriorSummary summarize(const WeightedPosterior& wp, const NullSet& null_set) {
  const int n = wp.theta.n();
  PosteriorSummary s;
  s.null_set = null_set;
  s.q_null.assign(n, 0.0);
  s.p_pos.assign(n, 0.0);
  s.p_neg.assign(n, 0.0);
  s.post_mean.assign(n, 0.0);

  const auto& theta = wp.theta.values;
  for (std::int64_t g = 0; g < wp.ensemble->size(); ++g) {
    const double w = std::exp(wp.log_weights[g]);
    auto idx = wp.ensemble->member(g);
    for (int i = 0; i < n; ++i) {
      const double v = theta[idx[i]];
      if (null_set.contains(v)) s.q_null[i] += w;
      if (v > 0.0) s.p_pos[i] += w;
      else if (v < 0.0) s.p_neg[i] += w;
      s.post_mean[i] += w * v;
    }
  }
  return s;
}

double marginal_log_density(const ParamVector& theta,
                            const PermutationEnsemble& ensemble,
                            const DataVector& z) {
  if (ensemble.n() != theta.n() || theta.n() != z.n())
    throw std::invalid_argument("marginal_log_density: dimension mismatch");
  std::vector<double> ll(ensemble.size());
  ParamVector permuted = theta;
  for (std::int64_t g = 0; g < ensemble.size(); ++g) {
    auto idx = ensemble.member(g);
    for (int i = 0; i < theta.n(); ++i)
      permuted.values[i] = theta.values[idx[i]];
    ll[g] = log_likelihood(permuted, z);
  }
  return log_sum_exp_canonical(ll) - std::log(static_cast<double>(ensemble.size()));
}

MixtureEngine MixtureEngine::exact(const ParamVector& theta) {
  MixtureEngine e;
  e.n_ = theta.n();
  e.sigma_ = theta.sigma;
  e.mode_ = EnsembleMode::Exact;

  // Distinct values with multiplicities; arrangements of the index multiset
  // in lexicographic order.
  std::vector<double> sorted = theta.values;
  std::sort(sorted.begin(), sorted.end());
  e.distinct_.clear();
  std::vector<std::uint16_t> idx;
  idx.reserve(sorted.size());
  for (double v : sorted) {
    if (e.distinct_.empty() || v != e.distinct_.back()) e.distinct_.push_back(v);
    idx.push_back(static_cast<std::uint16_t>(e.distinct_.size() - 1));
  }

  std::int64_t count = 1;
  {
    // multinomial n! / prod(c_k!)
    std::int64_t numer = 1, denom = 1, run = 1;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      numer *= static_cast<std::int64_t>(i + 1);
      run = (i > 0 && idx[i] == idx[i - 1]) ? run + 1 : 1;
      denom *= run;
    }
    count = numer / denom;
    e.ensemble_m_ = numer;
  }
  if (count > kMaxRows)
    throw CapacityError("MixtureEngine::exact: too many arrangements; use a sampled ensemble");

  e.row_idx_.reserve(count * e.n_);
  do {
    e.row_idx_.insert(e.row_idx_.end(), idx.begin(), idx.end());
  } while (std::next_permutation(idx.begin(), idx.end()));
  e.log_prior_ = -std::log(static_cast<double>(e.rows()));
  return e;
}

MixtureEngine MixtureEngine::from_ensemble(const ParamVector& theta,
                                           const PermutationEnsemble& ensemble) {
  if (ensemble.n() != theta.n())
    throw std::invalid_argument("MixtureEngine::from_ensemble: dimension mismatch");
  if (ensemble.size() > kMaxRows)
    throw CapacityError("MixtureEngine::from_ensemble: ensemble too large");
  MixtureEngine e;
  e.n_ = theta.n();
  e.sigma_ = theta.sigma;
  e.mode_ = ensemble.mode();
  e.ensemble_m_ = ensemble.size();
  e.distinct_ = theta.values;
  e.row_idx_.resize(ensemble.size() * e.n_);
  for (std::int64_t g = 0; g < ensemble.size(); ++g) {
    auto idx = ensemble.member(g);
    for (int i = 0; i < e.n_; ++i)
      e.row_idx_[g * e.n_ + i] = idx[i];
  }
  e.log_prior_ = -std::log(static_cast<double>(e.rows()));
  return e;
}

void MixtureEngine::eval_rows(std::span<const double> z, Workspace& ws) const {
  if (static_cast<int>(z.size()) != n_)
    throw std::invalid_argument("MixtureEngine: dimension mismatch");
  const int D = static_cast<int>(distinct_.size());
  ws.table.resize(static_cast<std::size_t>(n_) * D);
  for (int i = 0; i < n_; ++i) {
    for (int d = 0; d < D; ++d) {
      const double u = (z[i] - distinct_[d]) / sigma_;
      ws.table[static_cast<std::size_t>(i) * D + d] = -0.5 * u * u;
    }
  }
  const std::int64_t R = rows();
  ws.row_ll.resize(R);
  const std::uint16_t* rp = row_idx_.data();
  for (std::int64_t r = 0; r < R; ++r, rp += n_) {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      s += ws.table[static_cast<std::size_t>(i) * D + rp[i]];
    ws.row_ll[r] = s;
  }
}

PosteriorSummary MixtureEngine::summarize(std::span<const double> z,
                                          const NullSet& null_set,
                                          Workspace* ws) const {
  return summarize_with_density(z, null_set, nullptr, ws);
}

double MixtureEngine::log_marginal(std::span<const double> z, Workspace* ws) const {
  Workspace local;
  Workspace& w = ws ? *ws : local;
  eval_rows(z, w);
  const double lse = log_sum_exp(w.row_ll);
  const double constant = -0.5 * n_ * kLogTwoPi - n_ * std::log(sigma_);
  return log_prior_ + constant + lse;
}

PosteriorSummary MixtureEngine::summarize_with_density(std::span<const double> z,
                                                       const NullSet& null_set,
                                                       double* log_marginal_out,
                                                       Workspace* ws) const {
  Workspace local;
  Workspace& w = ws ? *ws : local;
  eval_rows(z, w);
  const std::int64_t R = rows();
  const double lse = log_sum_exp(w.row_ll);
  w.weights.resize(R);
  for (std::int64_t r = 0; r < R; ++r)
    w.weights[r] = std::exp(w.row_ll[r] - lse);

  if (log_marginal_out) {
    const double constant = -0.5 * n_ * kLogTwoPi - n_ * std::log(sigma_);
    *log_marginal_out = log_prior_ + constant + lse;
  }

  const int D = static_cast<int>(distinct_.size());
  std::vector<char> is_null(D), is_pos(D), is_neg(D);
  for (int d = 0; d < D; ++d) {
    is_null[d] = null_set.contains(distinct_[d]);
    is_pos[d] = distinct_[d] > 0.0;
    is_neg[d] = distinct_[d] < 0.0;
  }

  PosteriorSummary s;
  s.null_set = null_set;
  s.q_null.assign(n_, 0.0);
  s.p_pos.assign(n_, 0.0);
  s.p_neg.assign(n_, 0.0);
  s.post_mean.assign(n_, 0.0);
  const std::uint16_t* rp = row_idx_.data();
  for (std::int64_t r = 0; r < R; ++r, rp += n_) {
    const double wt = w.weights[r];
    for (int i = 0; i < n_; ++i) {
      const int d = rp[i];
      if (is_null[d]) s.q_null[i] += wt;
      if (is_pos[d]) s.p_pos[i] += wt;
      else if (is_neg[d]) s.p_neg[i] += wt;
      s.post_mean[i] += wt * distinct_[d];
    }
  }
  return s;
}

}  // namespace pioracle
