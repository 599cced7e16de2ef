#include "pioracle/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pioracle {

ParamVector::ParamVector(std::vector<double> v, double s)
    : values(std::move(v)), sigma(s) {
  if (values.empty()) throw std::invalid_argument("ParamVector: n must be >= 1");
  for (double x : values) {
    if (!std::isfinite(x))
      throw std::invalid_argument("ParamVector: values must be finite");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("ParamVector: sigma must be positive");
}

bool Permutation::valid() const {
  const int m = n();
  std::vector<char> seen(m, 0);
  for (int v : map) {
    if (v < 0 || v >= m || seen[v]) return false;
    seen[v] = 1;
  }
  return m > 0;
}

Permutation Permutation::inverse() const {
  Permutation out;
  out.map.resize(map.size());
  for (int i = 0; i < n(); ++i) out.map[map[i]] = i;
  return out;
}

Permutation Permutation::identity(int n) {
  Permutation p;
  p.map.resize(n);
  for (int i = 0; i < n; ++i) p.map[i] = i;
  return p;
}

Permutation compose(const Permutation& g, const Permutation& h) {
  if (g.n() != h.n())
    throw std::invalid_argument("compose: size mismatch");
  Permutation out;
  out.map.resize(g.map.size());
  // apply(compose(g,h), u)[i] = apply(g, apply(h, u))[i] = u[h.map[g.map[i]]]
  for (int i = 0; i < g.n(); ++i) out.map[i] = h.map[g.map[i]];
  return out;
}

std::vector<double> apply_permutation(const Permutation& g,
                                      std::span<const double> u) {
  if (static_cast<std::size_t>(g.n()) != u.size())
    throw std::invalid_argument("apply_permutation: dimension mismatch");
  std::vector<double> out(u.size());
  for (int i = 0; i < g.n(); ++i) out[i] = u[g.map[i]];
  return out;
}

double log_likelihood(const ParamVector& theta, const DataVector& z) {
  if (theta.n() != z.n())
    throw std::invalid_argument("log_likelihood: dimension mismatch");
  std::vector<double> terms(theta.n());
  for (int i = 0; i < theta.n(); ++i)
    terms[i] = log_normal_pdf(z.values[i], theta.values[i], theta.sigma);
  return canonical_sum(std::move(terms));
}

std::vector<DataVector> sample_data(const ParamVector& theta,
                                    std::uint64_t seed, std::int64_t count) {
  if (count < 1) throw std::invalid_argument("sample_data: count must be >= 1");
  std::vector<DataVector> out;
  out.reserve(count);
  std::vector<double> buf;
  for (std::int64_t j = 0; j < count; ++j) {
    sample_data_into(theta, seed, j, buf);
    out.emplace_back(buf);
  }
  return out;
}

void sample_data_into(const ParamVector& theta, std::uint64_t seed,
                      std::int64_t stream, std::vector<double>& out) {
  RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(stream)));
  out.resize(theta.values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = theta.values[i] + theta.sigma * rng.normal();
}

}  // namespace pioracle
