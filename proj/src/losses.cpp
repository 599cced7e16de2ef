#include "pioracle/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pioracle {

std::int64_t MultiTestAction::rejections() const {
  std::int64_t r = 0;
  for (auto b : reject) r += b ? 1 : 0;
  return r;
}

std::int64_t SignAction::classified() const {
  std::int64_t r = 0;
  for (auto l : labels) r += l != SignLabel::NA ? 1 : 0;
  return r;
}

TestingCounts TestingCounts::from(const ParamVector& truth,
                                  const MultiTestAction& a,
                                  const NullSet& null_set) {
  if (truth.n() != a.n())
    throw std::invalid_argument("TestingCounts: dimension mismatch");
  TestingCounts c;
  for (int i = 0; i < truth.n(); ++i) {
    const bool is_null = null_set.contains(truth.values[i]);
    if (a.reject[i]) {
      (is_null ? c.n10 : c.n11)++;
    } else {
      (is_null ? c.n00 : c.n01)++;
    }
  }
  return c;
}

SignCounts SignCounts::from(const ParamVector& truth, const SignAction& a) {
  if (truth.n() != a.n())
    throw std::invalid_argument("SignCounts: dimension mismatch");
  SignCounts c;
  for (int i = 0; i < truth.n(); ++i) {
    const double t = truth.values[i];
    switch (a.labels[i]) {
      case SignLabel::Plus:
        c.n_plus++;
        if (t < 0.0) c.n_plus_minus++;
        break;
      case SignLabel::Minus:
        c.n_minus++;
        if (t > 0.0) c.n_minus_plus++;
        break;
      case SignLabel::NA:
        c.n_na++;
        if (t > 0.0) c.n_na_plus++;
        else if (t < 0.0) c.n_na_minus++;
        break;
    }
  }
  return c;
}

SelectionRule SelectionRule::top_k(int k) {
  if (k < 1) throw std::invalid_argument("SelectionRule::top_k: k must be >= 1");
  return SelectionRule(Kind::TopK, k);
}

std::string SelectionRule::describe() const {
  switch (kind_) {
    case Kind::All: return "all";
    case Kind::ArgMax: return "argmax";
    case Kind::TopK: return "topk:" + std::to_string(k_);
  }
  return "?";
}

std::int64_t SelectionRule::Selection::count() const {
  std::int64_t c = 0;
  for (auto b : selected) c += b ? 1 : 0;
  return c;
}

SelectionRule::Selection SelectionRule::select(std::span<const double> z) const {
  const int n = static_cast<int>(z.size());
  Selection out;
  out.selected.assign(n, 0);
  if (kind_ == Kind::All) {
    std::fill(out.selected.begin(), out.selected.end(), 1);
    return out;
  }
  const int k = std::min(k_, n);
  // k-th largest value and the size of its tied group.
  std::vector<double> vals(z.begin(), z.end());
  std::nth_element(vals.begin(), vals.begin() + (k - 1), vals.end(),
                   std::greater<double>());
  const double kth = vals[k - 1];
  int greater = 0, tied = 0;
  for (double v : z) {
    if (v > kth) ++greater;
    else if (v == kth) ++tied;
  }
  if (greater + tied <= k) {
    for (int i = 0; i < n; ++i)
      if (z[i] >= kth) out.selected[i] = 1;
  } else {
    // Tie spills over the boundary: select only the strictly-greater values
    // and flag the instance.
    for (int i = 0; i < n; ++i)
      if (z[i] > kth) out.selected[i] = 1;
    out.degenerate = true;
  }
  return out;
}

double fdp(const ParamVector& truth, const MultiTestAction& a, const NullSet& null_set) {
  const auto c = TestingCounts::from(truth, a, null_set);
  const std::int64_t denom = c.n10 + c.n11;
  return denom == 0 ? 0.0 : static_cast<double>(c.n10) / static_cast<double>(denom);
}

double fnp(const ParamVector& truth, const MultiTestAction& a, const NullSet& null_set) {
  const auto c = TestingCounts::from(truth, a, null_set);
  const std::int64_t denom = c.n00 + c.n01;
  return denom == 0 ? 0.0 : static_cast<double>(c.n01) / static_cast<double>(denom);
}

double dir_fdp(const ParamVector& truth, const SignAction& a) {
  const auto c = SignCounts::from(truth, a);
  const std::int64_t denom = c.n_plus + c.n_minus;
  return denom == 0 ? 0.0
                    : static_cast<double>(c.n_plus_minus + c.n_minus_plus) /
                          static_cast<double>(denom);
}

double dir_fnp(const ParamVector& truth, const SignAction& a) {
  const auto c = SignCounts::from(truth, a);
  return c.n_na == 0 ? 0.0
                     : static_cast<double>(c.n_na_plus + c.n_na_minus) /
                           static_cast<double>(c.n_na);
}

double selective_sq_loss(std::span<const double> z, const ParamVector& truth,
                         const EstimateAction& a, const SelectionRule& s) {
  if (static_cast<int>(z.size()) != truth.n() || truth.n() != a.n())
    throw std::invalid_argument("selective_sq_loss: dimension mismatch");
  const auto sel = s.select(z);
  std::vector<double> terms;
  terms.reserve(z.size());
  for (int i = 0; i < truth.n(); ++i) {
    if (!sel.selected[i]) continue;
    const double d = a.values[i] - truth.values[i];
    terms.push_back(d * d);
  }
  return canonical_sum(std::move(terms));
}

double global_loss(const ParamVector& truth, const GlobalTestAction& a,
                   const NullSet& null_set) {
  if (a.reject) return 0.0;
  for (double t : truth.values)
    if (!null_set.contains(t)) return 1.0;
  return 0.0;
}

}  // namespace pioracle
