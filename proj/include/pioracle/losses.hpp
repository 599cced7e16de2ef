#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pioracle/model.hpp"
#include "pioracle/posterior.hpp"

namespace pioracle {

struct GlobalTestAction {
  bool reject = false;
};

struct MultiTestAction {
  std::vector<std::uint8_t> reject;  // 1 = reject H_{0i}
  int n() const { return static_cast<int>(reject.size()); }
  std::int64_t rejections() const;
};

enum class SignLabel : std::uint8_t { Plus, Minus, NA };

struct SignAction {
  std::vector<SignLabel> labels;
  int n() const { return static_cast<int>(labels.size()); }
  std::int64_t classified() const;
};

struct EstimateAction {
  std::vector<double> values;
  int n() const { return static_cast<int>(values.size()); }
};

// Testing confusion counts N_{action,truth}.
struct TestingCounts {
  std::int64_t n10 = 0;  // rejected, truth null
  std::int64_t n11 = 0;  // rejected, truth non-null
  std::int64_t n00 = 0;  // kept, truth null
  std::int64_t n01 = 0;  // kept, truth non-null

  static TestingCounts from(const ParamVector& truth, const MultiTestAction& a,
                            const NullSet& null_set);
};

// Directional confusion counts for sign classification.
struct SignCounts {
  std::int64_t n_plus_minus = 0;  // "+" on theta < 0
  std::int64_t n_minus_plus = 0;  // "-" on theta > 0
  std::int64_t n_na_plus = 0;     // NA on theta > 0
  std::int64_t n_na_minus = 0;    // NA on theta < 0
  std::int64_t n_plus = 0;
  std::int64_t n_minus = 0;
  std::int64_t n_na = 0;

  static SignCounts from(const ParamVector& truth, const SignAction& a);
};

// Selection s(z) with the equivariance contract s(g(z)) = g(s(z)).
// Boundary ties in TopK are selected jointly only when the whole tied group
// fits within k; otherwise the group is dropped and the selection is flagged
// degenerate (data ties have probability zero under the model).
class SelectionRule {
 public:
  enum class Kind { All, ArgMax, TopK };

  static SelectionRule all() { return SelectionRule(Kind::All, 0); }
  static SelectionRule arg_max() { return SelectionRule(Kind::ArgMax, 1); }
  static SelectionRule top_k(int k);

  Kind kind() const { return kind_; }
  int k() const { return k_; }
  std::string describe() const;

  struct Selection {
    std::vector<std::uint8_t> selected;
    bool degenerate = false;
    std::int64_t count() const;
  };
  Selection select(std::span<const double> z) const;

 private:
  SelectionRule(Kind kind, int k) : kind_(kind), k_(k) {}
  Kind kind_;
  int k_;
};

// All ratio losses use the 0/0 == 0 convention.
double fdp(const ParamVector& truth, const MultiTestAction& a, const NullSet& null_set);
double fnp(const ParamVector& truth, const MultiTestAction& a, const NullSet& null_set);
double dir_fdp(const ParamVector& truth, const SignAction& a);
double dir_fnp(const ParamVector& truth, const SignAction& a);

// sum_i s_i(z) (a_i - theta_i)^2, summed in a canonical order so the value is
// invariant under joint permutation of (z, truth, a).
double selective_sq_loss(std::span<const double> z, const ParamVector& truth,
                         const EstimateAction& a, const SelectionRule& s);

// 1 iff theta has a coordinate outside T0 and the test kept the null.
double global_loss(const ParamVector& truth, const GlobalTestAction& a,
                   const NullSet& null_set);

}  // namespace pioracle
