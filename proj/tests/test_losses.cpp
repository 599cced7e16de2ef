#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "pioracle/losses.hpp"

using namespace pioracle;

namespace {

std::vector<double> random_vec(std::mt19937& gen, int n, double scale = 2.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

Permutation random_perm(std::mt19937& gen, int n) {
  Permutation p = Permutation::identity(n);
  std::shuffle(p.map.begin(), p.map.end(), gen);
  return p;
}

template <typename T>
std::vector<T> permute(const Permutation& g, const std::vector<T>& v) {
  std::vector<T> out(v.size());
  for (int i = 0; i < g.n(); ++i) out[i] = v[g.map[i]];
  return out;
}

}  // namespace

TEST_CASE("fdp basics") {
  const NullSet ns = NullSet::point_zero();
  CHECK(fdp(ParamVector({0.0, 1.0}), MultiTestAction{{0, 0}}, ns) == 0.0);
  CHECK(fdp(ParamVector({0.0, 0.0, 3.0}), MultiTestAction{{1, 0, 1}}, ns) == 0.5);
  CHECK(fdp(ParamVector({0.0, 0.0, 0.0}), MultiTestAction{{1, 1, 1}}, ns) == 1.0);
}

TEST_CASE("fnp basics") {
  const NullSet ns = NullSet::point_zero();
  CHECK(fnp(ParamVector({0.0, 1.0}), MultiTestAction{{1, 1}}, ns) == 0.0);
  CHECK(fnp(ParamVector({0.0, 3.0}), MultiTestAction{{0, 0}}, ns) == 0.5);
  CHECK(fnp(ParamVector({0.0, 0.0}), MultiTestAction{{0, 0}}, ns) == 0.0);
}

TEST_CASE("directional losses") {
  using L = SignLabel;
  CHECK(dir_fdp(ParamVector({-1.0, 2.0}), SignAction{{L::Plus, L::Plus}}) == 0.5);
  CHECK(dir_fdp(ParamVector({-1.0, 2.0}), SignAction{{L::NA, L::NA}}) == 0.0);
  CHECK(dir_fnp(ParamVector({-1.0, 2.0, 0.0}), SignAction{{L::NA, L::NA, L::NA}}) ==
        doctest::Approx(2.0 / 3));
  CHECK(dir_fdp(ParamVector({1.0, 1.0}), SignAction{{L::Plus, L::Plus}}) == 0.0);
  CHECK(dir_fnp(ParamVector({1.0, 1.0}), SignAction{{L::Plus, L::Plus}}) == 0.0);
  // weak classification: zero parameters are never directional errors
  CHECK(dir_fdp(ParamVector({0.0, 0.0}), SignAction{{L::Plus, L::Minus}}) == 0.0);
}

TEST_CASE("counts reconcile") {
  std::mt19937 gen(2);
  for (int t = 0; t < 30; ++t) {
    const int n = 1 + t % 6;
    auto theta = random_vec(gen, n);
    for (auto& v : theta)
      if (std::abs(v) < 1.0) v = 0.0;
    MultiTestAction a;
    SignAction s;
    for (int i = 0; i < n; ++i) {
      a.reject.push_back(gen() % 2);
      s.labels.push_back(static_cast<SignLabel>(gen() % 3));
    }
    const auto tc = TestingCounts::from(ParamVector(theta), a, NullSet::point_zero());
    CHECK(tc.n10 + tc.n11 + tc.n00 + tc.n01 == n);
    const auto sc = SignCounts::from(ParamVector(theta), s);
    CHECK(sc.n_plus + sc.n_minus + sc.n_na == n);
    CHECK(fdp(ParamVector(theta), a, NullSet::point_zero()) <= 1.0);
    CHECK(fnp(ParamVector(theta), a, NullSet::point_zero()) <= 1.0);
    CHECK(dir_fdp(ParamVector(theta), s) <= 1.0);
    CHECK(dir_fnp(ParamVector(theta), s) <= 1.0);
  }
}

TEST_CASE("global loss") {
  const NullSet ns = NullSet::point_zero();
  CHECK(global_loss(ParamVector({0.0, 0.0}), GlobalTestAction{false}, ns) == 0.0);
  CHECK(global_loss(ParamVector({0.0, 1.0}), GlobalTestAction{false}, ns) == 1.0);
  CHECK(global_loss(ParamVector({0.0, 1.0}), GlobalTestAction{true}, ns) == 0.0);
}

TEST_CASE("selective squared loss") {
  CHECK(selective_sq_loss(std::vector<double>{0.0, 5.0}, ParamVector({0.0, 3.0}),
                          EstimateAction{{99.0, 4.0}}, SelectionRule::arg_max()) ==
        doctest::Approx(1.0));
  const std::vector<double> z{1.0, -2.0, 0.5};
  CHECK(selective_sq_loss(z, ParamVector({1.0, -2.0, 0.5}),
                          EstimateAction{{1.0, -2.0, 0.5}}, SelectionRule::all()) ==
        0.0);
  // TopK(2) hand summation
  std::mt19937 gen(9);
  for (int t = 0; t < 10; ++t) {
    const auto zz = random_vec(gen, 4);
    const auto th = random_vec(gen, 4);
    const auto est = random_vec(gen, 4);
    const auto sel = SelectionRule::top_k(2).select(zz);
    double expect = 0.0;
    for (int i = 0; i < 4; ++i)
      if (sel.selected[i]) expect += (est[i] - th[i]) * (est[i] - th[i]);
    CHECK(selective_sq_loss(zz, ParamVector(th), EstimateAction{est},
                            SelectionRule::top_k(2)) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("selection rules") {
  const std::vector<double> z{0.3, 2.0, -1.0, 2.5};
  CHECK(SelectionRule::all().select(z).selected == std::vector<std::uint8_t>{1, 1, 1, 1});
  CHECK(SelectionRule::arg_max().select(z).selected ==
        std::vector<std::uint8_t>{0, 0, 0, 1});
  CHECK(SelectionRule::top_k(2).select(z).selected ==
        std::vector<std::uint8_t>{0, 1, 0, 1});
  CHECK_THROWS_AS(SelectionRule::top_k(0), std::invalid_argument);

  // boundary tie fitting within k: both tied values selected
  const std::vector<double> tie_fit{5.0, 5.0, 1.0};
  const auto fit = SelectionRule::top_k(2).select(tie_fit);
  CHECK(fit.selected == std::vector<std::uint8_t>{1, 1, 0});
  CHECK_FALSE(fit.degenerate);

  // boundary tie spilling over k: tied group dropped, flagged
  const std::vector<double> tie_spill{5.0, 5.0, 7.0};
  const auto spill = SelectionRule::top_k(2).select(tie_spill);
  CHECK(spill.selected == std::vector<std::uint8_t>{0, 0, 1});
  CHECK(spill.degenerate);
}

TEST_CASE("selection rules are equivariant: s(g(z)) = g(s(z))") {
  std::mt19937 gen(12);
  for (int t = 0; t < 40; ++t) {
    const int n = 2 + t % 5;
    const auto z = random_vec(gen, n);
    const auto g = random_perm(gen, n);
    const auto gz = apply_permutation(g, z);
    for (const auto& rule :
         {SelectionRule::all(), SelectionRule::arg_max(),
          SelectionRule::top_k(std::max(1, n / 2))}) {
      const auto direct = rule.select(gz).selected;
      const auto mapped = permute(g, rule.select(z).selected);
      CHECK(direct == mapped);
    }
  }
}

TEST_CASE("losses satisfy the invariance identity exactly") {
  std::mt19937 gen(14);
  for (int t = 0; t < 40; ++t) {
    const int n = 2 + t % 5;
    auto theta = random_vec(gen, n);
    if (t % 2) theta[0] = 0.0;
    const auto z = random_vec(gen, n);
    const auto g = random_perm(gen, n);

    const ParamVector tv(theta);
    const ParamVector tg(apply_permutation(g, theta));
    const auto zg = apply_permutation(g, z);
    const NullSet ns = NullSet::point_zero();

    MultiTestAction mt;
    SignAction sg;
    EstimateAction est;
    for (int i = 0; i < n; ++i) {
      mt.reject.push_back(gen() % 2);
      sg.labels.push_back(static_cast<SignLabel>(gen() % 3));
      est.values.push_back(theta[i] + 0.1 * double(i));
    }
    const MultiTestAction mt_g{permute(g, mt.reject)};
    const SignAction sg_g{permute(g, sg.labels)};
    const EstimateAction est_g{permute(g, est.values)};

    CHECK(fdp(tg, mt_g, ns) == fdp(tv, mt, ns));
    CHECK(fnp(tg, mt_g, ns) == fnp(tv, mt, ns));
    CHECK(dir_fdp(tg, sg_g) == dir_fdp(tv, sg));
    CHECK(dir_fnp(tg, sg_g) == dir_fnp(tv, sg));
    CHECK(global_loss(tg, GlobalTestAction{true}, ns) ==
          global_loss(tv, GlobalTestAction{true}, ns));
    CHECK(global_loss(tg, GlobalTestAction{false}, ns) ==
          global_loss(tv, GlobalTestAction{false}, ns));
    for (const auto& rule : {SelectionRule::all(), SelectionRule::top_k(2)}) {
      CHECK(selective_sq_loss(zg, tg, est_g, rule) ==
            selective_sq_loss(z, tv, est, rule));
    }
  }
}
