#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pioracle/risk.hpp"

using namespace pioracle;

TEST_CASE("estimate_risk of the truth-revealing estimator is exactly zero") {
  const ParamVector theta({0.4, -1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  EstRule rule = [&theta](std::span<const double>) {
    return EstimateAction{theta.values};
  };
  const auto r = estimate_risk(theta, rule, spec, 5000, 1);
  CHECK(r.estimate == 0.0);
  CHECK(r.std_error == 0.0);
}

TEST_CASE("identity estimator risk is n sigma^2") {
  const ParamVector theta({0.5, -0.5, 1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto r = estimate_risk(theta, identity_rule(), spec, 40000, 7);
  CHECK(std::abs(r.estimate - 4.0) < 3.0 * r.std_error + 1e-9);
  CHECK(r.side_channels.at("avg_selected").estimate == 4.0);
}

TEST_CASE("risk reports are bit-reproducible") {
  const ParamVector theta({0.0, 1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto a = estimate_risk(theta, james_stein_rule(3, 1.0), spec, 4000, 9);
  const auto b = estimate_risk(theta, james_stein_rule(3, 1.0), spec, 4000, 9);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
  for (const auto& [k, v] : a.side_channels) {
    CHECK(b.side_channels.at(k).estimate == v.estimate);
  }
}

TEST_CASE("BH step-up on the worked p-values") {
  // p = (0.001, 0.8, 0.9) at alpha = 0.05: only the first survives
  const double s2 = std::sqrt(2.0);
  auto z_for_p = [&](double p) { return normal_quantile(1.0 - p / 2) * 1.0; };
  (void)s2;
  const std::vector<double> z{z_for_p(0.001), z_for_p(0.8), z_for_p(0.9)};
  const auto a = bh_rule(0.05, 1.0)(z);
  CHECK(a.reject == std::vector<std::uint8_t>{1, 0, 0});
}

TEST_CASE("BH respects the step-up structure") {
  // p = (0.01, 0.04, 0.9) at alpha = 0.1: 0.04 <= 0.1*2/3, so two rejections
  const auto z_for_p = [](double p) { return normal_quantile(1.0 - p / 2); };
  const std::vector<double> z{z_for_p(0.01), z_for_p(0.04), z_for_p(0.9)};
  const auto a = bh_rule(0.1, 1.0)(z);
  CHECK(a.reject == std::vector<std::uint8_t>{1, 1, 0});
}

TEST_CASE("chi-square test holds its level") {
  const int n = 3;
  const ParamVector null_theta(std::vector<double>(n, 0.0));
  ProblemSpec spec;
  spec.problem = Problem::Global;
  const auto r =
      estimate_risk(null_theta, chi_square_rule(n, 0.05, 1.0), spec, 20000, 3);
  const double rate = r.side_channels.at("rejection_rate").estimate;
  CHECK(rate > 0.04);
  CHECK(rate < 0.06);
}

TEST_CASE("oracle global test is at least as powerful as chi-square at n = 3") {
  const ParamVector theta({2.2, 0.0, 0.0});
  ProblemSpec spec;
  spec.problem = Problem::Global;
  spec.alpha = 0.05;
  const auto backend = PosteriorBackend::exact_pi(theta);
  const auto rules = build_oracle_rules(backend, spec, 50000, 19);
  // loss is the Type II indicator; both tests run on common draws
  const auto cmp = paired_risk(theta, rules.global, chi_square_rule(3, 0.05, 1.0),
                               spec, 20000, 23);
  CHECK(cmp.diff <= 2.0 * cmp.diff_se);
}

TEST_CASE("James-Stein requires n >= 3") {
  CHECK_THROWS_AS(james_stein_rule(2, 1.0), std::invalid_argument);
  CHECK_NOTHROW(james_stein_rule(3, 1.0));
}

TEST_CASE("baseline rules are permutation equivariant") {
  std::mt19937 gen(11);
  std::normal_distribution<double> d(0.0, 2.0);
  for (int t = 0; t < 10; ++t) {
    const int n = 3 + t % 3;
    std::vector<double> z(n);
    for (auto& v : z) v = d(gen);
    Permutation g = Permutation::identity(n);
    std::shuffle(g.map.begin(), g.map.end(), gen);
    const auto gz = apply_permutation(g, z);

    const auto bh = bh_rule(0.1, 1.0);
    const auto bh_z = bh(z);
    const auto bh_gz = bh(gz);
    const auto js = james_stein_rule(n, 1.0);
    const auto js_z = js(z);
    const auto js_gz = js(gz);
    const auto ns = naive_sign_rule(1.96, 1.0);
    const auto ns_z = ns(z);
    const auto ns_gz = ns(gz);
    for (int i = 0; i < n; ++i) {
      CHECK(bh_gz.reject[i] == bh_z.reject[g.map[i]]);
      CHECK(js_gz.values[i] == js_z.values[g.map[i]]);
      CHECK(ns_gz.labels[i] == ns_z.labels[g.map[i]]);
    }
    const auto cs = chi_square_rule(n, 0.05, 1.0);
    CHECK(cs(z).reject == cs(gz).reject);
  }
}

TEST_CASE("subset bound with the full group recovers the exact oracle") {
  const ParamVector theta({0.0, 1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto lower = subset_lower_bound(theta, 6, spec, 20000, 5, 2000);
  CHECK(lower.ensemble_mode == "exact");
  CHECK(lower.bound_direction == BoundDirection::LowerBound);
  const auto exact = exact_oracle_risk(theta, spec, 20000, 5, 2000);
  CHECK(std::abs(lower.estimate - exact.estimate) <
        2.0 * (lower.std_error + exact.std_error));
}

TEST_CASE("sampled subset bound stays below the exact risk") {
  std::mt19937 gen(13);
  std::normal_distribution<double> d(0.0, 2.0);
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> th(3);
    for (auto& v : th) v = d(gen);
    const ParamVector theta(th);
    const auto lower = subset_lower_bound(theta, 2, spec, 6000, 100 + t, 2000);
    const auto exact = exact_oracle_risk(theta, spec, 6000, 100 + t, 2000);
    CHECK(lower.estimate <=
          exact.estimate + 2.0 * (lower.std_error + exact.std_error));
  }
}

TEST_CASE("no ordering is asserted between subset bounds at different m") {
  const ParamVector theta({0.0, 1.0, -1.5});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto small = subset_lower_bound(theta, 2, spec, 4000, 55, 2000);
  const auto large = subset_lower_bound(theta, 4, spec, 4000, 55, 2000);
  CHECK(std::isfinite(small.estimate));
  CHECK(std::isfinite(large.estimate));
  CHECK(small.bound_direction == BoundDirection::LowerBound);
  CHECK(large.bound_direction == BoundDirection::LowerBound);
}

TEST_CASE("upper approximation with the full group recovers the exact risk") {
  const ParamVector theta({0.0, 1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto upper = mc_upper_approx(theta, 6, spec, 20000, 5, 2000);
  CHECK(upper.ensemble_mode == "exact");
  CHECK(upper.bound_direction == BoundDirection::UpperApprox);
  const auto exact = exact_oracle_risk(theta, spec, 20000, 6, 2000);
  CHECK(std::abs(upper.estimate - exact.estimate) <
        2.0 * (upper.std_error + exact.std_error));
}

TEST_CASE("upper approximation tightens with m (exploratory)") {
  const ParamVector theta({0.0, 0.0, 1.0, -1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  double prev = 1e300;
  for (const std::int64_t m : {6, 60, 600}) {
    const auto upper = mc_upper_approx(theta, m, spec, 10000, 7, 2000);
    MESSAGE("m=", m, " upper=", upper.estimate, " se=", upper.std_error);
    // trend only; noise allowed, never a hard gate
    CHECK(upper.estimate <= prev + 4.0 * upper.std_error + 0.25);
    prev = upper.estimate;
  }
}

TEST_CASE("sign oracle dominates the naive sign rule when it is feasible") {
  const ParamVector theta({0.0, 0.0, -1.0, -1.5, 1.0, 1.5});
  ProblemSpec spec;
  spec.problem = Problem::Sign;
  spec.alpha = 0.1;
  const auto backend = PosteriorBackend::exact_pi(theta);
  const auto rules = build_oracle_rules(backend, spec, 20000, 3);
  const auto naive = naive_sign_rule(normal_quantile(1.0 - spec.alpha / 2), 1.0);
  const auto cmp = paired_risk(theta, rules.sign, naive, spec, 20000, 41);
  const auto naive_dirfdr = cmp.b.side_channels.at("dir_fdr");
  // the comparison only counts when the competitor meets the constraint
  if (naive_dirfdr.estimate <= spec.alpha + 2.0 * naive_dirfdr.std_error) {
    CHECK(cmp.diff <= 2.0 * cmp.diff_se);
  } else {
    MESSAGE("naive rule infeasible at this theta: dir-FDR = ",
            naive_dirfdr.estimate);
  }
}

TEST_CASE("noise scale propagates through risks and oracles") {
  const ParamVector theta({0.0, 1.0, -2.0, 3.0}, 2.0);
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto rid = estimate_risk(theta, identity_rule(), spec, 40000, 3);
  CHECK(std::abs(rid.estimate - 16.0) < 3.0 * rid.std_error + 1e-9);
  const auto backend = PosteriorBackend::exact_pi(theta);
  const auto rules = build_oracle_rules(backend, spec, 1000, 3);
  const auto cmp = paired_risk(theta, rules.est, identity_rule(), spec, 20000, 5);
  CHECK(cmp.diff <= 2.0 * cmp.diff_se);
}

TEST_CASE("risk estimates are identical across thread counts") {
  const ParamVector theta({0.0, 0.5, 1.5, 2.5});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto backend = PosteriorBackend::exact_pi(theta);
  const auto rules = build_oracle_rules(backend, spec, 1000, 3);

  setenv("PI_ORACLE_THREADS", "1", 1);
  const auto single = estimate_risk(theta, rules.est, spec, 6000, 17);
  setenv("PI_ORACLE_THREADS", "2", 1);
  const auto dual = estimate_risk(theta, rules.est, spec, 6000, 17);
  unsetenv("PI_ORACLE_THREADS");
  CHECK(single.estimate == dual.estimate);
  CHECK(single.std_error == dual.std_error);
}

TEST_CASE("sandwich at n = 4 for estimation") {
  const ParamVector theta({0.0, 0.5, -1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto lower = subset_lower_bound(theta, 8, spec, 20000, 21, 4000);
  const auto exact = exact_oracle_risk(theta, spec, 20000, 21, 4000);
  const auto upper = mc_upper_approx(theta, 8, spec, 20000, 21, 4000);
  CHECK(lower.estimate <= exact.estimate + 2.0 * (lower.std_error + exact.std_error));
  CHECK(exact.estimate <= upper.estimate + 2.0 * (exact.std_error + upper.std_error));
  CHECK(upper.bound_direction == BoundDirection::UpperApprox);
}

TEST_CASE("oracle dominates the identity estimator") {
  const ParamVector theta({0.0, 0.0, 1.0, 2.0});
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto backend = PosteriorBackend::exact_pi(theta);
  const auto rules = build_oracle_rules(backend, spec, 2000, 3);
  const auto cmp = paired_risk(theta, rules.est, identity_rule(), spec, 20000, 31);
  CHECK(cmp.diff <= 2.0 * cmp.diff_se);  // oracle - identity <= noise
}

TEST_CASE("oracle risk is constant on the orbit") {
  std::mt19937 gen(17);
  const std::vector<double> th{0.0, 1.2, -0.7, 2.0};
  const ParamVector theta(th);
  ProblemSpec spec;
  spec.problem = Problem::Estimate;
  const auto backend = PosteriorBackend::exact_pi(theta);
  const auto rules = build_oracle_rules(backend, spec, 2000, 3);
  for (int t = 0; t < 3; ++t) {
    Permutation g = Permutation::identity(4);
    std::shuffle(g.map.begin(), g.map.end(), gen);
    const ParamVector theta_g(apply_permutation(g, th));
    const auto r1 = estimate_risk(theta, rules.est, spec, 10000, 400 + t);
    const auto r2 = estimate_risk(theta_g, rules.est, spec, 10000, 900 + t);
    CHECK(std::abs(r1.estimate - r2.estimate) <
          2.0 * (r1.std_error + r2.std_error) + 1e-12);
  }
}
