#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracle_brute.hpp"
#include "pioracle/permutation_engine.hpp"

using namespace pioracle;

TEST_CASE("enumerate_exact sizes and order") {
  const auto e1 = PermutationEnsemble::enumerate_exact(1);
  CHECK(e1.size() == 1);
  CHECK(e1.member(0)[0] == 0);

  const auto e3 = PermutationEnsemble::enumerate_exact(3);
  CHECK(e3.size() == 6);
  std::set<std::vector<std::uint8_t>> members;
  for (std::int64_t g = 0; g < e3.size(); ++g) {
    auto m = e3.member(g);
    members.insert(std::vector<std::uint8_t>(m.begin(), m.end()));
  }
  CHECK(members.size() == 6);
  // lexicographic: first is identity, last is the reversal
  CHECK(e3.member_permutation(0).map == std::vector<int>{0, 1, 2});
  CHECK(e3.member_permutation(5).map == std::vector<int>{2, 1, 0});

  CHECK(PermutationEnsemble::enumerate_exact(8).size() == 40320);
}

TEST_CASE("enumerate_exact capacity error") {
  CHECK_THROWS_AS(PermutationEnsemble::enumerate_exact(11), CapacityError);
  try {
    PermutationEnsemble::enumerate_exact(11);
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("sampled") != std::string::npos);
  }
  // configurable cap
  CHECK_THROWS_AS(PermutationEnsemble::enumerate_exact(5, 4), CapacityError);
  CHECK_NOTHROW(PermutationEnsemble::enumerate_exact(5, 5));
}

TEST_CASE("sample_ensemble determinism and validity") {
  const auto a = PermutationEnsemble::sample(5, 50, 7);
  const auto b = PermutationEnsemble::sample(5, 50, 7);
  for (std::int64_t g = 0; g < a.size(); ++g) {
    auto ma = a.member(g);
    auto mb = b.member(g);
    CHECK(std::equal(ma.begin(), ma.end(), mb.begin()));
    CHECK(a.member_permutation(g).valid());
  }
  const auto single = PermutationEnsemble::sample(5, 1, 3);
  CHECK(single.member_permutation(0).valid());
}

TEST_CASE("sample_ensemble is uniform: identity frequency at n = 2") {
  const auto e = PermutationEnsemble::sample(2, 10000, 123);
  std::int64_t identity = 0;
  for (std::int64_t g = 0; g < e.size(); ++g)
    if (e.member(g)[0] == 0) ++identity;
  const double freq = double(identity) / double(e.size());
  CHECK(std::abs(freq - 0.5) < 0.02);
}

TEST_CASE("posterior_weights: tied theta gives uniform weights") {
  const auto e = PermutationEnsemble::enumerate_exact(3);
  const auto wp = posterior_weights(e, ParamVector({1.0, 1.0, 1.0}),
                                    DataVector({0.3, -0.2, 5.0}));
  for (double lw : wp.log_weights)
    CHECK(std::exp(lw) == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("posterior_weights: the (0,2) instance") {
  const auto e = PermutationEnsemble::enumerate_exact(2);
  const auto wp =
      posterior_weights(e, ParamVector({0.0, 2.0}), DataVector({0.0, 2.0}));
  const double w_id = std::exp(wp.log_weights[0]);
  const double w_swap = std::exp(wp.log_weights[1]);
  CHECK(w_id == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))).epsilon(1e-12));
  CHECK(w_id == doctest::Approx(0.982014).epsilon(1e-6));
  CHECK(w_swap == doctest::Approx(0.017986).epsilon(1e-4));
  CHECK(w_id + w_swap == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior_weights match brute force on random instances") {
  std::mt19937 gen(17);
  std::normal_distribution<double> d(0.0, 1.5);
  for (int t = 0; t < 30; ++t) {
    const int n = 2 + t % 3;
    std::vector<double> theta(n), z(n);
    for (auto& x : theta) x = d(gen);
    for (auto& x : z) x = d(gen);
    const auto e = PermutationEnsemble::enumerate_exact(n);
    const auto wp = posterior_weights(e, ParamVector(theta), DataVector(z));
    const auto ref = brute::posterior(theta, z, 1.0);
    REQUIRE(wp.log_weights.size() == ref.weights.size());
    for (std::size_t g = 0; g < ref.weights.size(); ++g) {
      // library members are lexicographic; brute recursion is lexicographic too
      CHECK(std::exp(wp.log_weights[g]) ==
            doctest::Approx(ref.weights[g]).epsilon(1e-10));
    }
  }
}

TEST_CASE("weights normalize to one") {
  std::mt19937 gen(23);
  std::normal_distribution<double> d(0.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 5;
    std::vector<double> theta(n), z(n);
    for (auto& x : theta) x = d(gen);
    for (auto& x : z) x = d(gen);
    const auto e = t % 2 == 0 ? PermutationEnsemble::enumerate_exact(n)
                              : PermutationEnsemble::sample(n, 64, t);
    const auto wp = posterior_weights(e, ParamVector(theta), DataVector(z));
    CHECK(log_sum_exp(wp.log_weights) == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("equivariance: jointly relabeled instances carry the same weight multiset") {
  std::mt19937 gen(29);
  std::normal_distribution<double> d(0.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 4;
    std::vector<double> theta(n), z(n);
    for (auto& x : theta) x = d(gen);
    for (auto& x : z) x = d(gen);
    Permutation h = Permutation::identity(n);
    std::shuffle(h.map.begin(), h.map.end(), gen);

    const auto e = PermutationEnsemble::enumerate_exact(n);
    auto w1 = posterior_weights(e, ParamVector(theta), DataVector(z)).log_weights;
    auto w2 = posterior_weights(e, ParamVector(apply_permutation(h, theta)),
                                DataVector(apply_permutation(h, z)))
                  .log_weights;
    std::sort(w1.begin(), w1.end());
    std::sort(w2.begin(), w2.end());
    CHECK(w1 == w2);
  }
}

TEST_CASE("label symmetry: members equal up to tied coordinates share weight") {
  const auto e = PermutationEnsemble::enumerate_exact(3);
  const ParamVector theta({1.0, 1.0, 2.0});
  const DataVector z({0.4, 1.3, 2.2});
  const auto wp = posterior_weights(e, theta, z);
  // members 0 = (0,1,2) and 2 = (1,0,2) produce the same arrangement of theta
  const auto arrangement = [&](std::int64_t g) {
    auto idx = e.member(g);
    std::vector<double> v(theta.n());
    for (int i = 0; i < theta.n(); ++i) v[i] = theta.values[idx[i]];
    return v;
  };
  for (std::int64_t g1 = 0; g1 < e.size(); ++g1) {
    for (std::int64_t g2 = g1 + 1; g2 < e.size(); ++g2) {
      if (arrangement(g1) == arrangement(g2))
        CHECK(wp.log_weights[g1] == doctest::Approx(wp.log_weights[g2]).epsilon(1e-13));
    }
  }
}
