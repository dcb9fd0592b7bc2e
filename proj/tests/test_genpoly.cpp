#include "sep/genpoly.hpp"

#include <cmath>
#include <complex>

#include "doctest.h"
#include "sep/rng.hpp"

using namespace sep;
using namespace sep::genpoly;

namespace {

// Root-counting oracle for real-rootedness: normalized long-double Sturm
// sequence. Independent of the companion-matrix route; counts distinct real
// roots in (-X, X).
using LD = long double;

void sturm_normalize(std::vector<LD>& p) {
  while (p.size() > 1 && std::abs(p.back()) < 1e-280L) p.pop_back();
  LD mx = 0;
  for (LD c : p) mx = std::max(mx, std::abs(c));
  if (mx > 0)
    for (LD& c : p) c /= mx;
}

std::vector<LD> sturm_mod(std::vector<LD> a, const std::vector<LD>& b) {
  while (a.size() >= b.size() && !a.empty()) {
    const LD f = a.back() / b.back();
    const std::size_t off = a.size() - b.size();
    for (std::size_t i = 0; i < b.size(); ++i) a[off + i] -= f * b[i];
    a.pop_back();
    while (!a.empty() && std::abs(a.back()) < 1e-280L) a.pop_back();
  }
  return a;
}

int sturm_real_root_count(const Eigen::VectorXd& coeffs) {
  std::vector<LD> p0(coeffs.data(), coeffs.data() + coeffs.size());
  sturm_normalize(p0);
  if (p0.size() <= 1) return 0;
  std::vector<LD> p1(p0.size() - 1);
  for (std::size_t k = 1; k < p0.size(); ++k)
    p1[k - 1] = static_cast<LD>(k) * p0[k];
  sturm_normalize(p1);

  std::vector<std::vector<LD>> chain{p0, p1};
  while (chain.back().size() > 1) {
    std::vector<LD> rem = sturm_mod(chain[chain.size() - 2], chain.back());
    if (rem.empty()) break;
    for (LD& c : rem) c = -c;
    sturm_normalize(rem);
    chain.push_back(std::move(rem));
  }

  auto sign_changes_at = [&](LD x) {
    int changes = 0, prev = 0;
    for (const auto& poly : chain) {
      LD v = 0;
      for (std::size_t k = poly.size(); k-- > 0;) v = v * x + poly[k];
      const int s = v > 0 ? 1 : v < 0 ? -1 : 0;
      if (s == 0) continue;
      if (prev != 0 && s != prev) ++changes;
      prev = s;
    }
    return changes;
  };
  return sign_changes_at(-1e9L) - sign_changes_at(1e9L);
}

}  // namespace

TEST_CASE("product distributions") {
  SUBCASE("point masses from degenerate marginals") {
    SubsetDistribution d = from_product({1.0, 0.0});
    CHECK(d.weight(0b01) == 1.0);
    CHECK(d.weight(0b00) == 0.0);
    CHECK(d.weight(0b10) == 0.0);
    CHECK(d.weight(0b11) == 0.0);
  }
  SUBCASE("uniform from half marginals") {
    SubsetDistribution d = from_product({0.5, 0.5});
    for (std::uint64_t m = 0; m < 4; ++m) CHECK(d.weight(m) == doctest::Approx(0.25));
  }
  SUBCASE("single site weights") {
    SubsetDistribution d = from_product({0.3});
    CHECK(d.weight(0) == doctest::Approx(0.7));
    CHECK(d.weight(1) == doctest::Approx(0.3));
  }
  SUBCASE("out-of-range marginal rejected") {
    CHECK_THROWS_AS(from_product({0.5, 1.2}), Error);
  }
  SUBCASE("marginal means recover the alphas") {
    SubsetDistribution d = from_product({0.2, 0.7, 0.45});
    CHECK(marginal_mean(d, 0) == doctest::Approx(0.2));
    CHECK(marginal_mean(d, 1) == doctest::Approx(0.7));
    CHECK(marginal_mean(d, 2) == doctest::Approx(0.45));
  }
}

TEST_CASE("diagonalize") {
  SUBCASE("uniform one-particle pair gives Q* = w") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w(0b01) = 0.5;
    w(0b10) = 0.5;
    UnivariatePoly q = diagonalize(SubsetDistribution(2, w));
    CHECK(q.coeffs(0) == 0.0);
    CHECK(q.coeffs(1) == doctest::Approx(1.0));
    CHECK(q.coeffs(2) == 0.0);
  }
  SUBCASE("half-half product gives (1+w)^2/4") {
    UnivariatePoly q = diagonalize(from_product({0.5, 0.5}));
    CHECK(q.coeffs(0) == doctest::Approx(0.25));
    CHECK(q.coeffs(1) == doctest::Approx(0.5));
    CHECK(q.coeffs(2) == doctest::Approx(0.25));
  }
  SUBCASE("full occupancy point mass gives w^3") {
    UnivariatePoly q = diagonalize(point_mass(3, 0b111));
    CHECK(q.coeffs(3) == 1.0);
    CHECK(q.coeffs(0) + q.coeffs(1) + q.coeffs(2) == 0.0);
  }
}

TEST_CASE("real rootedness") {
  SUBCASE("(1+w)^2/4 is real rooted at -1, -1") {
    auto rep = real_rooted(diagonalize(from_product({0.5, 0.5})), 1e-6);
    CHECK(rep.real_rooted);
    REQUIRE(rep.roots.size() == 2);
    CHECK(rep.roots[0].real() == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(rep.roots[1].real() == doctest::Approx(-1.0).epsilon(1e-6));
  }
  SUBCASE("(1+w^2)/2 is not real rooted") {
    UnivariatePoly q;
    q.coeffs = Eigen::Vector3d(0.5, 0.0, 0.5);
    auto rep = real_rooted(q, 1e-9);
    CHECK(!rep.real_rooted);
    CHECK(rep.margin == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("negative-discriminant quadratic fails") {
    UnivariatePoly q;
    q.coeffs = Eigen::Vector3d(0.3, 0.4, 0.3);
    CHECK(!real_rooted(q, 1e-9).real_rooted);
  }
  SUBCASE("zero polynomial rejected") {
    UnivariatePoly q;
    q.coeffs = Eigen::Vector3d::Zero();
    CHECK_THROWS_AS(real_rooted(q, 1e-9), Error);
  }
  SUBCASE("degree deficit becomes roots at infinity") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w(0b01) = 0.5;
    w(0b10) = 0.5;  // P(count = 2) = 0
    auto rep = real_rooted(diagonalize(SubsetDistribution(2, w)), 1e-9);
    CHECK(rep.real_rooted);
    CHECK(rep.roots_at_infinity == 1);
  }
  SUBCASE("agrees with the Sturm oracle on random mixed products") {
    rng::Stream stream(2024);
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 2 + static_cast<int>(stream.below(4));
      std::vector<double> alphas(static_cast<std::size_t>(n));
      for (auto& a : alphas) a = 0.05 + 0.9 * stream.uniform01();
      SubsetDistribution d = from_product(alphas);
      for (int m = 0; m < 6; ++m) {
        int i = static_cast<int>(stream.below(static_cast<std::uint64_t>(n)));
        int j = static_cast<int>(stream.below(static_cast<std::uint64_t>(n - 1)));
        if (j >= i) ++j;
        d = transposition_mix(d, i, j, stream.uniform01());
      }
      UnivariatePoly q = diagonalize(d);
      auto rep = real_rooted(q, 1e-8);
      CHECK(rep.real_rooted);
      // Sturm counts distinct real roots; mixes almost surely keep them simple.
      CHECK(sturm_real_root_count(q.coeffs) ==
            static_cast<int>(rep.roots.size()));
    }
  }
}

TEST_CASE("bernoulli decomposition") {
  SUBCASE("product distributions return their marginals") {
    std::vector<double> alphas{0.8, 0.3, 0.55};
    BernoulliVector p = bernoulli_decomposition(from_product(alphas), 1e-8);
    std::sort(alphas.rbegin(), alphas.rend());
    REQUIRE(p.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(p[i] == doctest::Approx(alphas[i]).epsilon(1e-9));
  }
  SUBCASE("uniform one-particle pair decomposes as (1, 0)") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w(0b01) = 0.5;
    w(0b10) = 0.5;
    BernoulliVector p = bernoulli_decomposition(SubsetDistribution(2, w), 1e-8);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("uniform four-configuration case") {
    BernoulliVector p = bernoulli_decomposition(from_product({0.5, 0.5}), 1e-6);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("round trip reproduces the count polynomial") {
    rng::Stream stream(99);
    for (int trial = 0; trial < 25; ++trial) {
      const int n = 2 + static_cast<int>(stream.below(5));
      std::vector<double> alphas(static_cast<std::size_t>(n));
      for (auto& a : alphas) a = stream.uniform01();
      SubsetDistribution d = from_product(alphas);
      for (int m = 0; m < 8; ++m) {
        int i = static_cast<int>(stream.below(static_cast<std::uint64_t>(n)));
        int j = static_cast<int>(stream.below(static_cast<std::uint64_t>(n - 1)));
        if (j >= i) ++j;
        d = transposition_mix(d, i, j, stream.uniform01());
      }
      BernoulliVector p = bernoulli_decomposition(d, 1e-7);
      UnivariatePoly back = bernoulli_product_poly(p);
      UnivariatePoly q = diagonalize(d);
      CHECK((back.coeffs - q.coeffs).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("refuses a positively correlated distribution") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w(0b00) = 0.5;
    w(0b11) = 0.5;  // Q* = (1 + w^2)/2, complex roots
    CHECK_THROWS_AS(bernoulli_decomposition(SubsetDistribution(2, w), 1e-8), Error);
  }
}

TEST_CASE("pair stability criterion") {
  auto mk = [](std::complex<double> a, std::complex<double> b,
               std::complex<double> c, std::complex<double> d) {
    return PairCoefficients{a, b, c, d};
  };
  SUBCASE("zw is stable with zero slack") {
    auto rep = pair_stability(mk(0, 0, 0, 1));
    CHECK(rep.stable);
    CHECK(rep.boundary);
    for (double s : rep.slack) CHECK(s == 0.0);
  }
  SUBCASE("z - w is unstable with slack -2") {
    auto rep = pair_stability(mk(0, 1, -1, 0));
    CHECK(!rep.stable);
    CHECK(rep.slack[0] == doctest::Approx(-2.0));
  }
  SUBCASE("1 + zw is unstable with slack -2") {
    auto rep = pair_stability(mk(1, 0, 0, 1));
    CHECK(!rep.stable);
    CHECK(rep.slack[0] == doctest::Approx(-2.0));
  }
  SUBCASE("all-zero input rejected") {
    CHECK_THROWS_AS(pair_stability(mk(0, 0, 0, 0)), Error);
  }
  SUBCASE("products of upper-half-plane-free factors are stable") {
    // (z + i)(w + i) = zw + iz + iw - 1: no roots with both parts in the
    // open upper half plane... its stability follows from the factor form.
    auto rep = pair_stability(mk(-1, std::complex<double>(0, 1),
                                 std::complex<double>(0, 1), 1));
    CHECK(rep.stable);
  }
}

TEST_CASE("transposition mixing") {
  SUBCASE("p=1 is the identity") {
    SubsetDistribution d = from_product({0.3, 0.8});
    SubsetDistribution m = transposition_mix(d, 0, 1, 1.0);
    CHECK((m.weights() - d.weights()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("half mixing uniformizes a one-particle point mass") {
    SubsetDistribution d = point_mass(2, 0b01);
    SubsetDistribution m = transposition_mix(d, 0, 1, 0.5);
    CHECK(m.weight(0b01) == doctest::Approx(0.5));
    CHECK(m.weight(0b10) == doctest::Approx(0.5));
  }
  SUBCASE("count law is invariant") {
    rng::Stream stream(7);
    SubsetDistribution d = from_product({0.2, 0.5, 0.9, 0.4});
    UnivariatePoly before = diagonalize(d);
    // Single mix: weights regroup within popcount classes, sums unchanged.
    SubsetDistribution once = transposition_mix(d, 0, 2, 0.37);
    CHECK((diagonalize(once).coeffs - before.coeffs).cwiseAbs().maxCoeff() <
          1e-15);
    for (int m = 0; m < 10; ++m) {
      int i = static_cast<int>(stream.below(4));
      int j = static_cast<int>(stream.below(3));
      if (j >= i) ++j;
      d = transposition_mix(d, i, j, stream.uniform01());
    }
    CHECK((diagonalize(d).coeffs - before.coeffs).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("argument validation") {
    SubsetDistribution d = from_product({0.5, 0.5});
    CHECK_THROWS_AS(transposition_mix(d, 0, 0, 0.5), Error);
    CHECK_THROWS_AS(transposition_mix(d, 0, 1, 1.5), Error);
    CHECK_THROWS_AS(transposition_mix(d, 0, 7, 0.5), Error);
  }
}

TEST_CASE("rayleigh check") {
  SUBCASE("product measures give identically zero") {
    SubsetDistribution d = from_product({0.3, 0.6, 0.8});
    auto points = default_rayleigh_points(3, 50, 11);
    auto rep = rayleigh_check(d, points, all_pairs(3), 1e-12);
    CHECK(rep.passed);
    CHECK(std::abs(rep.min_value) < 1e-14);
  }
  SUBCASE("uniform one-particle pair gives exactly 1/4") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w(0b01) = 0.5;
    w(0b10) = 0.5;
    SubsetDistribution d(2, w);
    auto points = default_rayleigh_points(2, 25, 3);
    auto rep = rayleigh_check(d, points, all_pairs(2), 1e-12);
    CHECK(rep.passed);
    CHECK(rep.min_value == doctest::Approx(0.25).epsilon(1e-13));
  }
  SUBCASE("malformed points rejected") {
    SubsetDistribution d = from_product({0.5, 0.5});
    std::vector<Eigen::VectorXd> bad{Eigen::VectorXd::Ones(5)};
    CHECK_THROWS_AS(rayleigh_check(d, bad, all_pairs(2), 1e-12), Error);
  }
  SUBCASE("positively correlated distribution fails at the ones vector") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w(0b00) = 0.5;
    w(0b11) = 0.5;
    SubsetDistribution d(2, w);
    std::vector<Eigen::VectorXd> points{Eigen::VectorXd::Ones(2)};
    auto rep = rayleigh_check(d, points, all_pairs(2), 1e-12);
    CHECK(!rep.passed);
    CHECK(rep.min_value == doctest::Approx(-0.25));
  }
  SUBCASE("negative correlation follows at the ones vector") {
    rng::Stream stream(5);
    for (int trial = 0; trial < 20; ++trial) {
      SubsetDistribution d = from_product({0.4, 0.7, 0.2});
      for (int m = 0; m < 5; ++m) {
        int i = static_cast<int>(stream.below(3));
        int j = static_cast<int>(stream.below(2));
        if (j >= i) ++j;
        d = transposition_mix(d, i, j, stream.uniform01());
      }
      std::vector<Eigen::VectorXd> ones{Eigen::VectorXd::Ones(3)};
      if (rayleigh_check(d, ones, all_pairs(3), 1e-12).passed) {
        for (auto [i, j] : all_pairs(3))
          CHECK(pairwise_covariance(d, i, j) <= 1e-12);
      }
    }
  }
}

TEST_CASE("covariance and serialization") {
  SUBCASE("product measure has zero covariance") {
    SubsetDistribution d = from_product({0.25, 0.75});
    CHECK(pairwise_covariance(d, 0, 1) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("uniform one-particle pair has covariance -1/4") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w(0b01) = 0.5;
    w(0b10) = 0.5;
    CHECK(pairwise_covariance(SubsetDistribution(2, w), 0, 1) ==
          doctest::Approx(-0.25));
  }
  SUBCASE("JSON round trip") {
    SubsetDistribution d = from_product({0.3, 0.9, 0.1});
    SubsetDistribution back = SubsetDistribution::from_json(d.to_json());
    CHECK(back.n() == 3);
    CHECK((back.weights() - d.weights()).cwiseAbs().maxCoeff() == 0.0);
  }
}
