#include "sep/stats.hpp"

#include <cmath>

#include "doctest.h"
#include "sep/rng.hpp"

using namespace sep;
using namespace sep::stats;

TEST_CASE("empirical moments") {
  SUBCASE("constants") {
    Moments m = empirical_moments({0.0, 0.0, 0.0});
    CHECK(m.mean == 0.0);
    CHECK(m.variance == 0.0);
  }
  SUBCASE("two-point sample") {
    Moments m = empirical_moments({0.0, 1.0});
    CHECK(m.mean == doctest::Approx(0.5));
    CHECK(m.variance == doctest::Approx(0.5));
  }
  SUBCASE("exact Poisson(1/3) samples sit inside the CLT interval") {
    rng::Stream s(8);
    const int n = 100000;
    std::vector<double> samples;
    samples.reserve(n);
    for (int i = 0; i < n; ++i)
      samples.push_back(static_cast<double>(s.poisson(1.0 / 3)));
    Moments m = empirical_moments(samples);
    CHECK(std::abs(m.mean - 1.0 / 3) < 4 * std::sqrt((1.0 / 3) / n));
  }
  SUBCASE("degenerate input rejected") {
    CHECK_THROWS_AS(empirical_moments({1.0}), Error);
  }
}

TEST_CASE("poisson total variation") {
  SUBCASE("exact frequencies give zero") {
    const double mean = 0.7;
    std::vector<double> freq(60);
    double pmf = std::exp(-mean);
    for (std::size_t k = 0; k < freq.size(); ++k) {
      freq[k] = pmf;
      pmf *= mean / static_cast<double>(k + 1);
    }
    CHECK(tv_poisson_from_frequencies(freq, mean) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("point mass at zero against mean one") {
    std::vector<std::int64_t> samples(1000, 0);
    CHECK(tv_poisson(samples, 1.0) ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  }
  SUBCASE("permutation invariance") {
    std::vector<std::int64_t> a{0, 1, 2, 0, 1, 3, 0, 0};
    std::vector<std::int64_t> b{3, 0, 0, 1, 0, 2, 1, 0};
    CHECK(tv_poisson(a, 0.5) == tv_poisson(b, 0.5));
  }
  SUBCASE("triangle sanity against an intermediate mean") {
    std::vector<std::int64_t> samples{0, 0, 1, 1, 2, 0, 1, 0, 0, 3};
    const double lhs = tv_poisson(samples, 0.4);
    // TV(Poisson(0.6), Poisson(0.4)) computed from the pmfs directly
    double tv_pp = 0;
    double pa = std::exp(-0.6), pb = std::exp(-0.4);
    for (int k = 0; k < 80; ++k) {
      tv_pp += std::abs(pa - pb);
      pa *= 0.6 / (k + 1);
      pb *= 0.4 / (k + 1);
    }
    tv_pp *= 0.5;
    CHECK(lhs <= tv_poisson(samples, 0.6) + tv_pp + 1e-12);
  }
  SUBCASE("negative counts rejected") {
    CHECK_THROWS_AS(tv_poisson({1, -2, 0}, 1.0), Error);
  }
}

TEST_CASE("normality distance") {
  SUBCASE("exact standard normal quantiles score tiny KS") {
    const int n = 10000;
    std::vector<double> samples(n);
    for (int i = 0; i < n; ++i)
      samples[static_cast<std::size_t>(i)] =
          rng::normal_quantile((i + 0.5) / n);
    NormalityReport rep = normality_distance(samples);
    CHECK(rep.ks <= 0.02);
    CHECK(std::abs(rep.skewness) < 0.05);
    CHECK(std::abs(rep.excess_kurtosis) < 0.1);
  }
  SUBCASE("constant samples are rejected") {
    CHECK_THROWS_AS(normality_distance(std::vector<double>(100, 2.0)), Error);
  }
  SUBCASE("lattice samples: classical KS floors, midpoint variant does not") {
    // Integers sampled from a discretized normal with sd ~ 2.5.
    rng::Stream s(33);
    std::vector<double> samples;
    for (int i = 0; i < 20000; ++i)
      samples.push_back(std::round(2.5 * s.normal()));
    NormalityReport rep = normality_distance(samples);
    CHECK(rep.ks > 0.05);           // lattice spacing forces a large jump
    CHECK(rep.ks_midpoint < 0.02);  // shape itself is fine
  }
}

TEST_CASE("exchange probability h(r)") {
  SUBCASE("endpoints") {
    CHECK(h_of_r(0.0) == doctest::Approx(0.5));
    CHECK(h_of_r(0.999999) == doctest::Approx(1.0).epsilon(1e-2));
  }
  SUBCASE("closed form via bivariate normal orthant probability") {
    // E[Phi(cN)^2] = 1/4 + arcsin(c^2/(1+c^2))/(2 pi) gives
    // h(r) = 1/2 + arcsin(r/(2-r))/pi.
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double closed = 0.5 + std::asin(r / (2 - r)) / M_PI;
      CHECK(h_of_r(r, 1e-11) == doctest::Approx(closed).epsilon(1e-9));
    }
  }
  SUBCASE("lower bound and monotonicity on a grid") {
    double prev = 0;
    for (int k = 0; k < 50; ++k) {
      const double r = static_cast<double>(k) / 50;
      const double h = h_of_r(r);
      CHECK(h >= 0.5 - 1e-12);
      CHECK(h >= prev - 1e-9);
      prev = h;
    }
  }
  SUBCASE("domain validation") {
    CHECK_THROWS_AS(h_of_r(1.0), Error);
    CHECK_THROWS_AS(h_of_r(-0.1), Error);
  }
}

TEST_CASE("H constant") {
  HConstant h = h_constant(1e-10);
  SUBCASE("strictly between one half and one") {
    CHECK(h.value > 0.5);
    CHECK(h.value < 1.0);
  }
  SUBCASE("refinements agree") { CHECK(h.refinement_gap < 1e-6); }
  SUBCASE("matches the arcsin reduction") {
    // Frozen from the closed form integral of 1/2 + arcsin(u^2/(2-u^2))/pi.
    const double reference = 0.585786437627;
    CHECK(h.value == doctest::Approx(reference).epsilon(1e-8));
  }
}

TEST_CASE("flux envelope") {
  Envelope e = flux_envelope(1.0);
  SUBCASE("mean coefficient 1/sqrt(2 pi)") {
    CHECK(e.mean_coeff == doctest::Approx(0.3989422804).epsilon(1e-9));
  }
  SUBCASE("variance ceiling 1/(2 sqrt(pi))") {
    CHECK(e.var_upper == doctest::Approx(0.2820947918).epsilon(1e-9));
  }
  SUBCASE("strict ordering") {
    CHECK(e.var_lower > 0.0);
    CHECK(e.var_lower < e.var_upper);
  }
  SUBCASE("scales linearly in sigma") {
    Envelope e2 = flux_envelope(2.0);
    CHECK(e2.mean_coeff == doctest::Approx(2 * e.mean_coeff));
    CHECK(e2.var_lower == doctest::Approx(2 * e.var_lower));
  }
}

TEST_CASE("verdict assembly") {
  SUBCASE("poisson target with near-exact samples passes") {
    rng::Stream s(4);
    std::vector<std::int64_t> samples;
    for (int i = 0; i < 50000; ++i)
      samples.push_back(static_cast<std::int64_t>(s.poisson(1.0 / 3)));
    VerdictSpec spec;
    spec.statistic_name = "window";
    spec.law = TargetLaw::kPoisson;
    spec.poisson_mean = 1.0 / 3;
    spec.tv_tolerance = 0.02;
    LimitReport rep = verdict(samples, spec);
    CHECK(rep.pass);
    CHECK(*rep.tv < 0.02);
  }
  SUBCASE("normal target with constant samples errors out") {
    VerdictSpec spec;
    spec.statistic_name = "w";
    spec.law = TargetLaw::kNormal;
    spec.ks_tolerance = 0.05;
    CHECK_THROWS_AS(verdict(std::vector<std::int64_t>(100, 3), spec), Error);
  }
  SUBCASE("report JSON round trip") {
    rng::Stream s(6);
    std::vector<std::int64_t> samples;
    for (int i = 0; i < 1000; ++i)
      samples.push_back(static_cast<std::int64_t>(s.poisson(2.0)));
    VerdictSpec spec;
    spec.statistic_name = "roundtrip";
    spec.law = TargetLaw::kPoisson;
    spec.poisson_mean = 2.0;
    spec.tv_tolerance = 0.1;
    LimitReport rep = verdict(samples, spec);
    LimitReport back = LimitReport::from_json(rep.to_json());
    CHECK(back.statistic == rep.statistic);
    CHECK(back.pass == rep.pass);
    CHECK(*back.tv == doctest::Approx(*rep.tv));
    CHECK(back.moments.mean == doctest::Approx(rep.moments.mean));
  }
}
