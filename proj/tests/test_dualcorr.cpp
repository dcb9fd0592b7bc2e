#include "sep/dualcorr.hpp"

#include <cmath>

#include "doctest.h"
#include "sep/exactevolve.hpp"
#include "sep/genpoly.hpp"
#include "sep/kernels.hpp"

using namespace sep;
using namespace sep::dualcorr;
namespace gp = sep::genpoly;

TEST_CASE("delta field") {
  SUBCASE("constant profile gives zero") {
    kernels::Kernel tree = kernels::build_binary_tree(2);
    PairField d = delta_field(tree, kernels::constant_alpha(tree, 0.4));
    CHECK(d.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("basis edge value at lambda=0, rho=1 is 1/27") {
    kernels::Kernel tree = kernels::build_binary_tree(3);
    PairField d = delta_field(tree, kernels::tree_alpha(tree, 0.0, 1.0));
    const Index l0 = tree.site_at(kernels::Side::kLeft, 0, 0);
    const Index r0 = tree.site_at(kernels::Side::kRight, 0, 0);
    CHECK(d(l0, r0) == doctest::Approx(1.0 / 27).epsilon(1e-14));
    CHECK(d(r0, l0) == doctest::Approx(1.0 / 27).epsilon(1e-14));
  }
  SUBCASE("total mass equals the Dirichlet sum") {
    kernels::Kernel tree = kernels::build_binary_tree(4);
    kernels::HarmonicProfile a = kernels::tree_alpha(tree, 0.2, 0.9);
    PairField d = delta_field(tree, a);
    CHECK(d.sum() == doctest::Approx(kernels::dirichlet_sum(tree, a).value)
                         .epsilon(1e-13));
  }
}

TEST_CASE("pair semigroups") {
  kernels::Kernel path = kernels::build_line_range(0, 3, kernels::nearest_neighbor_law());
  kernels::HarmonicProfile alpha = kernels::line_alpha(path, 0.0, 1.0);

  SUBCASE("t=0 is the identity") {
    TwoParticleGenerator v(path, Variant::kExclusion, false);
    PairField f = delta_field(path, alpha);
    CHECK((v.apply(f, 0.0) - f).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("independent semigroup fixes harmonic products at interior pairs") {
    kernels::Kernel tree = kernels::build_binary_tree(6);
    kernels::HarmonicProfile a = kernels::tree_alpha(tree, 0.0, 1.0);
    TwoParticleGenerator u(tree, Variant::kIndependent, false);
    const int n = static_cast<int>(tree.size());
    PairField f(n, n);
    for (Index x = 0; x < n; ++x)
      for (Index y = 0; y < n; ++y) f(x, y) = a.values(x) * a.values(y);
    PairField g = u.apply(f, 0.5, 1e-12);
    // Deep-interior pair: both walkers far from the truncation edge.
    const Index x = tree.site_at(kernels::Side::kLeft, 1, 0);
    const Index y = tree.site_at(kernels::Side::kRight, 1, 1);
    CHECK(g(x, y) == doctest::Approx(f(x, y)).epsilon(1e-6));
  }
  SUBCASE("conservative exclusion semigroup preserves the constant function") {
    TwoParticleGenerator v(path, Variant::kExclusion, false);
    PairField ones = PairField::Ones(4, 4);
    ones.diagonal().setZero();
    PairField g = v.apply(ones, 1.5, 1e-13);
    for (Index x = 0; x < 4; ++x)
      for (Index y = 0; y < 4; ++y)
        if (x != y) CHECK(g(x, y) == doctest::Approx(1.0).epsilon(1e-11));
  }
  SUBCASE("V(s) of a nonnegative field stays nonnegative") {
    TwoParticleGenerator v(path, Variant::kExclusion, true);
    PairField f = delta_field(path, alpha);
    for (double s : {0.2, 1.0, 5.0}) {
      CHECK(v.apply(f, s, 1e-13).minCoeff() >= -1e-14);
    }
  }
}

TEST_CASE("killed proxy integral on the 3-site path") {
  // Worked case: alpha = (0, 1/2, 1); the dual integral for the outer pair is
  // exactly 1/12, matching the master-equation stationary covariance.
  kernels::Kernel path = kernels::build_line(1, kernels::nearest_neighbor_law());
  kernels::HarmonicProfile alpha = kernels::line_alpha(path, 0.0, 1.0);
  DualOptions opts;
  opts.mode = DualMode::kInfiniteProxy;
  opts.tol = 1e-9;
  opts.enforce_monitor = false;  // the 3-site truncation is all boundary
  DualCovResult res = stationary_neg_covariance(path, alpha, 0, 2, opts);
  CHECK(res.value == doctest::Approx(1.0 / 12).epsilon(1e-6));
  CHECK(!res.monitor_ok);  // and the monitor must say so

  // With the monitor enforced, the shallow truncation is refused outright.
  opts.enforce_monitor = true;
  CHECK_THROWS_WITH_AS(stationary_neg_covariance(path, alpha, 0, 2, opts),
                       doctest::Contains("deepen the truncation"), Error);
}

TEST_CASE("exact truncation covariance matches the master equation") {
  for (int len : {3, 5}) {
    CAPTURE(len);
    kernels::Kernel path =
        kernels::build_line_range(0, len - 1, kernels::nearest_neighbor_law());
    kernels::HarmonicProfile alpha = kernels::line_alpha(path, 0.0, 1.0);
    DualOptions opts;
    opts.mode = DualMode::kTruncationExact;
    opts.tol = 1e-9;
    DualCovMatrixResult dual = stationary_neg_covariance_all(path, alpha, opts);

    std::vector<double> alphas(alpha.values.data(),
                               alpha.values.data() + alpha.values.size());
    auto gen = exactevolve::build_generator(path);
    gp::SubsetDistribution stat =
        exactevolve::stationary_limit(gp::from_product(alphas), gen, 1e-12);
    Eigen::MatrixXd moments = exactevolve::pair_moments(stat);
    Eigen::VectorXd marg = exactevolve::site_marginals(stat);
    for (Index x = 0; x < len; ++x)
      for (Index y = 0; y < len; ++y) {
        if (x == y) continue;
        const double cov = moments(x, y) - marg(x) * marg(y);
        CHECK(dual.neg_covariance(x, y) == doctest::Approx(-cov).epsilon(2e-6));
      }
  }
}

TEST_CASE("dual integral symmetry and sign") {
  kernels::Kernel path = kernels::build_line_range(0, 4, kernels::nearest_neighbor_law());
  kernels::HarmonicProfile alpha = kernels::line_alpha(path, 0.1, 0.8);
  DualOptions opts;
  opts.mode = DualMode::kInfiniteProxy;
  opts.tol = 1e-8;
  opts.enforce_monitor = false;
  DualCovMatrixResult all = stationary_neg_covariance_all(path, alpha, opts);
  for (Index x = 0; x < 5; ++x)
    for (Index y = x + 1; y < 5; ++y) {
      CHECK(all.neg_covariance(x, y) ==
            doctest::Approx(all.neg_covariance(y, x)).epsilon(1e-10));
      CHECK(all.neg_covariance(x, y) >= -1e-12);
    }
}

TEST_CASE("constant profile gives zero covariance exactly") {
  kernels::Kernel path = kernels::build_line_range(0, 3, kernels::nearest_neighbor_law());
  kernels::HarmonicProfile alpha = kernels::constant_alpha(path, 0.35);
  DualOptions opts;
  opts.enforce_monitor = false;
  DualCovResult res = stationary_neg_covariance(path, alpha, 0, 2, opts);
  CHECK(res.value == 0.0);
}

TEST_CASE("covariance sum bounds") {
  kernels::Kernel tree = kernels::build_binary_tree(7);
  kernels::HarmonicProfile alpha = kernels::tree_alpha(tree, 0.0, 1.0);
  kernels::SiteWindow window =
      kernels::SiteWindow::tree_level_below(tree, 2, kernels::Side::kLeft);

  CovarianceBoundResult bound = covariance_sum_bound(tree, alpha, window, 1e-9);

  SUBCASE("constant profile gives zero bounds") {
    CovarianceBoundResult zero =
        covariance_sum_bound(tree, kernels::constant_alpha(tree, 0.5), window, 1e-9);
    CHECK(zero.heat_bound == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(zero.coarse_bound == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("bound chain is ordered") {
    // pairwise dual integrals over the window <= heat bound <= coarse bound
    DualOptions opts;
    opts.mode = DualMode::kInfiniteProxy;
    opts.tol = 1e-8;
    opts.enforce_monitor = false;
    DualCovMatrixResult all = stationary_neg_covariance_all(tree, alpha, opts);
    double pair_sum = 0;
    for (Index x : window.sites)
      for (Index y : window.sites)
        if (x != y) pair_sum += all.neg_covariance(x, y);
    CHECK(pair_sum <= bound.heat_bound + 1e-8);
    CHECK(bound.heat_bound <= bound.coarse_bound + 1e-8);
  }
}

TEST_CASE("refined tree constant") {
  SUBCASE("reference point 40/189") {
    RefinedConstantResult res = tree_refined_constant(0.0, 1.0, 30);
    CHECK(res.value == doctest::Approx(40.0 / 189).epsilon(1e-8));
    CHECK(res.value < 1.0 / 3);
  }
  SUBCASE("equal densities vanish") {
    CHECK(tree_refined_constant(0.6, 0.6, 20).value == 0.0);
  }
  SUBCASE("level cap controls the tail") {
    RefinedConstantResult shallow = tree_refined_constant(0.0, 1.0, 10);
    RefinedConstantResult deep = tree_refined_constant(0.0, 1.0, 50);
    CHECK(std::abs(deep.value - shallow.value) < 2 * shallow.tail_estimate + 1e-12);
    CHECK(deep.tail_estimate < 1e-12);
  }
}

TEST_CASE("variance ratio") {
  kernels::Kernel path = kernels::build_line_range(0, 5, kernels::nearest_neighbor_law());
  kernels::SiteWindow window;
  window.sites = {1, 2, 3};
  window.description = "middle";

  SUBCASE("constant profile gives ratio one exactly") {
    VarianceRatioResult res = variance_ratio(
        path, kernels::constant_alpha(path, 0.3), window,
        DualOptions{DualMode::kInfiniteProxy, 1e-8, false});
    CHECK(res.ratio == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("ratio is at most one") {
    VarianceRatioResult res = variance_ratio(
        path, kernels::line_alpha(path, 0.0, 1.0), window,
        DualOptions{DualMode::kInfiniteProxy, 1e-8, false});
    CHECK(res.ratio <= 1.0 + 1e-10);
    CHECK(res.ratio > 0.0);
  }
  SUBCASE("degenerate window rejected") {
    CHECK_THROWS_AS(variance_ratio(path, kernels::constant_alpha(path, 1.0), window,
                                   DualOptions{}),
                    Error);
  }
}
