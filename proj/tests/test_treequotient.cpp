#include "sep/treequotient.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "sep/dualcorr.hpp"
#include "sep/kernels.hpp"
#include "sep/rng.hpp"

using namespace sep;
using namespace sep::treequotient;
using kernels::Side;

namespace {

// Dense killed transition matrix of the full tree for oracle solves.
Eigen::MatrixXd dense_killed(const kernels::Kernel& tree) {
  kernels::KilledKernel kk = kernels::killed_truncation(tree);
  return Eigen::MatrixXd(kk.p);
}

}  // namespace

TEST_CASE("walk chain matches the full tree") {
  const int depth = 5;
  kernels::Kernel tree = kernels::build_binary_tree(depth);
  WalkChain chain(depth, /*killed=*/true);

  SUBCASE("green column from the left root") {
    Eigen::MatrixXd p = dense_killed(tree);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(tree.size(), tree.size()) - p;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(tree.size());
    e(tree.site_at(Side::kLeft, 0, 0)) = 1.0;
    Eigen::VectorXd dense = a.lu().solve(e);
    Eigen::VectorXd collapsed = tree_green_from_root(depth);
    for (Index i = 0; i < tree.size(); ++i) {
      const auto& s = tree.sites[static_cast<std::size_t>(i)];
      CHECK(dense(i) ==
            doctest::Approx(collapsed(chain.id(s.side, s.level))).epsilon(1e-12));
    }
  }
  SUBCASE("window sums match a dense solve") {
    Eigen::MatrixXd p = dense_killed(tree);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(tree.size(), tree.size()) - p;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(tree.size());
    for (Index i = 0; i < tree.size(); ++i) {
      const auto& s = tree.sites[static_cast<std::size_t>(i)];
      if (s.side == Side::kLeft && s.level < 3) b(i) = 1.0;
    }
    Eigen::VectorXd dense = a.lu().solve(b);
    auto sup = tree_window_green_sup(
        depth, [](Side s, int l) { return s == Side::kLeft && l < 3; },
        /*min_boundary_distance=*/0);
    CHECK(sup.sup == doctest::Approx(dense.maxCoeff()).epsilon(1e-12));
  }
  SUBCASE("orbit counts add to the site total") {
    double total = 0;
    for (Index i = 0; i < chain.states(); ++i) total += chain.orbit_count(i);
    CHECK(total == doctest::Approx(static_cast<double>(tree.size())));
  }
}

TEST_CASE("pair chain is an exact lumping of the two-walker process") {
  const int depth = 3;
  kernels::Kernel tree = kernels::build_binary_tree(depth);
  const int n = static_cast<int>(tree.size());

  for (bool killed : {false, true}) {
    CAPTURE(killed);
    PairChain chain(depth, killed);
    dualcorr::TwoParticleGenerator full(tree, dualcorr::Variant::kExclusion, killed);

    SUBCASE(killed ? "killed evolution" : "conservative evolution") {
      // Evolve the Delta field both ways and compare on representatives.
      kernels::HarmonicProfile alpha = kernels::tree_alpha(tree, 0.0, 1.0);
      dualcorr::PairField field = dualcorr::delta_field(tree, alpha);
      Eigen::VectorXd lumped = chain.delta_field(0.0, 1.0);

      // The lumped field must agree with the full field on every pair.
      auto orbit_of = [&](Index x, Index y) {
        const auto& sx = tree.sites[static_cast<std::size_t>(x)];
        const auto& sy = tree.sites[static_cast<std::size_t>(y)];
        PairOrbit o;
        if (sx.side != sy.side) {
          o.cross = true;
          o.sx = sx.side;
          o.lx = sx.level;
          o.ly = sy.level;
        } else {
          o.cross = false;
          o.sx = sx.side;
          o.lx = sx.level;
          o.ly = sy.level;
          const int d = tree.distance(x, y);
          o.lm = (sx.level + sy.level - d) / 2;
        }
        return chain.index_of(o);
      };
      for (Index x = 0; x < n; ++x)
        for (Index y = 0; y < n; ++y) {
          if (x == y) continue;
          REQUIRE(field(x, y) ==
                  doctest::Approx(lumped(orbit_of(x, y))).epsilon(1e-13));
        }

      for (double t : {0.3, 1.5}) {
        dualcorr::PairField evolved = full.apply(field, t, 1e-13);
        Eigen::VectorXd lumped_evolved = chain.evolve(lumped, t, 1e-13);
        double worst = 0;
        for (Index x = 0; x < n; ++x)
          for (Index y = 0; y < n; ++y) {
            if (x == y) continue;
            worst = std::max(worst, std::abs(evolved(x, y) -
                                             lumped_evolved(orbit_of(x, y))));
          }
        CHECK(worst < 1e-10);
      }
    }
  }
}

TEST_CASE("lumping holds for arbitrary orbit-constant fields") {
  // Random values per orbit, pushed to the full pair space: the two
  // evolutions must agree at every pair, killed and conservative alike.
  const int depth = 3;
  kernels::Kernel tree = kernels::build_binary_tree(depth);
  const int n = static_cast<int>(tree.size());
  rng::Stream stream(314);
  for (bool killed : {false, true}) {
    CAPTURE(killed);
    PairChain chain(depth, killed);
    dualcorr::TwoParticleGenerator full(tree, dualcorr::Variant::kExclusion, killed);
    Eigen::VectorXd lumped(chain.states());
    for (Index i = 0; i < chain.states(); ++i) lumped(i) = stream.uniform(-1, 1);

    auto orbit_of = [&](Index x, Index y) {
      const auto& sx = tree.sites[static_cast<std::size_t>(x)];
      const auto& sy = tree.sites[static_cast<std::size_t>(y)];
      PairOrbit o;
      o.sx = sx.side;
      o.lx = sx.level;
      o.ly = sy.level;
      if (sx.side != sy.side) {
        o.cross = true;
      } else {
        o.cross = false;
        o.lm = (sx.level + sy.level - tree.distance(x, y)) / 2;
      }
      return chain.index_of(o);
    };
    dualcorr::PairField field = dualcorr::PairField::Zero(n, n);
    for (Index x = 0; x < n; ++x)
      for (Index y = 0; y < n; ++y)
        if (x != y) field(x, y) = lumped(orbit_of(x, y));

    dualcorr::PairField evolved = full.apply(field, 0.8, 1e-13);
    Eigen::VectorXd lumped_evolved = chain.evolve(lumped, 0.8, 1e-13);
    double worst = 0;
    for (Index x = 0; x < n; ++x)
      for (Index y = 0; y < n; ++y)
        if (x != y)
          worst = std::max(worst,
                           std::abs(evolved(x, y) - lumped_evolved(orbit_of(x, y))));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("pair orbit counts enumerate all ordered pairs") {
  for (int depth : {1, 2, 3, 4}) {
    PairChain chain(depth, false);
    double total = 0;
    for (Index i = 0; i < chain.states(); ++i) total += chain.orbit_count(i);
    const double n = 2.0 * (std::pow(2.0, depth + 1) - 1);
    CHECK(total == doctest::Approx(n * (n - 1)));
  }
}

TEST_CASE("pair chain conserves mass for the conservative variant") {
  // Function side: evolving the constant function must return it unchanged.
  PairChain chain(4, /*killed=*/false);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(chain.states());
  Eigen::VectorXd evolved = chain.evolve(ones, 2.0, 1e-13);
  CHECK((evolved - ones).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("window covariance sum matches the direct pair integral") {
  // Small tree where the full pair space is tractable: integrate
  // sum_{x,y in W} V_killed(s) Delta directly and compare with the quotient.
  const int depth = 3;
  kernels::Kernel tree = kernels::build_binary_tree(depth);
  kernels::HarmonicProfile alpha = kernels::tree_alpha(tree, 0.0, 1.0);
  auto in_window = [&](Side s, int l) { return s == Side::kLeft && l < 2; };

  dualcorr::TwoParticleGenerator full(tree, dualcorr::Variant::kExclusion, true);
  dualcorr::PairField u = dualcorr::delta_field(tree, alpha);
  double direct = 0;
  const double step = 0.125;
  double g_prev = 0;
  auto window_sum = [&](const dualcorr::PairField& f) {
    double s = 0;
    for (Index x = 0; x < tree.size(); ++x)
      for (Index y = 0; y < tree.size(); ++y) {
        if (x == y) continue;
        const auto& sx = tree.sites[static_cast<std::size_t>(x)];
        const auto& sy = tree.sites[static_cast<std::size_t>(y)];
        if (in_window(sx.side, sx.level) && in_window(sy.side, sy.level))
          s += f(x, y);
      }
    return s;
  };
  g_prev = window_sum(u);
  double horizon = 0;
  while (horizon < 400) {
    dualcorr::PairField mid = full.apply(u, step / 2, 1e-13);
    dualcorr::PairField next = full.apply(mid, step / 2, 1e-13);
    direct += step / 6 * (g_prev + 4 * window_sum(mid) + window_sum(next));
    u = next;
    g_prev = window_sum(u);
    horizon += step;
    if (g_prev < 1e-14) break;
  }

  auto quotient = tree_window_covariance_sum(depth, 0.0, 1.0, in_window, 1e-12);
  CHECK(quotient.covariance_sum == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("window variance ratio stays at or below one") {
  auto window = [](Side s, int l) { return s == Side::kLeft && l < 4; };
  WindowVarianceResult var = tree_window_variance(10, 0.0, 1.0, window, 1e-9);
  CHECK(var.ratio <= 1.0 + 1e-10);
  CHECK(var.ratio > 0.0);
  CHECK(var.variance > 0.0);
  CHECK(var.bernoulli_sum > 0.0);
}
