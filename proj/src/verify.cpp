#include "sep/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <thread>

#include "sep/dualcorr.hpp"
#include "sep/exactevolve.hpp"
#include "sep/genpoly.hpp"
#include "sep/kernels.hpp"
#include "sep/quadrature.hpp"
#include "sep/rng.hpp"
#include "sep/simulate.hpp"
#include "sep/stats.hpp"
#include "sep/treequotient.hpp"

namespace sep::verify {

namespace {

using Clock = std::chrono::steady_clock;

struct Timer {
  Clock::time_point start = Clock::now();
  double seconds() const {
    return std::chrono::duration<double>(Clock::now() - start).count();
  }
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void parallel_replicas(std::int64_t n, int jobs,
                       const std::function<void(std::int64_t)>& body) {
  std::atomic<std::int64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::int64_t r = next.fetch_add(1);
      if (r >= n) return;
      body(r);
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Brute-force stability oracle: maximize Im of the root locus
// z(w) = -(a + c w)/(b + d w) over the upper half-plane by grid sampling and
// pattern-search refinement. Independent of the closed-form criterion.
// ---------------------------------------------------------------------------

struct OracleVerdict {
  bool stable = false;
  double sup_im = 0.0;
};

OracleVerdict stability_oracle(genpoly::PairCoefficients pc) {
  using C = std::complex<double>;
  double scale = std::max({std::abs(pc.a), std::abs(pc.b), std::abs(pc.c),
                           std::abs(pc.d)});
  pc.a /= scale;
  pc.b /= scale;
  pc.c /= scale;
  pc.d /= scale;
  const C a = pc.a, b = pc.b, c = pc.c, d = pc.d;

  // Degenerate: no z dependence.
  if (std::abs(b) < 1e-14 && std::abs(d) < 1e-14) {
    if (std::abs(c) < 1e-14) return {true, -1.0};  // nonzero constant
    const double im = (-a / c).imag();
    return {im <= 0, im};
  }
  // Simultaneous root of b + dw and a + cw: h vanishes for every z there.
  if (std::abs(b * c - a * d) < 1e-13 && std::abs(d) > 1e-14) {
    const double im = (-b / d).imag();
    if (im > 1e-9) return {false, std::numeric_limits<double>::infinity()};
  }

  auto im_root = [&](C w) {
    const C den = b + d * w;
    if (std::abs(den) < 1e-300) return -std::numeric_limits<double>::infinity();
    return (-(a + c * w) / den).imag();
  };

  double best = -std::numeric_limits<double>::infinity();
  C best_w;
  auto consider = [&](C w) {
    const double v = im_root(w);
    if (v > best) {
      best = v;
      best_w = w;
    }
  };
  // Grid: tan-spaced real part, log-spaced imaginary part (plus ~real axis).
  for (int i = 0; i <= 72; ++i) {
    const double theta = (static_cast<double>(i) / 72 - 0.5) * 3.0;
    const double x = std::tan(theta);
    consider(C(x, 1e-9));
    for (int j = -7; j <= 7; ++j) consider(C(x, std::pow(10.0, j)));
  }
  // Pattern-search refinement around the best grid point.
  double hx = std::max(1.0, std::abs(best_w.real())) * 0.5;
  double hy = std::max(best_w.imag() * 0.5, 1e-10);
  for (int iter = 0; iter < 120; ++iter) {
    const C base = best_w;
    bool improved = false;
    for (const C& cand :
         {base + C(hx, 0), base - C(hx, 0), base + C(0, hy), base - C(0, hy)}) {
      if (cand.imag() <= 0) continue;
      const double v = im_root(cand);
      if (v > best) {
        best = v;
        best_w = cand;
        improved = true;
      }
    }
    if (!improved) {
      hx *= 0.5;
      hy *= 0.5;
      if (hx < 1e-12 && hy < 1e-14) break;
    }
  }
  return {best <= 1e-9, best};
}

genpoly::SubsetDistribution random_product_mix(int n, int mixes,
                                               rng::Stream& stream) {
  std::vector<double> alphas(static_cast<std::size_t>(n));
  for (auto& a : alphas) a = stream.uniform01();
  genpoly::SubsetDistribution dist = genpoly::from_product(alphas);
  for (int m = 0; m < mixes; ++m) {
    const int i = static_cast<int>(stream.below(static_cast<std::uint64_t>(n)));
    int j = static_cast<int>(stream.below(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    dist = genpoly::transposition_mix(dist, i, j, stream.uniform01());
  }
  return dist;
}

}  // namespace

// --- 1 -----------------------------------------------------------------------

CheckResult pair_stability_equivalence(const Options& opts) {
  Timer timer;
  CheckResult res{"pair stability criterion vs root-locus oracle", true, {}, 0};
  rng::Stream stream = rng::Stream::for_key(opts.seed, 0x501);
  int tested = 0, agreed = 0, skipped = 0;
  while (tested < 500) {
    genpoly::PairCoefficients pc;
    auto rand_c = [&] {
      return std::complex<double>(stream.normal(), stream.normal());
    };
    pc.a = rand_c();
    pc.b = rand_c();
    pc.c = rand_c();
    pc.d = rand_c();
    genpoly::StabilityReport rep = genpoly::pair_stability(pc, 1e-12);
    double min_abs_slack = std::numeric_limits<double>::infinity();
    for (double s : rep.slack) min_abs_slack = std::min(min_abs_slack, std::abs(s));
    (void)min_abs_slack;
    double signed_margin = std::numeric_limits<double>::infinity();
    for (double s : rep.slack) signed_margin = std::min(signed_margin, s);
    if (std::abs(signed_margin) <= 1e-9) {
      ++skipped;
      continue;  // boundary draw, excluded from the count
    }
    ++tested;
    OracleVerdict oracle = stability_oracle(pc);
    if (oracle.stable == rep.stable) {
      ++agreed;
    } else {
      res.pass = false;
      res.lines.push_back("disagreement: slack=" + fmt(signed_margin) +
                          " oracle_sup_im=" + fmt(oracle.sup_im));
    }
  }
  // Constructed near-boundary cases: positive real quadruples sit on several
  // boundary hyperplanes at once; they must be flagged, not asserted.
  int flagged = 0;
  for (int k = 0; k < 100; ++k) {
    genpoly::PairCoefficients pc;
    pc.a = std::abs(stream.normal());
    pc.b = std::abs(stream.normal());
    pc.c = std::abs(stream.normal());
    pc.d = 0.0;  // bc - ad = bc >= 0: slack zero exactly
    genpoly::StabilityReport rep = genpoly::pair_stability(pc, 1e-9);
    if (rep.boundary) ++flagged;
  }
  res.lines.push_back("random quadruples tested=" + std::to_string(tested) +
                      " agreed=" + std::to_string(agreed) +
                      " boundary_draws_skipped=" + std::to_string(skipped));
  res.lines.push_back("constructed boundary cases flagged=" +
                      std::to_string(flagged) + "/100");
  if (agreed != tested) res.pass = false;
  if (flagged != 100) {
    res.pass = false;
    res.lines.push_back("some constructed boundary cases were not flagged");
  }
  res.seconds = timer.seconds();
  return res;
}

// --- 2 -----------------------------------------------------------------------

CheckResult rayleigh_preservation(const Options& opts) {
  Timer timer;
  CheckResult res{"transposition mixing preserves strong Rayleigh", true, {}, 0};
  rng::Stream stream = rng::Stream::for_key(opts.seed, 0x502);
  double worst_rayleigh = 0, worst_margin = 0, worst_cov = -1;
  const std::int64_t trials = opts.replicas > 0 ? opts.replicas : 200;
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    const int n = 2 + static_cast<int>(stream.below(5));
    const int mixes = 3 + static_cast<int>(stream.below(18));
    genpoly::SubsetDistribution dist = random_product_mix(n, mixes, stream);

    auto points = genpoly::default_rayleigh_points(n, 100, stream.next_u64());
    auto rep = genpoly::rayleigh_check(dist, points, genpoly::all_pairs(n), 1e-12);
    worst_rayleigh = std::min(worst_rayleigh, rep.min_value);
    if (!rep.passed) res.pass = false;

    auto rr = genpoly::real_rooted(genpoly::diagonalize(dist), 1e-8);
    worst_margin = std::max(worst_margin, rr.margin);
    if (!rr.real_rooted) res.pass = false;

    for (auto [i, j] : genpoly::all_pairs(n)) {
      const double cov = genpoly::pairwise_covariance(dist, i, j);
      worst_cov = std::max(worst_cov, cov);
      if (cov > 1e-10) res.pass = false;
    }
  }
  res.lines.push_back("trials=" + std::to_string(trials) +
                      " min rayleigh value=" + fmt(worst_rayleigh, 3) +
                      " (needs >= -1e-12)");
  res.lines.push_back("max real-root margin=" + fmt(worst_margin, 3) +
                      " (needs <= 1e-8)");
  res.lines.push_back("max pairwise covariance=" + fmt(worst_cov, 3) +
                      " (needs <= 1e-10)");
  res.seconds = timer.seconds();
  return res;
}

// --- 3 -----------------------------------------------------------------------

CheckResult exact_vs_monte_carlo(const Options& opts) {
  Timer timer;
  CheckResult res{"master equation vs stirring Monte Carlo", true, {}, 0};
  kernels::Kernel path = kernels::build_line_range(0, 5, kernels::nearest_neighbor_law());
  const std::vector<double> alpha{0.8, 0.6, 0.5, 0.5, 0.4, 0.2};
  Eigen::VectorXd av(6);
  for (int i = 0; i < 6; ++i) av(i) = alpha[static_cast<std::size_t>(i)];
  kernels::HarmonicProfile prof = kernels::explicit_alpha(path, av);
  const double t = opts.t > 0 ? opts.t : 1.0;

  auto gen = exactevolve::build_generator(path);
  genpoly::SubsetDistribution exact =
      exactevolve::evolve(genpoly::from_product(alpha), gen, t, 1e-13);

  const std::int64_t n_rep = opts.replicas > 0 ? opts.replicas : 100000;
  simulate::StirringEngine engine(path);
  std::vector<std::atomic<std::int64_t>> counts(64);
  parallel_replicas(n_rep, opts.jobs, [&](std::int64_t r) {
    rng::Stream stream = rng::Stream::for_key(opts.seed, static_cast<std::uint64_t>(r));
    simulate::Configuration cfg = simulate::sample_product(prof, stream);
    engine.evolve(cfg, t, stream);
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < cfg.size(); ++i)
      if (cfg[i]) mask |= std::uint64_t{1} << i;
    counts[mask].fetch_add(1, std::memory_order_relaxed);
  });
  double tv = 0;
  for (int m = 0; m < 64; ++m) {
    const double emp = static_cast<double>(counts[static_cast<std::size_t>(m)].load()) /
                       static_cast<double>(n_rep);
    tv += std::abs(emp - exact.weights()(m));
  }
  tv *= 0.5;
  res.pass = tv < 0.02;
  res.lines.push_back("6-site path, t=" + fmt(t) + ", N=" + std::to_string(n_rep) +
                      ": TV(exact, empirical)=" + fmt(tv, 4) + " (needs < 0.02)");
  res.seconds = timer.seconds();
  return res;
}

// --- 4 -----------------------------------------------------------------------

CheckResult duality_one_point(const Options& opts) {
  Timer timer;
  (void)opts;
  CheckResult res{"one-point duality against the heat kernel", true, {}, 0};
  kernels::Kernel path = kernels::build_line_range(0, 7, kernels::nearest_neighbor_law());
  auto gen = exactevolve::build_generator(path);
  const std::uint64_t eta0 = 0b01001101;  // sites 0,2,3,6 occupied
  Eigen::VectorXd eta(8);
  for (int i = 0; i < 8; ++i) eta(i) = (eta0 >> i) & 1 ? 1.0 : 0.0;
  double worst = 0;
  for (double t : {0.5, 1.0, 2.0}) {
    genpoly::SubsetDistribution evolved =
        exactevolve::evolve(genpoly::point_mass(8, eta0), gen, t, 1e-14);
    Eigen::VectorXd marginals = exactevolve::site_marginals(evolved);
    Eigen::MatrixXd pt = kernels::heat_kernel(path, t, 1e-14);
    Eigen::VectorXd dual = pt * eta;
    worst = std::max(worst, (marginals - dual).cwiseAbs().maxCoeff());
  }
  res.pass = worst < 1e-8;
  res.lines.push_back("8 sites, t in {0.5,1,2}: max |P(eta_t(x)=1) - sum_y p_t(x,y) eta(y)| = " +
                      fmt(worst, 3) + " (needs < 1e-8)");
  res.seconds = timer.seconds();
  return res;
}

// --- 5 -----------------------------------------------------------------------

CheckResult count_law_invariance(const Options& opts) {
  Timer timer;
  CheckResult res{"particle-count law invariance under evolution", true, {}, 0};
  rng::Stream stream = rng::Stream::for_key(opts.seed, 0x505);
  double worst = 0;
  // Random systems: paths and small trees, random product initials.
  for (int trial = 0; trial < 20; ++trial) {
    kernels::Kernel k = trial % 2 == 0
                            ? kernels::build_line_range(
                                  0, 2 + static_cast<std::int64_t>(stream.below(5)),
                                  kernels::nearest_neighbor_law())
                            : kernels::build_binary_tree(1);
    const int n = static_cast<int>(k.size());
    std::vector<double> alphas(static_cast<std::size_t>(n));
    for (auto& a : alphas) a = stream.uniform01();
    genpoly::SubsetDistribution dist = genpoly::from_product(alphas);
    auto gen = exactevolve::build_generator(k);
    for (double t : {0.3, 1.7}) {
      genpoly::SubsetDistribution evolved = exactevolve::evolve(dist, gen, t, 1e-14);
      genpoly::UnivariatePoly before = genpoly::diagonalize(dist);
      genpoly::UnivariatePoly after = genpoly::diagonalize(evolved);
      worst = std::max(worst, (before.coeffs - after.coeffs).cwiseAbs().maxCoeff());
    }
    // Stirring-product route must preserve the count law exactly as well.
    genpoly::SubsetDistribution trotter =
        exactevolve::evolve_stirring_products(dist, gen, 0.7, 5);
    worst = std::max(
        worst, (genpoly::diagonalize(dist).coeffs - genpoly::diagonalize(trotter).coeffs)
                   .cwiseAbs()
                   .maxCoeff());
  }
  res.pass = worst <= 1e-12;
  res.lines.push_back("max per-coefficient drift of the count law = " + fmt(worst, 3) +
                      " (needs <= 1e-12)");
  res.seconds = timer.seconds();
  return res;
}

// --- 6 -----------------------------------------------------------------------

CheckResult covariance_formula(const Options& opts) {
  Timer timer;
  CheckResult res{"dual covariance integral vs master equation", true, {}, 0};
  struct Case {
    kernels::Kernel kernel;
    kernels::HarmonicProfile alpha;
    std::string name;
  };
  std::vector<Case> cases;
  {
    kernels::Kernel k = kernels::build_line_range(0, 2, kernels::nearest_neighbor_law());
    cases.push_back({k, kernels::line_alpha(k, 0.0, 1.0), "3-site path, linear"});
  }
  {
    kernels::Kernel k = kernels::build_line_range(0, 5, kernels::nearest_neighbor_law());
    cases.push_back({k, kernels::line_alpha(k, 0.1, 0.8), "6-site path, linear"});
  }
  {
    kernels::Kernel k = kernels::build_line_range(0, 5, kernels::nearest_neighbor_law());
    Eigen::VectorXd v(6);
    v << 0.9, 0.2, 0.7, 0.4, 0.55, 0.35;
    cases.push_back({k, kernels::explicit_alpha(k, v), "6-site path, irregular"});
  }
  {
    kernels::Kernel k = kernels::build_line(5, kernels::nearest_neighbor_law());
    cases.push_back({k, kernels::line_alpha(k, 0.0, 1.0), "11-site line"});
  }
  {
    kernels::Kernel k = kernels::build_binary_tree(1);
    cases.push_back({k, kernels::tree_alpha(k, 0.0, 1.0), "depth-1 tree"});
  }
  double worst = 0;
  for (const auto& cse : cases) {
    auto gen = exactevolve::build_generator(cse.kernel);
    std::vector<double> alphas(cse.alpha.values.data(),
                               cse.alpha.values.data() + cse.alpha.values.size());
    genpoly::SubsetDistribution stat = exactevolve::stationary_limit(
        genpoly::from_product(alphas), gen, 1e-12);
    Eigen::MatrixXd moments = exactevolve::pair_moments(stat);
    Eigen::VectorXd marg = exactevolve::site_marginals(stat);

    dualcorr::DualOptions dopts;
    dopts.mode = dualcorr::DualMode::kTruncationExact;
    dopts.tol = 1e-9;
    dualcorr::DualCovMatrixResult dual =
        dualcorr::stationary_neg_covariance_all(cse.kernel, cse.alpha, dopts);

    double case_worst = 0;
    const int n = static_cast<int>(cse.kernel.size());
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        if (x == y) continue;
        const double cov_master = moments(x, y) - marg(x) * marg(y);
        case_worst = std::max(case_worst,
                              std::abs(dual.neg_covariance(x, y) + cov_master));
      }
    }
    worst = std::max(worst, case_worst);
    res.lines.push_back(cse.name + ": max |dual + Cov| = " + fmt(case_worst, 3) +
                        (dual.diagnostics.monitor_ok ? " (monitor ok)" : " (monitor FAILED)"));
    if (!dual.diagnostics.monitor_ok) res.pass = false;
  }
  if (worst > 1e-5) res.pass = false;
  res.lines.push_back("overall max deviation = " + fmt(worst, 3) + " (needs <= 1e-5)");
  res.seconds = timer.seconds();
  (void)opts;
  return res;
}

// --- 7 -----------------------------------------------------------------------

CheckResult paper_constants(const Options& opts) {
  Timer timer;
  (void)opts;
  CheckResult res{"tree constants: Green values, window sums, Dirichlet, 40/189",
                  true, {}, 0};

  // Green function on the materialized depth-20 killed tree.
  {
    const int depth = opts.depth > 0 ? opts.depth : 20;
    kernels::Kernel tree = kernels::build_binary_tree(depth);
    kernels::KilledKernel killed = kernels::killed_truncation(tree);
    const Index root = tree.site_at(kernels::Side::kLeft, 0, 0);
    Eigen::VectorXd g = kernels::green_column(killed, root, 1e-12);
    double worst = 0;
    for (int d = 0; d <= 10; ++d) {
      // Walk down the leftmost branch: distance d from the left root.
      const Index x = tree.site_at(kernels::Side::kLeft, d, 0);
      worst = std::max(worst, std::abs(g(x) - std::pow(2.0, 1 - d)));
    }
    const bool ok = worst < 1e-6;
    if (!ok) res.pass = false;
    res.lines.push_back(std::string(ok ? "[ok] " : "[FAIL] ") +
                        "G(x,y)=2^{1-d}, d<=10, depth-" + std::to_string(depth) +
                        " killed tree: max gap=" + fmt(worst, 3) + " (needs < 1e-6)");

    // Dirichlet sums on the same tree, 3x3 grid of (lambda, rho).
    double worst_phi = 0;
    for (double lam : {0.0, 0.5, 1.0}) {
      for (double rho : {0.0, 0.5, 1.0}) {
        const double phi =
            kernels::dirichlet_sum(tree, kernels::tree_alpha(tree, lam, rho)).value;
        worst_phi = std::max(worst_phi,
                             std::abs(phi - 2.0 * (rho - lam) * (rho - lam) / 9.0));
      }
    }
    const bool ok_phi = worst_phi < 1e-6;
    if (!ok_phi) res.pass = false;
    res.lines.push_back(std::string(ok_phi ? "[ok] " : "[FAIL] ") +
                        "Phi(alpha)=2(rho-lambda)^2/9 on 3x3 grid: max gap=" +
                        fmt(worst_phi, 3) + " (needs < 1e-6)");
  }

  // Window sums via the exact level collapse at depth 30 (truncation error
  // far below the 1e-4 tolerance there).
  {
    const int wdepth = 30;
    double worst_full = 0, worst_left = 0, worst_level = 0;
    for (int n = 1; n <= 8; ++n) {
      const auto full = treequotient::tree_window_green_sup(
          wdepth, [&](kernels::Side, int l) { return l < n; });
      worst_full = std::max(worst_full, std::abs(full.sup - 3.0 * n));
      const auto left = treequotient::tree_window_green_sup(
          wdepth, [&](kernels::Side s, int l) { return s == kernels::Side::kLeft && l < n; });
      worst_left = std::max(worst_left, std::abs(left.sup - 2.0 * n));
      const auto level = treequotient::tree_window_green_sup(
          wdepth, [&](kernels::Side s, int l) { return s == kernels::Side::kLeft && l == n; });
      worst_level = std::max(worst_level,
                             std::abs(level.sup - (3.0 - std::pow(2.0, -n))));
    }
    const bool ok_full = worst_full < 1e-4;
    if (!ok_full) res.pass = false;
    res.lines.push_back(std::string(ok_full ? "[ok] " : "[FAIL] ") +
                        "sup_x sum_{l(y)<n} G = 3n (n<=8): max gap=" + fmt(worst_full, 3) +
                        " (needs < 1e-4)");
    const bool ok_left = worst_left < 1e-4;
    if (!ok_left) res.pass = false;
    res.lines.push_back(std::string(ok_left ? "[ok] " : "[FAIL] ") +
                        "sup_x sum_{y in L, l<n} G = 2n (n<=8): max gap=" + fmt(worst_left, 3) +
                        " (needs < 1e-4; the true sup is 2.5n-1.5 for n>=4, attained at"
                        " level 1, so the quoted 2n fails for n>=4)");
    const bool ok_level = worst_level < 1e-4;
    if (!ok_level) res.pass = false;
    res.lines.push_back(std::string(ok_level ? "[ok] " : "[FAIL] ") +
                        "sup_x sum_{y in L, l=n} G = 3-2^{-n} (n<=8): max gap=" +
                        fmt(worst_level, 3) + " (needs < 1e-4)");
  }

  // Refined tree constant.
  {
    const auto refined = dualcorr::tree_refined_constant(0.0, 1.0, 40);
    const double target = 40.0 / 189.0;
    const double gap = std::abs(refined.value - target);
    const bool ok = gap < 1e-8 && refined.value < 1.0 / 3.0;
    if (!ok) res.pass = false;
    res.lines.push_back(std::string(ok ? "[ok] " : "[FAIL] ") +
                        "refined constant = 40/189: gap=" + fmt(gap, 3) +
                        " (needs < 1e-8), value < 1/3: " +
                        (refined.value < 1.0 / 3.0 ? "yes" : "no"));
  }
  res.seconds = timer.seconds();
  return res;
}

// --- 8 -----------------------------------------------------------------------

CheckResult variance_envelope(const Options& opts) {
  Timer timer;
  (void)opts;
  CheckResult res{"window variance envelope on the tree", true, {}, 0};
  const double lo = 23.0 / 189.0 - 0.02;
  const double hi = 1.0 / 3.0 + 0.02;
  for (int n = 6; n <= 10; ++n) {
    const int depth = opts.depth > 0 ? opts.depth : n + 10;
    auto window = [&](kernels::Side s, int l) {
      return s == kernels::Side::kLeft && l < n;
    };
    treequotient::WindowVarianceResult var =
        treequotient::tree_window_variance(depth, 0.0, 1.0, window, 1e-10);
    const double per_level = var.variance / n;
    const bool in_band = per_level >= lo && per_level <= hi;
    const bool ratio_ok = var.ratio <= 1.0 + 1e-10;
    if (!in_band || !ratio_ok) res.pass = false;
    res.lines.push_back("n=" + std::to_string(n) + " depth=" + std::to_string(depth) +
                        ": Var/n=" + fmt(per_level, 6) + " in [" + fmt(lo, 4) + "," +
                        fmt(hi, 4) + "] " + (in_band ? "yes" : "NO") +
                        ", ratio=" + fmt(var.ratio, 8) +
                        (ratio_ok ? " <= 1" : " RATIO FAIL") +
                        ", horizon=" + fmt(var.dual.horizon, 4));
  }
  res.seconds = timer.seconds();
  return res;
}

// --- 9 -----------------------------------------------------------------------

CheckResult flux_clt(const Options& opts) {
  Timer timer;
  CheckResult res{"flux statistic on the line: mean, variance envelope, normality",
                  true, {}, 0};
  const double t_final = opts.t > 0 ? opts.t : 1024.0;
  const std::int64_t n_rep = opts.replicas > 0 ? opts.replicas : 2000;
  std::vector<double> times;
  for (double t = t_final; t >= 64.0; t /= 4.0) times.push_back(t);
  std::sort(times.begin(), times.end());

  simulate::ExperimentSpec spec;
  const auto radius = static_cast<std::int64_t>(std::ceil(10.0 * std::sqrt(t_final)));
  spec.kernel_spec = "line:" + std::to_string(radius);
  spec.initial = simulate::InitialLaw::kStep;
  spec.statistic = simulate::Statistic::kWPlus;
  spec.t = t_final;
  spec.checkpoint_times = times;
  spec.replicas = n_rep;
  spec.master_seed = opts.seed;
  simulate::SampleSet set = simulate::run_experiment(spec, opts.jobs);

  stats::Envelope env = stats::flux_envelope(1.0);
  std::vector<double> gaps;
  for (std::size_t c = 0; c < times.size(); ++c) {
    std::vector<double> vals(set.samples[c].begin(), set.samples[c].end());
    stats::Moments m = stats::empirical_moments(vals);
    const double rt = std::sqrt(times[c]);
    const double gap = std::abs(m.mean / rt - env.mean_coeff);
    gaps.push_back(gap);
    const double var_rt = m.variance / rt;
    const bool var_ok =
        var_rt >= env.var_lower - 0.05 && var_rt <= env.var_upper + 0.05;
    if (!var_ok) res.pass = false;
    res.lines.push_back("t=" + fmt(times[c], 5) + ": mean/sqrt(t)=" + fmt(m.mean / rt, 5) +
                        " (target " + fmt(env.mean_coeff, 5) + ", gap " + fmt(gap, 4) +
                        "), Var/sqrt(t)=" + fmt(var_rt, 4) + " in [" +
                        fmt(env.var_lower - 0.05, 4) + "," + fmt(env.var_upper + 0.05, 4) +
                        "] " + (var_ok ? "yes" : "NO"));
  }
  const double final_rel_gap = gaps.back() / env.mean_coeff;
  if (final_rel_gap > 0.10) {
    res.pass = false;
    res.lines.push_back("mean gap at final t exceeds 10%");
  } else {
    res.lines.push_back("mean relative gap at t=" + fmt(times.back(), 5) + ": " +
                        fmt(100 * final_rel_gap, 3) + "% (needs <= 10%)");
  }
  if (gaps.size() >= 2) {
    // Monte Carlo noise on each gap: sd(W_t)/(sqrt(N) sqrt(t)).
    std::vector<double> first_vals(set.samples.front().begin(),
                                   set.samples.front().end());
    const double se_front =
        std::sqrt(stats::empirical_moments(first_vals).variance /
                  static_cast<double>(n_rep)) /
        std::sqrt(times.front());
    if (gaps.back() > gaps.front()) {
      res.pass = false;
      res.lines.push_back("mean gap did not shrink from t=" + fmt(times.front(), 5) +
                          " to t=" + fmt(times.back(), 5) + " (" +
                          fmt(gaps.front(), 4) + " -> " + fmt(gaps.back(), 4) +
                          "; per-gap noise ~" + fmt(se_front, 4) +
                          ", systematic shrink ~" +
                          fmt(env.mean_coeff / (8 * times.front()), 4) +
                          ": undersized at N=" + std::to_string(n_rep) + ")");
    } else {
      res.lines.push_back("mean gap shrank: " + fmt(gaps.front(), 4) + " -> " +
                          fmt(gaps.back(), 4) + " (per-gap noise ~" +
                          fmt(se_front, 4) + ")");
    }
  }
  {
    std::vector<double> vals(set.samples.back().begin(), set.samples.back().end());
    stats::NormalityReport norm = stats::normality_distance(vals);
    const bool ks_ok = norm.ks <= 0.05;
    if (!ks_ok) res.pass = false;
    res.lines.push_back(std::string(ks_ok ? "[ok] " : "[FAIL] ") + "KS at t=" +
                        fmt(times.back(), 5) + ": " + fmt(norm.ks, 4) +
                        " (needs <= 0.05); lattice spacing forces KS >= pmf/2 ~ " +
                        fmt(0.3989 / (2 * std::sqrt(vals.empty() ? 1.0
                                                                 : stats::empirical_moments(vals).variance)),
                            3) +
                        "; midpoint-corrected KS=" + fmt(norm.ks_midpoint, 4));
  }
  res.lines.push_back("boundary-clean replica fraction=" +
                      fmt(set.boundary_clean_fraction, 6) + " (monitor)");
  res.seconds = timer.seconds();
  return res;
}

// --- 10 ----------------------------------------------------------------------

CheckResult h_constant_check(const Options& opts) {
  Timer timer;
  CheckResult res{"exchange-probability constant H", true, {}, 0};
  stats::HConstant h = stats::h_constant(1e-10);
  const bool range_ok = h.value > 0.5 && h.value < 1.0;
  const bool refine_ok = h.refinement_gap < 1e-6;
  if (!range_ok || !refine_ok) res.pass = false;
  res.lines.push_back("H=" + fmt(h.value, 10) + " in (0.5,1): " +
                      (range_ok ? "yes" : "NO") +
                      ", refinement gap=" + fmt(h.refinement_gap, 3) +
                      " (needs < 1e-6)");

  // Monte Carlo oracle at 20 grid points, 1e6 normal triples each.
  rng::Stream stream = rng::Stream::for_key(opts.seed, 0x510);
  double worst_sigma = 0;
  for (int k = 1; k <= 20; ++k) {
    const double r = (static_cast<double>(k) - 0.5) / 20.0;
    const double c = std::sqrt(r / (2 * (1 - r)));
    const int m = 1000000;
    // h(r) is the sum of the two orthant probabilities (they overlap).
    std::int64_t hits = 0;
    double sq = 0;
    for (int i = 0; i < m; ++i) {
      const double n1 = stream.normal(), n2 = stream.normal(), n3 = stream.normal();
      const int v = (n2 <= c * n1 && n3 <= c * n1 ? 1 : 0) +
                    (n2 <= -c * n1 && n3 <= -c * n1 ? 1 : 0);
      hits += v;
      sq += v * v;
    }
    const double est = static_cast<double>(hits) / m;
    const double se = std::sqrt((sq / m - est * est) / m);
    const double target = stats::h_of_r(r);
    const double sigmas = std::abs(est - target) / se;
    worst_sigma = std::max(worst_sigma, sigmas);
    if (sigmas > 3.0) res.pass = false;
  }
  res.lines.push_back("Monte Carlo h(r) oracle, 20 grid points: worst deviation=" +
                      fmt(worst_sigma, 3) + " standard errors (needs <= 3)");
  res.seconds = timer.seconds();
  return res;
}

// --- 11 ----------------------------------------------------------------------

CheckResult poisson_window_limit(const Options& opts) {
  Timer timer;
  CheckResult res{"window sums approach Poisson(1/3) on the tree", true, {}, 0};
  const int depth = opts.depth > 0 ? opts.depth : 12;
  const double t_final = opts.t > 0 ? opts.t : 200.0;
  const std::int64_t n_rep = opts.replicas > 0 ? opts.replicas : 10000;
  const std::vector<int> levels = opts.level > 0 ? std::vector<int>{opts.level}
                                                 : std::vector<int>{6, 8, 10};

  // Exact duality predictor for the window means: E eta_t(x) = (P_t alpha)(x)
  // on the level-collapsed conservative walk.
  treequotient::WalkChain walk(depth, /*killed=*/false);
  Eigen::VectorXd alpha_t = walk.evolve(walk.tree_alpha(0.0, 1.0), t_final, 1e-12);
  for (int n : levels) {
    const double predicted =
        std::pow(2.0, n) * alpha_t(walk.id(kernels::Side::kLeft, n));
    res.lines.push_back("exact duality: E[window sum] at level " + std::to_string(n) +
                        " = " + fmt(predicted, 5) + " (target 1/3 = 0.33333)");
  }

  kernels::Kernel tree = kernels::build_binary_tree(depth);
  kernels::HarmonicProfile prof = kernels::tree_alpha(tree, 0.0, 1.0);
  std::vector<kernels::SiteWindow> windows;
  for (int n : levels)
    windows.push_back(kernels::SiteWindow::tree_level_equal(tree, n, kernels::Side::kLeft));

  simulate::StirringEngine engine(tree);
  std::vector<std::vector<std::int64_t>> samples(
      windows.size(), std::vector<std::int64_t>(static_cast<std::size_t>(n_rep)));
  parallel_replicas(n_rep, opts.jobs, [&](std::int64_t r) {
    rng::Stream stream = rng::Stream::for_key(opts.seed, static_cast<std::uint64_t>(r));
    simulate::Configuration cfg = simulate::sample_product(prof, stream);
    engine.evolve(cfg, t_final, stream);
    for (std::size_t w = 0; w < windows.size(); ++w)
      samples[w][static_cast<std::size_t>(r)] = simulate::window_sum(cfg, windows[w]);
  });

  std::vector<double> tvs;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const double tv = stats::tv_poisson(samples[w], 1.0 / 3.0);
    tvs.push_back(tv);
    res.lines.push_back("level " + std::to_string(levels[w]) + ": TV to Poisson(1/3) = " +
                        fmt(tv, 4));
  }
  bool nonincreasing = true;
  for (std::size_t w = 1; w < tvs.size(); ++w)
    if (tvs[w] > tvs[w - 1] + 1e-12) nonincreasing = false;
  const bool final_ok = tvs.back() <= 0.05;
  if (levels.size() > 1 && !nonincreasing) {
    res.pass = false;
    res.lines.push_back("TV is not nonincreasing across the window levels");
  }
  if (!final_ok) {
    res.pass = false;
    res.lines.push_back("TV at the last level exceeds 0.05");
  }
  res.lines.push_back("note: at depth " + std::to_string(depth) + ", t=" + fmt(t_final, 5) +
                      " the boundary reflects occupation back into the windows (see the"
                      " exact-duality means above); deeper trees restore the limit");
  res.seconds = timer.seconds();
  return res;
}

CheckResult run_criterion(int id, const Options& opts) {
  switch (id) {
    case 1: return pair_stability_equivalence(opts);
    case 2: return rayleigh_preservation(opts);
    case 3: return exact_vs_monte_carlo(opts);
    case 4: return duality_one_point(opts);
    case 5: return count_law_invariance(opts);
    case 6: return covariance_formula(opts);
    case 7: return paper_constants(opts);
    case 8: return variance_envelope(opts);
    case 9: return flux_clt(opts);
    case 10: return h_constant_check(opts);
    case 11: return poisson_window_limit(opts);
    default:
      throw Error(ErrorCode::kValidation, "run_criterion: id must be 1..11");
  }
}

int criterion_count() { return 11; }

}  // namespace sep::verify
