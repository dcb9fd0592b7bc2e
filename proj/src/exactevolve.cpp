#include "sep/exactevolve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace sep::exactevolve {

ExclusionGenerator build_generator(const kernels::Kernel& k, int site_cap) {
  require(k.size() <= site_cap, "build_generator: site count over cap");
  ExclusionGenerator gen;
  gen.n = static_cast<int>(k.size());
  for (Index x = 0; x < k.size(); ++x) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
         it; ++it) {
      if (it.col() <= x || it.value() <= 0) continue;
      gen.edges.push_back(Edge{static_cast<int>(x), static_cast<int>(it.col()),
                               it.value()});
    }
  }
  std::sort(gen.edges.begin(), gen.edges.end(), [](const Edge& l, const Edge& r) {
    return std::pair(l.a, l.b) < std::pair(r.a, r.b);
  });
  for (const Edge& e : gen.edges) gen.total_rate += e.rate;
  return gen;
}

namespace {

// w'(A) = sum_e (rate_e / Lambda) w(swap_e A): one application of the
// uniformized transition operator, matrix-free.
void apply_uniformized(const ExclusionGenerator& gen, const Eigen::VectorXd& in,
                       Eigen::VectorXd& out) {
  out.setZero();
  for (const Edge& e : gen.edges) {
    const double r = e.rate / gen.total_rate;
    const std::uint64_t ba = std::uint64_t{1} << e.a;
    const std::uint64_t bb = std::uint64_t{1} << e.b;
    const std::uint64_t both = ba | bb;
    for (Index mask = 0; mask < in.size(); ++mask) {
      const auto m = static_cast<std::uint64_t>(mask);
      const std::uint64_t bits = m & both;
      const std::uint64_t src = (bits == 0 || bits == both) ? m : m ^ both;
      out(mask) += r * in(static_cast<Index>(src));
    }
  }
}

}  // namespace

genpoly::SubsetDistribution evolve(const genpoly::SubsetDistribution& dist,
                                   const ExclusionGenerator& gen, double t,
                                   double tol, EvolveInfo* info) {
  require(t >= 0, "evolve: t must be >= 0");
  require(gen.n == dist.n(), "evolve: generator/distribution size mismatch");
  if (t == 0 || gen.total_rate == 0) {
    if (info) *info = EvolveInfo{};
    return dist;
  }
  const double lt = gen.total_rate * t;
  Eigen::VectorXd term = dist.weights();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(term.size());
  Eigen::VectorXd next(term.size());
  double log_w = -lt;
  double cum = 0;
  int m = 0;
  const int max_terms = static_cast<int>(lt + 12 * std::sqrt(lt + 1) + 64);
  for (; m <= max_terms; ++m) {
    const double w = std::exp(log_w);
    acc += w * term;
    cum += w;
    if (1.0 - cum <= tol) break;
    apply_uniformized(gen, term, next);
    term.swap(next);
    log_w += std::log(lt) - std::log(static_cast<double>(m + 1));
  }
  if (info) {
    info->terms = m;
    info->renormalization = 1.0 - acc.sum();
    info->min_weight = acc.minCoeff();
  }
  acc /= acc.sum();
  return genpoly::SubsetDistribution(dist.n(), std::move(acc));
}

genpoly::SubsetDistribution evolve_stirring_products(
    const genpoly::SubsetDistribution& dist, const ExclusionGenerator& gen,
    double t, int steps) {
  require(steps >= 1, "evolve_stirring_products: steps must be >= 1");
  require(gen.n == dist.n(), "evolve_stirring_products: size mismatch");
  const double delta = t / steps;
  genpoly::SubsetDistribution current = dist;
  for (int s = 0; s < steps; ++s) {
    for (const Edge& e : gen.edges) {
      // Probability of an even number of stirs of this edge over delta.
      const double p = 0.5 * (1.0 + std::exp(-2.0 * e.rate * delta));
      current = genpoly::transposition_mix(current, e.a, e.b, p);
    }
  }
  return current;
}

genpoly::SubsetDistribution stationary_limit(
    const genpoly::SubsetDistribution& dist, const ExclusionGenerator& gen,
    double tol, StationaryInfo* info) {
  genpoly::SubsetDistribution current = dist;
  double horizon = 1.0;
  double total = 0.0;
  for (int iter = 0; iter < 48; ++iter) {
    genpoly::SubsetDistribution next = evolve(current, gen, horizon, 1e-13);
    const double change = next.total_variation(current);
    current = std::move(next);
    total += horizon;
    if (info) {
      info->horizon = total;
      info->last_tv_change = change;
    }
    if (change < tol) return current;
    horizon *= 2.0;
  }
  throw Error(ErrorCode::kNonConvergence,
              "stationary_limit: no convergence within the horizon cap");
}

Eigen::VectorXd site_marginals(const genpoly::SubsetDistribution& dist) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dist.n());
  const auto& w = dist.weights();
  for (Index mask = 0; mask < w.size(); ++mask) {
    auto bits = static_cast<std::uint64_t>(mask);
    while (bits) {
      m(std::countr_zero(bits)) += w(mask);
      bits &= bits - 1;
    }
  }
  return m;
}

Eigen::MatrixXd pair_moments(const genpoly::SubsetDistribution& dist) {
  const int n = dist.n();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  const auto& w = dist.weights();
  for (Index mask = 0; mask < w.size(); ++mask) {
    const auto m = static_cast<std::uint64_t>(mask);
    for (int i = 0; i < n; ++i) {
      if (!(m >> i & 1)) continue;
      for (int j = 0; j < n; ++j)
        if (m >> j & 1) e(i, j) += w(mask);
    }
  }
  return e;
}

}  // namespace sep::exactevolve
