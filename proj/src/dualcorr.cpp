#include "sep/dualcorr.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sep::dualcorr {

namespace {

Index pair_index(int n, Index x, Index y) { return x * n + y; }

Eigen::VectorXd flatten(const PairField& f) {
  Eigen::MatrixXd t = f.transpose();  // row-major flatten: (x,y) -> x*n+y
  return Eigen::Map<Eigen::VectorXd>(t.data(), t.size());
}

PairField unflatten(const Eigen::VectorXd& v, int n) {
  Eigen::MatrixXd t = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
  return t.transpose();
}

// exp(tQ) f by uniformization.
Eigen::VectorXd uniformized_exp(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& q, double lambda,
    const Eigen::VectorXd& f, double t, double tol) {
  if (t == 0) return f;
  Eigen::VectorXd term = f;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.size());
  const double lt = lambda * t;
  double log_w = -lt;
  double cum = 0;
  const int max_terms = static_cast<int>(lt + 12 * std::sqrt(lt + 1) + 64);
  for (int m = 0; m <= max_terms; ++m) {
    const double w = std::exp(log_w);
    acc += w * term;
    cum += w;
    if (1.0 - cum <= tol) break;
    term += q * term / lambda;
    log_w += std::log(lt) - std::log(static_cast<double>(m + 1));
  }
  return acc;
}

}  // namespace

TwoParticleGenerator::TwoParticleGenerator(const kernels::Kernel& k,
                                           Variant variant, bool killed)
    : n_(static_cast<int>(k.size())), variant_(variant), killed_(killed) {
  require(n_ >= 2, "TwoParticleGenerator: need at least two sites");
  require(static_cast<double>(n_) * n_ < 4.2e6,
          "TwoParticleGenerator: pair space too large; use the tree quotient");
  const Index m = static_cast<Index>(n_) * n_;
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> outflow(static_cast<std::size_t>(m), 0.0);
  auto add = [&](Index from, Index to, double r) {
    trips.emplace_back(from, to, r);
    outflow[static_cast<std::size_t>(from)] += r;
  };

  if (variant == Variant::kExclusion) {
    // Stirring form: each edge swaps the contents of its endpoints.
    for (Index a = 0; a < n_; ++a) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, a);
           it; ++it) {
        const Index b = it.col();
        if (b <= a || it.value() <= 0) continue;
        const double r = it.value();
        for (Index x = 0; x < n_; ++x) {
          for (Index y = 0; y < n_; ++y) {
            if (x == y) continue;
            Index nx = x == a ? b : x == b ? a : x;
            Index ny = y == a ? b : y == b ? a : y;
            if (nx == x && ny == y) continue;
            add(pair_index(n_, x, y), pair_index(n_, nx, ny), r);
          }
        }
      }
    }
  } else {
    // Independent walkers; collisions allowed, diagonal states active.
    for (Index x = 0; x < n_; ++x) {
      for (Index y = 0; y < n_; ++y) {
        const Index from = pair_index(n_, x, y);
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
             it; ++it) {
          if (it.col() == x || it.value() <= 0) continue;
          add(from, pair_index(n_, it.col(), y), it.value());
        }
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, y);
             it; ++it) {
          if (it.col() == y || it.value() <= 0) continue;
          add(from, pair_index(n_, x, it.col()), it.value());
        }
      }
    }
  }

  if (killed) {
    for (Index x = 0; x < n_; ++x) {
      for (Index y = 0; y < n_; ++y) {
        const double death = k.escape(x) + k.escape(y);
        if (death > 0) outflow[static_cast<std::size_t>(pair_index(n_, x, y))] += death;
      }
    }
  }

  lambda_ = 0;
  for (Index i = 0; i < m; ++i) {
    if (outflow[static_cast<std::size_t>(i)] > 0)
      trips.emplace_back(i, i, -outflow[static_cast<std::size_t>(i)]);
    lambda_ = std::max(lambda_, outflow[static_cast<std::size_t>(i)]);
  }
  lambda_ = std::max(lambda_, 1e-30);
  q_.resize(m, m);
  q_.setFromTriplets(trips.begin(), trips.end());
  q_.makeCompressed();
}

PairField TwoParticleGenerator::apply(const PairField& field, double t,
                                      double tol) const {
  require(field.rows() == n_ && field.cols() == n_,
          "TwoParticleGenerator::apply: field size mismatch");
  Eigen::VectorXd v = flatten(field);
  v = uniformized_exp(q_, lambda_, v, t, tol);
  return unflatten(v, n_);
}

PairField delta_field(const kernels::Kernel& k,
                      const kernels::HarmonicProfile& alpha) {
  require(alpha.values.size() == k.size(), "delta_field: size mismatch");
  const int n = static_cast<int>(k.size());
  PairField d = PairField::Zero(n, n);
  for (Index x = 0; x < n; ++x) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
         it; ++it) {
      if (it.col() == x || it.value() <= 0) continue;
      const double gap = alpha.values(x) - alpha.values(it.col());
      d(x, it.col()) = it.value() * gap * gap;
    }
  }
  return d;
}

PairField pair_semigroup_apply(const TwoParticleGenerator& gen,
                               const PairField& field, double t, double tol) {
  return gen.apply(field, t, tol);
}

namespace {

// Proxy mode: integral of V_killed(s) Delta with checkpointed Simpson, plus a
// boundary-occupation field evolved under the same semigroup.
struct ProxyIntegral {
  Eigen::MatrixXd integral;
  Eigen::MatrixXd integrand;      // V(T) Delta at the final horizon
  Eigen::MatrixXd boundary_prob;  // max over checkpoints of V(s) 1_boundary
  double horizon = 0.0;
};

ProxyIntegral proxy_integral(const kernels::Kernel& k,
                             const kernels::HarmonicProfile& alpha, double tol) {
  const int n = static_cast<int>(k.size());
  TwoParticleGenerator v(k, Variant::kExclusion, /*killed=*/true);
  Eigen::VectorXd u = flatten(delta_field(k, alpha));
  PairField bfield = PairField::Zero(n, n);
  for (Index x = 0; x < n; ++x)
    for (Index y = 0; y < n; ++y)
      if (x != y && (!k.is_interior(x) || !k.is_interior(y))) bfield(x, y) = 1.0;
  Eigen::VectorXd b = flatten(bfield);

  const double scale = std::max(u.maxCoeff(), 1e-300);
  const double step = 0.125;
  const double t_max = 5000.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(u.size());
  Eigen::VectorXd bmax = b;
  double horizon = 0;
  const auto& q = v.rates();
  const double lambda = v.uniformization_rate();
  while (horizon < t_max) {
    Eigen::VectorXd u_mid = uniformized_exp(q, lambda, u, step / 2, 1e-13);
    Eigen::VectorXd u_next = uniformized_exp(q, lambda, u_mid, step / 2, 1e-13);
    acc += step / 6.0 * (u + 4 * u_mid + u_next);
    u = std::move(u_next);
    b = uniformized_exp(q, lambda, b, step, 1e-13);
    bmax = bmax.cwiseMax(b);
    horizon += step;
    if (u.maxCoeff() < tol * scale * 1e-3) break;
  }
  ProxyIntegral res;
  res.integral = unflatten(acc, n);
  res.integrand = unflatten(u, n);
  res.boundary_prob = unflatten(bmax, n);
  res.horizon = horizon;
  return res;
}

// Exact mode: psi(T) = int_0^T V(T-u) Delta_u du on the conservative chain,
// where Delta_u is built from the heat-flowed profile. After the source dies
// the field is mixed to its flat limit, which is the exchangeable
// finite-truncation negative covariance.
struct ExactIntegral {
  Eigen::MatrixXd values;
  double horizon = 0.0;
  double residual_spread = 0.0;  // max - min at the end (should be ~0)
  double source_at_horizon = 0.0;
};

ExactIntegral exact_integral(const kernels::Kernel& k,
                             const kernels::HarmonicProfile& alpha, double tol) {
  const int n = static_cast<int>(k.size());
  TwoParticleGenerator v(k, Variant::kExclusion, /*killed=*/false);
  const auto& q = v.rates();
  const double lambda = v.uniformization_rate();

  // Single-particle heat flow of alpha, stepping in lockstep with the pair
  // field; Q1 = P - I acts at unit jump scale of the kernel rates.
  Eigen::SparseMatrix<double, Eigen::RowMajor> q1 = k.p;
  for (Index i = 0; i < n; ++i) q1.coeffRef(i, i) -= 1.0;
  Eigen::VectorXd a = alpha.values;

  auto delta_of = [&](const Eigen::VectorXd& prof) {
    PairField d = PairField::Zero(n, n);
    for (Index x = 0; x < n; ++x) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
           it; ++it) {
        if (it.col() == x || it.value() <= 0) continue;
        const double gap = prof(x) - prof(it.col());
        d(x, it.col()) = it.value() * gap * gap;
      }
    }
    return flatten(d);
  };

  const double step = 0.1;
  const double t_max = 20000.0;
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Index>(n) * n);
  double horizon = 0;
  Eigen::VectorXd src = delta_of(a);
  double source_norm = src.maxCoeff();
  const double source_floor = std::max(source_norm, 1e-12) * tol * 1e-3;
  // Simpson rule on the Duhamel source:
  //   psi(t+d) = V(d)[psi + d/6 Delta_t] + 2d/3 V(d/2) Delta_mid + d/6 Delta_next.
  while (horizon < t_max && source_norm > source_floor) {
    Eigen::VectorXd a_mid = uniformized_exp(q1, 1.0, a, step / 2, 1e-13);
    Eigen::VectorXd src_mid = delta_of(a_mid);
    a = uniformized_exp(q1, 1.0, a_mid, step / 2, 1e-13);
    Eigen::VectorXd src_next = delta_of(a);
    psi = uniformized_exp(q, lambda, psi + (step / 6.0) * src, step, 1e-13);
    psi += (2.0 * step / 3.0) *
           uniformized_exp(q, lambda, src_mid, step / 2, 1e-13);
    psi += (step / 6.0) * src_next;
    src = std::move(src_next);
    horizon += step;
    source_norm = src.maxCoeff();
  }
  ExactIntegral res;
  res.source_at_horizon = source_norm;
  // Mix to the flat limit with doubling horizons.
  double mix = 1.0;
  for (int iter = 0; iter < 40; ++iter) {
    Eigen::VectorXd next = uniformized_exp(q, lambda, psi, mix, 1e-13);
    double mx = -std::numeric_limits<double>::infinity();
    double mn = std::numeric_limits<double>::infinity();
    for (Index x = 0; x < n; ++x)
      for (Index y = 0; y < n; ++y)
        if (x != y) {
          const double val = next(pair_index(n, x, y));
          mx = std::max(mx, val);
          mn = std::min(mn, val);
        }
    psi = std::move(next);
    horizon += mix;
    res.residual_spread = mx - mn;
    if (res.residual_spread < tol) break;
    mix *= 2;
  }
  res.values = unflatten(psi, n);
  res.values.diagonal().setZero();
  res.horizon = horizon;
  return res;
}

}  // namespace

DualCovMatrixResult stationary_neg_covariance_all(
    const kernels::Kernel& k, const kernels::HarmonicProfile& alpha,
    const DualOptions& opts) {
  DualCovMatrixResult out;
  if (opts.mode == DualMode::kInfiniteProxy) {
    ProxyIntegral pi = proxy_integral(k, alpha, opts.tol);
    out.neg_covariance = pi.integral;
    out.neg_covariance.diagonal().setZero();
    out.diagnostics.horizon = pi.horizon;
    out.diagnostics.integrand_at_horizon = pi.integrand.maxCoeff();
    out.diagnostics.boundary_leak = pi.boundary_prob.maxCoeff();
    out.diagnostics.monitor_ok =
        out.diagnostics.integrand_at_horizon < opts.tol &&
        out.diagnostics.boundary_leak < 10 * opts.tol;
    if (opts.enforce_monitor && !out.diagnostics.monitor_ok) {
      throw Error(ErrorCode::kNumerical,
                  "stationary_neg_covariance: boundary felt before the dual "
                  "integrand decayed; deepen the truncation");
    }
  } else {
    ExactIntegral ei = exact_integral(k, alpha, opts.tol);
    out.neg_covariance = ei.values;
    out.diagnostics.horizon = ei.horizon;
    out.diagnostics.integrand_at_horizon = ei.source_at_horizon;
    out.diagnostics.boundary_leak = ei.residual_spread;
    out.diagnostics.monitor_ok = ei.residual_spread < std::max(opts.tol, 1e-12) * 10;
  }
  return out;
}

DualCovResult stationary_neg_covariance(const kernels::Kernel& k,
                                        const kernels::HarmonicProfile& alpha,
                                        Index x, Index y,
                                        const DualOptions& opts) {
  require(x != y, "stationary_neg_covariance: sites must differ");
  require(x >= 0 && x < k.size() && y >= 0 && y < k.size(),
          "stationary_neg_covariance: site out of range");
  DualCovMatrixResult all = stationary_neg_covariance_all(k, alpha, opts);
  DualCovResult res = all.diagnostics;
  res.value = all.neg_covariance(x, y);
  return res;
}

CovarianceBoundResult covariance_sum_bound(const kernels::Kernel& k,
                                           const kernels::HarmonicProfile& alpha,
                                           const kernels::SiteWindow& window,
                                           double tol) {
  const int n = static_cast<int>(k.size());
  kernels::KilledKernel killed = kernels::killed_truncation(k);
  require(killed.escape.sum() > 1e-12,
          "covariance_sum_bound: kernel has no boundary; bounds diverge",
          ErrorCode::kNumerical);

  CovarianceBoundResult res;

  // Coarse bound: Phi(alpha) * sup_x sum_{u in W} G(x, u).
  const double phi = kernels::dirichlet_sum(k, alpha).value;
  res.coarse_bound = phi * kernels::green_window_sup(killed, window).value;

  // Heat-kernel bound: sum Delta(x,y) int P^x(X_s in W) P^y(X_s in W) ds with
  // the killed single walker. w_s = P_s^killed 1_W evolves by uniformization.
  PairField delta = delta_field(k, alpha);
  Eigen::SparseMatrix<double, Eigen::RowMajor> q1 = killed.p;
  for (Index i = 0; i < n; ++i) q1.coeffRef(i, i) -= 1.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Index s : window.sites) w(s) = 1.0;

  auto integrand = [&](const Eigen::VectorXd& ws) {
    double total = 0;
    for (Index x = 0; x < n; ++x) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
           it; ++it) {
        if (it.col() == x || delta(x, it.col()) == 0) continue;
        total += delta(x, it.col()) * ws(x) * ws(it.col());
      }
    }
    return total;
  };

  const double step = 0.25;
  const double t_max = 5000.0;
  double g_prev = integrand(w);
  const double scale = std::max(g_prev, 1e-300);
  while (res.horizon < t_max) {
    Eigen::VectorXd w_mid = uniformized_exp(q1, 1.0, w, step / 2, 1e-13);
    Eigen::VectorXd w_next = uniformized_exp(q1, 1.0, w_mid, step / 2, 1e-13);
    const double g_mid = integrand(w_mid), g_next = integrand(w_next);
    res.heat_bound += step / 6.0 * (g_prev + 4 * g_mid + g_next);
    w = std::move(w_next);
    g_prev = g_next;
    res.horizon += step;
    if (g_prev < tol * scale * 1e-3) break;
  }
  return res;
}

RefinedConstantResult tree_refined_constant(double lambda, double rho,
                                            int level_cap) {
  require(level_cap >= 1, "tree_refined_constant: level_cap must be >= 1");
  RefinedConstantResult res;
  auto alpha_left = [&](int l) { return lambda + (rho - lambda) / (3.0 * std::pow(2.0, l)); };
  auto alpha_right = [&](int l) { return rho + (lambda - rho) / (3.0 * std::pow(2.0, l)); };

  // Basis edge, both orientations.
  {
    const double gap = alpha_left(0) - alpha_right(0);
    res.value += 2.0 * gap * gap * (1 - alpha_left(0)) * (1 - alpha_right(0));
  }
  double last = 0;
  for (int l = 0; l < level_cap; ++l) {
    const double count = 2.0 * std::pow(2.0, l + 1);  // ordered level-l edges
    const double gl = alpha_left(l) - alpha_left(l + 1);
    const double termL = count * gl * gl * (1 - alpha_left(l)) * (1 - alpha_left(l + 1));
    const double gr = alpha_right(l) - alpha_right(l + 1);
    const double termR = count * gr * gr * (1 - alpha_right(l)) * (1 - alpha_right(l + 1));
    res.value += termL + termR;
    last = termL + termR;
  }
  res.tail_estimate = last;  // terms decay at least geometrically with ratio 1/2
  return res;
}

VarianceRatioResult variance_ratio(const kernels::Kernel& k,
                                   const kernels::HarmonicProfile& alpha,
                                   const kernels::SiteWindow& window,
                                   const DualOptions& opts) {
  VarianceRatioResult res;
  for (Index s : window.sites)
    res.bernoulli_sum += alpha.values(s) * (1 - alpha.values(s));
  require(res.bernoulli_sum > 0, "variance_ratio: alpha degenerate on the window");
  DualCovMatrixResult all = stationary_neg_covariance_all(k, alpha, opts);
  res.diagnostics = all.diagnostics;
  double negcov_sum = 0;
  for (Index x : window.sites)
    for (Index y : window.sites)
      if (x != y) negcov_sum += all.neg_covariance(x, y);
  res.variance = res.bernoulli_sum - negcov_sum;
  res.ratio = res.variance / res.bernoulli_sum;
  return res;
}

}  // namespace sep::dualcorr
