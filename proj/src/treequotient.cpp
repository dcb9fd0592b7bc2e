#include "sep/treequotient.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <map>

namespace sep::treequotient {

namespace {

constexpr double kEdgeRate = 1.0 / 3.0;

// Uniformized action of exp(tQ) on f where Q has nonnegative off-diagonal
// rates and diagonal -(outflow). lambda must dominate every outflow.
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
    term = term + q * term / lambda;  // (I + Q/lambda) term
    log_w += std::log(lt) - std::log(static_cast<double>(m + 1));
  }
  return acc;
}

}  // namespace

WalkChain::WalkChain(int depth, bool killed) : depth_(depth), killed_(killed) {
  require(depth >= 0, "WalkChain: depth must be >= 0");
  const Index n = states();
  std::vector<Eigen::Triplet<double>> trips;
  for (int s = 0; s < 2; ++s) {
    Side side = s == 0 ? Side::kLeft : Side::kRight;
    for (int l = 0; l <= depth; ++l) {
      const Index i = id(side, l);
      if (l == 0) {
        trips.emplace_back(i, id(side == Side::kLeft ? Side::kRight : Side::kLeft, 0),
                           kEdgeRate);
      } else {
        trips.emplace_back(i, id(side, l - 1), kEdgeRate);
      }
      if (l < depth) {
        trips.emplace_back(i, id(side, l + 1), 2 * kEdgeRate);
      } else if (!killed) {
        trips.emplace_back(i, i, 2 * kEdgeRate);  // holding
      }
      // killed: 2/3 of the row is simply missing at the last level
    }
  }
  p_.resize(n, n);
  p_.setFromTriplets(trips.begin(), trips.end());
  p_.makeCompressed();
}

Eigen::VectorXd WalkChain::evolve(const Eigen::VectorXd& f, double t,
                                  double tol) const {
  // Q = P - I with unit jump rate.
  Eigen::SparseMatrix<double, Eigen::RowMajor> q = p_;
  for (Index i = 0; i < states(); ++i) q.coeffRef(i, i) -= 1.0;
  return uniformized_exp(q, 1.0, f, t, tol);
}

Eigen::VectorXd WalkChain::green_solve(const Eigen::VectorXd& rhs) const {
  require(killed_, "green_solve: killed chain required");
  Eigen::SparseMatrix<double> a(states(), states());
  Eigen::SparseMatrix<double> id(states(), states());
  id.setIdentity();
  a = id - Eigen::SparseMatrix<double>(p_);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  require(lu.info() == Eigen::Success, "green_solve: factorization failed",
          ErrorCode::kNumerical);
  return lu.solve(rhs);
}

Eigen::VectorXd WalkChain::tree_alpha(double lambda, double rho) const {
  Eigen::VectorXd a(states());
  for (int l = 0; l <= depth_; ++l) {
    const double scale = 3.0 * std::pow(2.0, l);
    a(id(Side::kLeft, l)) = lambda + (rho - lambda) / scale;
    a(id(Side::kRight, l)) = rho + (lambda - rho) / scale;
  }
  return a;
}

WindowGreenResult tree_window_green_sup(int depth, const OrbitPredicate& in_window,
                                        int min_boundary_distance) {
  WalkChain chain(depth, /*killed=*/true);
  Eigen::VectorXd rhs(chain.states());
  for (Index i = 0; i < chain.states(); ++i)
    rhs(i) = in_window(chain.side_of(i), chain.level_of(i)) ? 1.0 : 0.0;
  Eigen::VectorXd sums = chain.green_solve(rhs);
  WindowGreenResult res;
  for (Index i = 0; i < chain.states(); ++i) {
    if (depth - chain.level_of(i) < min_boundary_distance) continue;
    if (sums(i) > res.sup) {
      res.sup = sums(i);
      res.argmax_side = chain.side_of(i);
      res.argmax_level = chain.level_of(i);
    }
  }
  return res;
}

Eigen::VectorXd tree_green_from_root(int depth) {
  WalkChain chain(depth, /*killed=*/true);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(chain.states());
  e(chain.id(Side::kLeft, 0)) = 1.0;  // orbit (L,0) is the singleton root
  return chain.green_solve(e);
}

// --- PairChain ---------------------------------------------------------------

PairChain::PairChain(int depth, bool killed) : depth_(depth), killed_(killed) {
  require(depth >= 1, "PairChain: depth must be >= 1");
  // Enumerate orbits. Lookup key: cross ? (2, sx, lx, ly, 0)
  //                               : (sx, lx, ly, lm).
  const int d1 = depth + 1;
  auto key_same = [&](int s, int lx, int ly, int lm) {
    return ((s * d1 + lx) * d1 + ly) * d1 + lm;
  };
  auto key_cross = [&](int sx, int lx, int ly) {
    return 2 * d1 * d1 * d1 + (sx * d1 + lx) * d1 + ly;
  };
  lookup_.assign(static_cast<std::size_t>(2 * d1 * d1 * d1 + 2 * d1 * d1), -1);

  for (int s = 0; s < 2; ++s) {
    for (int lx = 0; lx <= depth; ++lx) {
      for (int ly = 0; ly <= depth; ++ly) {
        for (int lm = 0; lm <= std::min(lx, ly); ++lm) {
          if (lm == lx && lm == ly) continue;  // same site
          PairOrbit o;
          o.cross = false;
          o.sx = s == 0 ? Side::kLeft : Side::kRight;
          o.lx = lx;
          o.ly = ly;
          o.lm = lm;
          lookup_[static_cast<std::size_t>(key_same(s, lx, ly, lm))] =
              static_cast<Index>(orbits_.size());
          orbits_.push_back(o);
          double count;
          if (lm == lx) count = std::pow(2.0, ly);        // x ancestor of y
          else if (lm == ly) count = std::pow(2.0, lx);   // y ancestor of x
          else count = std::pow(2.0, lx + ly - lm - 1);   // proper split
          counts_.push_back(count);
        }
      }
    }
  }
  for (int sx = 0; sx < 2; ++sx) {
    for (int lx = 0; lx <= depth; ++lx) {
      for (int ly = 0; ly <= depth; ++ly) {
        PairOrbit o;
        o.cross = true;
        o.sx = sx == 0 ? Side::kLeft : Side::kRight;
        o.lx = lx;
        o.ly = ly;
        lookup_[static_cast<std::size_t>(key_cross(sx, lx, ly))] =
            static_cast<Index>(orbits_.size());
        orbits_.push_back(o);
        counts_.push_back(std::pow(2.0, lx + ly));
      }
    }
  }

  // Transition enumeration. Rates: every tree edge stirs at rate 1/3; a stir
  // of the edge (x,y) swaps the walkers; walkers at the last level lose the
  // two child edges (killed) or hold (conservative).
  build_trips_.clear();
  const Index n = states();
  std::vector<double> death(static_cast<std::size_t>(n), 0.0);

  auto idx_same = [&](Side s, int lx, int ly, int lm) {
    return lookup_[static_cast<std::size_t>(key_same(s == Side::kLeft ? 0 : 1, lx, ly, lm))];
  };
  auto idx_cross = [&](Side sx, int lx, int ly) {
    return lookup_[static_cast<std::size_t>(key_cross(sx == Side::kLeft ? 0 : 1, lx, ly))];
  };

  for (Index i = 0; i < n; ++i) {
    const PairOrbit o = orbits_[static_cast<std::size_t>(i)];
    const Side other = o.sx == Side::kLeft ? Side::kRight : Side::kLeft;
    auto rate_to = [&](Index j, double r) {
      require(j >= 0, "PairChain: missing target orbit");
      build_trips_.emplace_back(i, j, r);
    };

    if (!o.cross) {
      const bool x_anc = o.lm == o.lx;  // x on y's ancestral path
      const bool y_anc = o.lm == o.ly;
      const int dist = (o.lx - o.lm) + (o.ly - o.lm);

      // Stir of the joining edge swaps the walkers when adjacent.
      if (dist == 1) {
        rate_to(idx_same(o.sx, o.ly, o.lx, o.lm), kEdgeRate);
      }

      // --- x's parent edge ---
      if (o.lx == 0) {
        // side root: the parent slot crosses the basis
        rate_to(idx_cross(other, 0, o.ly), kEdgeRate);
      } else if (y_anc && o.lx - 1 == o.lm) {
        // parent is y's site: that edge is the swap, counted above
      } else if (x_anc) {
        rate_to(idx_same(o.sx, o.lx - 1, o.ly, o.lx - 1), kEdgeRate);
      } else if (o.lx - 1 == o.lm) {
        rate_to(idx_same(o.sx, o.lm, o.ly, o.lm), kEdgeRate);  // lands on the meet
      } else {
        rate_to(idx_same(o.sx, o.lx - 1, o.ly, o.lm), kEdgeRate);
      }

      // --- x's child edges ---
      if (o.lx < depth_) {
        if (x_anc) {
          // the on-path child is y itself when dist == 1 (swap edge)
          if (dist > 1) rate_to(idx_same(o.sx, o.lx + 1, o.ly, o.lx + 1), kEdgeRate);
          rate_to(idx_same(o.sx, o.lx + 1, o.ly, o.lx), kEdgeRate);  // off-path child
        } else {
          rate_to(idx_same(o.sx, o.lx + 1, o.ly, o.lm), 2 * kEdgeRate);
        }
      } else if (killed) {
        death[static_cast<std::size_t>(i)] += 2 * kEdgeRate;
      }

      // --- y's parent edge ---
      if (o.ly == 0) {
        rate_to(idx_cross(o.sx, o.lx, 0), kEdgeRate);
      } else if (x_anc && o.ly - 1 == o.lm) {
        // parent is x's site: the swap edge
      } else if (y_anc) {
        rate_to(idx_same(o.sx, o.lx, o.ly - 1, o.ly - 1), kEdgeRate);
      } else if (o.ly - 1 == o.lm) {
        rate_to(idx_same(o.sx, o.lx, o.lm, o.lm), kEdgeRate);
      } else {
        rate_to(idx_same(o.sx, o.lx, o.ly - 1, o.lm), kEdgeRate);
      }

      // --- y's child edges ---
      if (o.ly < depth_) {
        if (y_anc) {
          if (dist > 1) rate_to(idx_same(o.sx, o.lx, o.ly + 1, o.ly + 1), kEdgeRate);
          rate_to(idx_same(o.sx, o.lx, o.ly + 1, o.ly), kEdgeRate);
        } else {
          rate_to(idx_same(o.sx, o.lx, o.ly + 1, o.lm), 2 * kEdgeRate);
        }
      } else if (killed) {
        death[static_cast<std::size_t>(i)] += 2 * kEdgeRate;
      }
    } else {
      // cross-side pair; distance lx + ly + 1
      const bool adjacent = o.lx == 0 && o.ly == 0;
      if (adjacent) rate_to(idx_cross(other, 0, 0), kEdgeRate);  // basis swap

      // x moves
      if (o.lx > 0) {
        rate_to(idx_cross(o.sx, o.lx - 1, o.ly), kEdgeRate);
      } else if (!adjacent) {
        // x crosses the basis onto y's side root, becoming y's ancestor
        rate_to(idx_same(other, 0, o.ly, 0), kEdgeRate);
      }
      if (o.lx < depth_) rate_to(idx_cross(o.sx, o.lx + 1, o.ly), 2 * kEdgeRate);
      else if (killed) death[static_cast<std::size_t>(i)] += 2 * kEdgeRate;

      // y moves
      if (o.ly > 0) {
        rate_to(idx_cross(o.sx, o.lx, o.ly - 1), kEdgeRate);
      } else if (!adjacent) {
        // y crosses onto x's side root, becoming x's ancestor
        rate_to(idx_same(o.sx, o.lx, 0, 0), kEdgeRate);
      }
      if (o.ly < depth_) rate_to(idx_cross(o.sx, o.lx, o.ly + 1), 2 * kEdgeRate);
      else if (killed) death[static_cast<std::size_t>(i)] += 2 * kEdgeRate;
    }
  }

  // Assemble generator with diagonal -(outflow + death).
  std::vector<double> outflow(static_cast<std::size_t>(n), 0.0);
  for (const auto& t : build_trips_) outflow[static_cast<std::size_t>(t.row())] += t.value();
  for (Index i = 0; i < n; ++i)
    build_trips_.emplace_back(i, i,
                              -(outflow[static_cast<std::size_t>(i)] +
                                death[static_cast<std::size_t>(i)]));
  q_.resize(n, n);
  q_.setFromTriplets(build_trips_.begin(), build_trips_.end());
  q_.makeCompressed();
  build_trips_.clear();
}

Index PairChain::index_of(const PairOrbit& o) const {
  const int d1 = depth_ + 1;
  std::size_t key;
  if (o.cross) {
    key = static_cast<std::size_t>(2 * d1 * d1 * d1 +
                                   ((o.sx == Side::kLeft ? 0 : 1) * d1 + o.lx) * d1 + o.ly);
  } else {
    key = static_cast<std::size_t>(
        (((o.sx == Side::kLeft ? 0 : 1) * d1 + o.lx) * d1 + o.ly) * d1 + o.lm);
  }
  Index i = lookup_[key];
  require(i >= 0, "PairChain: orbit not found");
  return i;
}

Eigen::VectorXd PairChain::evolve(const Eigen::VectorXd& f, double t,
                                  double tol) const {
  // Jump rate per walker is at most 1, so 2 + kill margin dominates.
  return uniformized_exp(q_, 2.0 + 1e-9, f, t, tol);
}

Eigen::VectorXd PairChain::delta_field(double lambda, double rho) const {
  WalkChain walk(depth_, false);
  Eigen::VectorXd alpha = walk.tree_alpha(lambda, rho);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(states());
  for (Index i = 0; i < states(); ++i) {
    const PairOrbit& o = orbits_[static_cast<std::size_t>(i)];
    double ax, ay;
    bool adjacent;
    if (o.cross) {
      adjacent = o.lx == 0 && o.ly == 0;
      const Side sy = o.sx == Side::kLeft ? Side::kRight : Side::kLeft;
      ax = alpha(walk.id(o.sx, o.lx));
      ay = alpha(walk.id(sy, o.ly));
    } else {
      adjacent = (o.lx - o.lm) + (o.ly - o.lm) == 1;
      ax = alpha(walk.id(o.sx, o.lx));
      ay = alpha(walk.id(o.sx, o.ly));
    }
    if (adjacent) d(i) = kEdgeRate * (ax - ay) * (ax - ay);
  }
  return d;
}

Eigen::VectorXd PairChain::product_alpha_field(double lambda, double rho) const {
  WalkChain walk(depth_, false);
  Eigen::VectorXd alpha = walk.tree_alpha(lambda, rho);
  Eigen::VectorXd f(states());
  for (Index i = 0; i < states(); ++i) {
    const PairOrbit& o = orbits_[static_cast<std::size_t>(i)];
    const Side sy = o.cross ? (o.sx == Side::kLeft ? Side::kRight : Side::kLeft) : o.sx;
    f(i) = alpha(walk.id(o.sx, o.lx)) * alpha(walk.id(sy, o.ly));
  }
  return f;
}

double PairChain::window_pair_sum(const Eigen::VectorXd& f,
                                  const OrbitPredicate& in_window) const {
  double total = 0;
  for (Index i = 0; i < states(); ++i) {
    const PairOrbit& o = orbits_[static_cast<std::size_t>(i)];
    const Side sy = o.cross ? (o.sx == Side::kLeft ? Side::kRight : Side::kLeft) : o.sx;
    if (in_window(o.sx, o.lx) && in_window(sy, o.ly))
      total += counts_[static_cast<std::size_t>(i)] * f(i);
  }
  return total;
}

WindowCovarianceResult tree_window_covariance_sum(int depth, double lambda,
                                                  double rho,
                                                  const OrbitPredicate& in_window,
                                                  double tol) {
  PairChain chain(depth, /*killed=*/true);
  Eigen::VectorXd u = chain.delta_field(lambda, rho);
  const double scale = std::max(1.0, chain.window_pair_sum(u, in_window));

  WindowCovarianceResult res;
  const double step = 0.25;
  const double t_max = 4000.0;
  double g_prev = chain.window_pair_sum(u, in_window);
  double g_mid, g_next;
  while (res.horizon < t_max) {
    Eigen::VectorXd u_mid = chain.evolve(u, step / 2, 1e-13);
    Eigen::VectorXd u_next = chain.evolve(u_mid, step / 2, 1e-13);
    g_mid = chain.window_pair_sum(u_mid, in_window);
    g_next = chain.window_pair_sum(u_next, in_window);
    res.covariance_sum += step / 6.0 * (g_prev + 4 * g_mid + g_next);
    res.horizon += step;
    u = std::move(u_next);
    g_prev = g_next;
    if (g_next < tol * scale) break;
  }
  res.integrand_at_horizon = g_prev;
  // Crude geometric tail from the killed-walk spectral bound.
  const double decay = 1.0 - 2.0 * std::sqrt(2.0) / 3.0;
  res.tail_estimate = g_prev / decay;
  require(res.horizon < t_max, "tree_window_covariance_sum: horizon exceeded",
          ErrorCode::kNonConvergence);
  return res;
}

WindowVarianceResult tree_window_variance(int depth, double lambda, double rho,
                                          const OrbitPredicate& in_window,
                                          double tol) {
  WindowVarianceResult res;
  res.dual = tree_window_covariance_sum(depth, lambda, rho, in_window, tol);
  WalkChain walk(depth, false);
  Eigen::VectorXd alpha = walk.tree_alpha(lambda, rho);
  for (Index i = 0; i < walk.states(); ++i) {
    if (in_window(walk.side_of(i), walk.level_of(i)))
      res.bernoulli_sum += walk.orbit_count(i) * alpha(i) * (1 - alpha(i));
  }
  require(res.bernoulli_sum > 0, "tree_window_variance: degenerate window");
  res.variance = res.bernoulli_sum - res.dual.covariance_sum;
  res.ratio = res.variance / res.bernoulli_sum;
  return res;
}

}  // namespace sep::treequotient
