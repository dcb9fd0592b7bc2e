#pragma once

// Exact symmetry reductions for the double-rooted binary tree.
//
// Functions that depend on sites only through (side, level) are invariant
// under the side-preserving automorphism group, so the single walker and the
// two-walker exclusion process both project to small lumped chains:
//   - WalkChain:  2(depth+1) states (side, level);
//   - PairChain:  ordered-pair orbits (side, level_x, level_y, meet level for
//     same-side pairs), a few thousand states at depth 20.
// The lumping is exact; unit tests compare against the full state space at
// small depth.

#include <Eigen/SparseCore>
#include <functional>
#include <vector>

#include "sep/common.hpp"
#include "sep/kernels.hpp"

namespace sep::treequotient {

using kernels::Side;

class WalkChain {
 public:
  WalkChain(int depth, bool killed);

  int depth() const { return depth_; }
  bool killed() const { return killed_; }
  Index states() const { return 2 * (depth_ + 1); }
  Index id(Side s, int level) const {
    return (s == Side::kRight ? depth_ + 1 : 0) + level;
  }
  Side side_of(Index i) const {
    return i <= depth_ ? Side::kLeft : Side::kRight;
  }
  int level_of(Index i) const {
    return static_cast<int>(i <= depth_ ? i : i - (depth_ + 1));
  }
  double orbit_count(Index i) const {
    return std::pow(2.0, level_of(i));
  }

  const Eigen::SparseMatrix<double, Eigen::RowMajor>& transition() const {
    return p_;
  }

  // exp(t (P - I)) f by uniformization (jump rate 1 per walker).
  Eigen::VectorXd evolve(const Eigen::VectorXd& f, double t,
                         double tol = 1e-12) const;

  // (I - P)^{-1} rhs; killed chains only.
  Eigen::VectorXd green_solve(const Eigen::VectorXd& rhs) const;

  // alpha(side, level) for the standard tree profile.
  Eigen::VectorXd tree_alpha(double lambda, double rho) const;

 private:
  int depth_;
  bool killed_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> p_;
};

// Level/side window predicate on orbit states.
using OrbitPredicate = std::function<bool(Side, int)>;

// Deep-tree window Green sums: sup over interior orbits of
// sum_{y in W} G(x,y), plus the value at a given orbit. Uses the killed walk.
struct WindowGreenResult {
  double sup = 0.0;
  Side argmax_side = Side::kLeft;
  int argmax_level = -1;
};
WindowGreenResult tree_window_green_sup(int depth, const OrbitPredicate& in_window,
                                        int min_boundary_distance = 5);

// G(x, left root) for x at (side, level) — distance-d values of the killed
// tree Green function.
Eigen::VectorXd tree_green_from_root(int depth);

// --- ordered-pair quotient --------------------------------------------------

struct PairOrbit {
  bool cross = false;
  Side sx = Side::kLeft;  // same-side: common side; cross: side of x
  int lx = 0, ly = 0;
  int lm = 0;  // same-side only; lm == lx means x is y's ancestor
};

class PairChain {
 public:
  PairChain(int depth, bool killed);

  int depth() const { return depth_; }
  Index states() const { return static_cast<Index>(orbits_.size()); }
  const PairOrbit& orbit(Index i) const { return orbits_[static_cast<std::size_t>(i)]; }
  Index index_of(const PairOrbit& o) const;
  double orbit_count(Index i) const { return counts_[static_cast<std::size_t>(i)]; }

  // Generator as rate matrix; diagonal carries -(outflow + kill rate).
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& generator() const {
    return q_;
  }

  // Function-side semigroup: f_t = exp(t Q) f via uniformization.
  Eigen::VectorXd evolve(const Eigen::VectorXd& f, double t,
                         double tol = 1e-12) const;

  // Delta(x,y) = p(x,y) [alpha(x)-alpha(y)]^2 at orbit representatives.
  Eigen::VectorXd delta_field(double lambda, double rho) const;

  // f(x,y) = alpha(x) alpha(y) at orbit representatives.
  Eigen::VectorXd product_alpha_field(double lambda, double rho) const;

  // Weighted sum over orbits lying in W x W.
  double window_pair_sum(const Eigen::VectorXd& f,
                         const OrbitPredicate& in_window) const;

 private:
  void add_rate(Index from, const PairOrbit& to, double rate);

  int depth_;
  bool killed_;
  std::vector<PairOrbit> orbits_;
  std::vector<double> counts_;
  std::vector<Index> lookup_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> q_;
  std::vector<Eigen::Triplet<double>> build_trips_;
};

// Dual-integral covariance sum over a window on the killed deep tree:
//   sum_{x != y in W} integral_0^inf [V(s) Delta](x,y) ds,
// with V the two-walker exclusion semigroup killed at the truncation edge.
struct WindowCovarianceResult {
  double covariance_sum = 0.0;  // equals -sum Cov(eta(x), eta(y)) pairs in W
  double horizon = 0.0;
  double integrand_at_horizon = 0.0;
  double tail_estimate = 0.0;
};
WindowCovarianceResult tree_window_covariance_sum(int depth, double lambda,
                                                  double rho,
                                                  const OrbitPredicate& in_window,
                                                  double tol = 1e-10);

// Variance of the window occupation sum under the stationary profile,
// assembled from the dual integral; ratio is Var / sum alpha(1-alpha).
struct WindowVarianceResult {
  double variance = 0.0;
  double bernoulli_sum = 0.0;  // sum_W alpha (1 - alpha)
  double ratio = 0.0;
  WindowCovarianceResult dual;
};
WindowVarianceResult tree_window_variance(int depth, double lambda, double rho,
                                          const OrbitPredicate& in_window,
                                          double tol = 1e-10);

}  // namespace sep::treequotient
