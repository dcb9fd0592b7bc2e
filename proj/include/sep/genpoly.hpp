#pragma once

// Generating polynomials of {0,1}^n distributions, stability and Rayleigh
// checks, the single-transposition mixing operator, and the Bernoulli
// decomposition of the particle-count law.
//
// Subsets are indexed by bitmask: site k corresponds to bit k.

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>
#include <vector>

#include "sep/common.hpp"
#include "sep/rng.hpp"

namespace sep::genpoly {

inline constexpr int kDefaultSiteCap = 20;

// Probability vector over {0,1}^n, equivalently the multi-affine generating
// polynomial Q(z) = sum_A weight(A) prod_{i in A} z_i. The site cap guards
// the dense 2^n storage; pass a larger cap explicitly when memory allows.
class SubsetDistribution {
 public:
  SubsetDistribution(int n, Eigen::VectorXd weights, int cap = kDefaultSiteCap);

  int n() const { return n_; }
  const Eigen::VectorXd& weights() const { return w_; }
  double weight(std::uint64_t mask) const { return w_(static_cast<Index>(mask)); }

  // l1 distance between distributions over the same n.
  double total_variation(const SubsetDistribution& other) const;

  std::string to_json() const;
  static SubsetDistribution from_json(const std::string& text);

 private:
  int n_;
  Eigen::VectorXd w_;
};

// Coefficients c_k = P(sum eta(i) = k) of Q*(w) = Q(w, ..., w).
struct UnivariatePoly {
  Eigen::VectorXd coeffs;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double operator()(double w) const;
  std::string to_json() const;
};

struct PairCoefficients {
  std::complex<double> a, b, c, d;  // h(z,w) = a + bz + cw + dzw
};

using BernoulliVector = std::vector<double>;

struct StabilityReport {
  bool stable = false;
  bool boundary = false;           // some slack within margin_tol of zero
  std::array<double, 5> slack{};   // criterion inequalities, >= 0 when stable
};

struct RealRootReport {
  bool real_rooted = false;
  double margin = 0.0;  // max scaled imaginary magnitude over the roots
  std::vector<std::complex<double>> roots;
  int roots_at_infinity = 0;  // stripped degree deficit
};

struct RayleighReport {
  bool passed = false;
  double min_value = 0.0;  // most negative sampled value of the inequality
  Eigen::VectorXd worst_point;
  int worst_i = -1, worst_j = -1;
};

// --- construction ------------------------------------------------------------

SubsetDistribution from_product(const std::vector<double>& alphas);
SubsetDistribution point_mass(int n, std::uint64_t mask);

// --- operations ---------------------------------------------------------------

UnivariatePoly diagonalize(const SubsetDistribution& dist);

RealRootReport real_rooted(const UnivariatePoly& q, double tol = 1e-9);

// Requires real_rooted within tol; returns marginals sorted descending. The
// reconstructed product polynomial matches q within reconstruction_tol.
BernoulliVector bernoulli_decomposition(const SubsetDistribution& dist,
                                        double tol = 1e-8);

StabilityReport pair_stability(const PairCoefficients& pc,
                               double margin_tol = 1e-12);

SubsetDistribution transposition_mix(const SubsetDistribution& dist, int i,
                                     int j, double p);

// Evaluates d_iQ d_jQ - Q d_ijQ at each point for each pair. A sampled
// necessary condition for the strong Rayleigh property, not a proof.
RayleighReport rayleigh_check(const SubsetDistribution& dist,
                              const std::vector<Eigen::VectorXd>& points,
                              const std::vector<std::pair<int, int>>& pairs,
                              double tol = 1e-12);

// Default point set: the all-ones vector plus `count` points uniform in
// [-3,3]^n, deterministic in the seed.
std::vector<Eigen::VectorXd> default_rayleigh_points(int n, int count,
                                                     std::uint64_t seed);
std::vector<std::pair<int, int>> all_pairs(int n);

double marginal_mean(const SubsetDistribution& dist, int i);
double pairwise_covariance(const SubsetDistribution& dist, int i, int j);

// --- support -------------------------------------------------------------------

// Expand prod_i (p_i w + (1 - p_i)).
UnivariatePoly bernoulli_product_poly(const BernoulliVector& p);

}  // namespace sep::genpoly
