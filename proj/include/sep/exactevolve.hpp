#pragma once

// Exact evolution of the full 2^n occupancy distribution under the exclusion
// generator, matrix-free from the edge list, plus the stirring-product
// (Trotter) alternative built from single-edge mixing operators.

#include <functional>
#include <optional>
#include <vector>

#include "sep/genpoly.hpp"
#include "sep/kernels.hpp"

namespace sep::exactevolve {

struct Edge {
  int a = 0, b = 0;
  double rate = 0.0;
};

struct ExclusionGenerator {
  int n = 0;
  std::vector<Edge> edges;  // unordered pairs, lexicographic (min, max)
  double total_rate = 0.0;
};

inline constexpr int kSiteCap = 20;

ExclusionGenerator build_generator(const kernels::Kernel& k,
                                   int site_cap = kSiteCap);

struct EvolveInfo {
  int terms = 0;                  // uniformization powers used
  double renormalization = 0.0;   // 1 - pre-renormalization mass
  double min_weight = 0.0;        // most negative weight before renormalization
};

// exp(tL) dist by uniformization at rate Lambda = sum of edge rates.
genpoly::SubsetDistribution evolve(const genpoly::SubsetDistribution& dist,
                                   const ExclusionGenerator& gen, double t,
                                   double tol = 1e-13,
                                   EvolveInfo* info = nullptr);

// Trotter splitting: per step and per edge (lexicographic order), apply the
// exact single-edge mixing Q_p with p = (1 + exp(-2 r delta)) / 2.
genpoly::SubsetDistribution evolve_stirring_products(
    const genpoly::SubsetDistribution& dist, const ExclusionGenerator& gen,
    double t, int steps);

struct StationaryInfo {
  double horizon = 0.0;
  double last_tv_change = 0.0;
};

// Doubling-horizon evolution until successive total-variation change < tol.
// The finite-truncation limit is exchangeable within particle-count sectors.
genpoly::SubsetDistribution stationary_limit(
    const genpoly::SubsetDistribution& dist, const ExclusionGenerator& gen,
    double tol = 1e-10, StationaryInfo* info = nullptr);

// Occupation probabilities P(eta(x) = 1) per site.
Eigen::VectorXd site_marginals(const genpoly::SubsetDistribution& dist);

// E[eta(x) eta(y)] matrix (diagonal holds marginals).
Eigen::MatrixXd pair_moments(const genpoly::SubsetDistribution& dist);

}  // namespace sep::exactevolve
