#pragma once

// Finite symmetric transition kernels: the double-rooted binary tree and the
// integer line, with harmonic profiles, heat kernels, Green functions and
// Dirichlet sums on them.
//
// Truncation convention: kernels stay stochastic by folding out-of-range jump
// mass into diagonal holding at boundary sites (recorded per site in
// `escape`). Green-function computations use the killed variant, where that
// escape mass is removed and the walker dies at the truncation edge.

#include <Eigen/SparseCore>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sep/common.hpp"

namespace sep::kernels {

enum class Side : std::int8_t { kNone = -1, kLeft = 0, kRight = 1 };

struct SiteInfo {
  std::int32_t level = 0;       // tree: distance to nearer basis endpoint
  Side side = Side::kNone;      // tree only
  std::int64_t coord = 0;       // line only
};

enum class Topology { kTree, kLine, kCustom };

// Symmetric jump law on Z, given as {step -> probability}. Must satisfy
// p(n) = p(-n) and sum to one; p(0) is genuine holding.
using JumpLaw = std::map<std::int64_t, double>;

struct Kernel {
  Eigen::SparseMatrix<double, Eigen::RowMajor> p;  // rows sum to 1
  std::vector<SiteInfo> sites;
  Eigen::VectorXd escape;  // per-site holding mass created by truncation
  Topology topology = Topology::kCustom;
  // Tree metadata
  std::int32_t tree_depth = -1;
  // Line metadata
  std::int64_t line_lo = 0, line_hi = -1;
  JumpLaw jump_law;
  double jump_sigma2 = 0.0;  // second moment of the law actually simulated
  double truncated_law_mass = 0.0;  // law mass unreachable from any site

  Index size() const { return static_cast<Index>(sites.size()); }
  bool is_interior(Index i) const { return escape(i) == 0.0; }
  std::string site_label(Index i) const;

  // Graph distance along positive off-diagonal entries. Closed-form for
  // tree/line, breadth-first search otherwise (cached per source).
  int distance(Index x, Index y) const;

  // Distance from a site to the nearest boundary (escape > 0) site.
  int boundary_distance(Index x) const;

  Index site_at(Side side, std::int32_t level, std::int64_t offset) const;
  Index site_at_coord(std::int64_t coord) const;

 private:
  mutable std::map<Index, std::vector<int>> bfs_cache_;
};

// Substochastic version: boundary escape removed, walker dies at the edge.
struct KilledKernel {
  Eigen::SparseMatrix<double, Eigen::RowMajor> p;
  Eigen::VectorXd escape;  // kill rate per site
  const Kernel* parent = nullptr;

  Index size() const { return p.rows(); }
};

struct HarmonicProfile {
  double lambda = 0.0, rho = 0.0;
  Eigen::VectorXd values;  // alpha(x) per site

  double operator()(Index x) const { return values(x); }
};

// A subset of sites with a human-readable description.
struct SiteWindow {
  std::vector<Index> sites;
  std::string description;

  static SiteWindow tree_level_below(const Kernel& k, int n,
                                     std::optional<Side> side = std::nullopt);
  static SiteWindow tree_level_equal(const Kernel& k, int n,
                                     std::optional<Side> side = std::nullopt);
  static SiteWindow coord_positive(const Kernel& k);
  // Parse "level<6", "L&level<6", "L&level=4", "coord>0".
  static SiteWindow parse(const Kernel& k, const std::string& text);
};

// --- constructors ---------------------------------------------------------

// Two rooted binary trees of the given depth joined by the basis edge; every
// interior vertex has three neighbors at rate 1/3, vertices at the last level
// hold the missing mass. Site order is breadth-first from the left endpoint.
Kernel build_binary_tree(int depth);

// Sites lo..hi with p(x,y) = law(y-x); jumps leaving the range become holding
// at the departing site.
Kernel build_line_range(std::int64_t lo, std::int64_t hi, const JumpLaw& law);
Kernel build_line(std::int64_t radius, const JumpLaw& law);

JumpLaw nearest_neighbor_law();  // p(+-1) = 1/2

KilledKernel killed_truncation(const Kernel& k);

// --- operations ------------------------------------------------------------

// exp(t(P-I)) rows, Poisson-weighted power series truncated when the Poisson
// tail drops below tol. Dense output; guarded by a site cap.
Eigen::MatrixXd heat_kernel(const Kernel& k, double t, double tol = 1e-12,
                            Index site_cap = 4096);
Eigen::MatrixXd heat_kernel(const KilledKernel& k, double t, double tol = 1e-12,
                            Index site_cap = 4096);

// Green column G(., y) = (I - P)^{-1} e_y for the killed walk (conjugate
// gradient; the killed operator is symmetric positive definite).
Eigen::VectorXd green_column(const KilledKernel& k, Index y, double tol = 1e-12);
double green_function(const KilledKernel& k, Index x, Index y,
                      double tol = 1e-12);

struct WindowSupResult {
  double value = 0.0;
  Index argmax = -1;
};

// sup over interior x of sum_{y in window} G(x,y).
WindowSupResult green_window_sup(const KilledKernel& k, const SiteWindow& w,
                                 double tol = 1e-12);

// --- harmonic profiles ------------------------------------------------------

// alpha(x) = lambda + (rho-lambda) / (3 * 2^level) on the left side and the
// mirrored formula on the right; harmonic at interior tree vertices.
HarmonicProfile tree_alpha(const Kernel& tree, double lambda, double rho);

// Linear interpolation along the line; harmonic at interior vertices for any
// symmetric law.
HarmonicProfile line_alpha(const Kernel& line, double lambda, double rho);

HarmonicProfile constant_alpha(const Kernel& k, double value);
HarmonicProfile explicit_alpha(const Kernel& k, Eigen::VectorXd values);

// max over interior x of |sum_y p(x,y) alpha(y) - alpha(x)|.
double harmonicity_residual(const Kernel& k, const HarmonicProfile& alpha);

struct DirichletResult {
  double value = 0.0;
  // Tree kernels: first level whose edge contributions fall below 1e-12.
  int tail_level = -1;
};

// Phi(alpha) = sum_{x,y} p(x,y) [alpha(y)-alpha(x)]^2 over the truncation.
DirichletResult dirichlet_sum(const Kernel& k, const HarmonicProfile& alpha);

// --- serialization -----------------------------------------------------------

std::string kernel_to_json(const Kernel& k);
Kernel kernel_from_json(const std::string& text);

}  // namespace sep::kernels
