#include "sep/genpoly.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bit>
#include <cmath>

#include "json.hpp"

namespace sep::genpoly {

SubsetDistribution::SubsetDistribution(int n, Eigen::VectorXd weights, int cap)
    : n_(n), w_(std::move(weights)) {
  require(n >= 1 && n <= cap, "SubsetDistribution: n over the site cap");
  require(n <= 30, "SubsetDistribution: n unrepresentable");
  require(w_.size() == (Index{1} << n), "SubsetDistribution: weight size mismatch");
  require(w_.minCoeff() >= -1e-12, "SubsetDistribution: negative weight");
  require(std::abs(w_.sum() - 1.0) < 1e-12,
          "SubsetDistribution: weights must sum to 1");
}

double SubsetDistribution::total_variation(const SubsetDistribution& other) const {
  require(n_ == other.n_, "total_variation: size mismatch");
  return 0.5 * (w_ - other.w_).cwiseAbs().sum();
}

std::string SubsetDistribution::to_json() const {
  nlohmann::json j;
  j["n"] = n_;
  j["weights"] = std::vector<double>(w_.data(), w_.data() + w_.size());
  return j.dump();
}

SubsetDistribution SubsetDistribution::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const int n = j.at("n");
  auto weights = j.at("weights").get<std::vector<double>>();
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(),
                                                  static_cast<Index>(weights.size()));
  return SubsetDistribution(n, std::move(w));
}

double UnivariatePoly::operator()(double w) const {
  double acc = 0;
  for (Index k = coeffs.size() - 1; k >= 0; --k) acc = acc * w + coeffs(k);
  return acc;
}

std::string UnivariatePoly::to_json() const {
  nlohmann::json j;
  j["coeffs"] = std::vector<double>(coeffs.data(), coeffs.data() + coeffs.size());
  return j.dump();
}

SubsetDistribution from_product(const std::vector<double>& alphas) {
  const int n = static_cast<int>(alphas.size());
  require(n >= 1 && n <= kDefaultSiteCap, "from_product: size out of range");
  for (double a : alphas)
    require(a >= 0.0 && a <= 1.0, "from_product: marginal outside [0,1]");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(Index{1} << n);
  w(0) = 1.0;
  for (int k = 0; k < n; ++k) {
    const Index block = Index{1} << k;
    for (Index mask = block - 1; mask >= 0; --mask) {
      const double base = w(mask);
      w(mask | block) = base * alphas[static_cast<std::size_t>(k)];
      w(mask) = base * (1.0 - alphas[static_cast<std::size_t>(k)]);
    }
  }
  return SubsetDistribution(n, std::move(w));
}

SubsetDistribution point_mass(int n, std::uint64_t mask) {
  require(mask < (std::uint64_t{1} << n), "point_mass: mask out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(Index{1} << n);
  w(static_cast<Index>(mask)) = 1.0;
  return SubsetDistribution(n, std::move(w));
}

UnivariatePoly diagonalize(const SubsetDistribution& dist) {
  UnivariatePoly q;
  q.coeffs = Eigen::VectorXd::Zero(dist.n() + 1);
  const auto& w = dist.weights();
  for (Index mask = 0; mask < w.size(); ++mask)
    q.coeffs(std::popcount(static_cast<std::uint64_t>(mask))) += w(mask);
  return q;
}

RealRootReport real_rooted(const UnivariatePoly& q, double tol) {
  const double scale = q.coeffs.cwiseAbs().maxCoeff();
  require(scale > 0, "real_rooted: zero polynomial");
  // Strip leading coefficients that vanish relative to the scale; these are
  // roots at infinity (degree deficit of Q*).
  Index deg = q.coeffs.size() - 1;
  while (deg > 0 && std::abs(q.coeffs(deg)) <= 1e-14 * scale) --deg;
  RealRootReport rep;
  rep.roots_at_infinity = static_cast<int>(q.coeffs.size() - 1 - deg);
  if (deg == 0) {
    rep.real_rooted = true;
    return rep;
  }
  // Companion matrix of the monic normalization.
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (Index k = 0; k < deg; ++k) {
    comp(k, deg - 1) = -q.coeffs(k) / q.coeffs(deg);
    if (k + 1 < deg) comp(k + 1, k) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
  require(es.info() == Eigen::Success, "real_rooted: eigensolver failed",
          ErrorCode::kNumerical);
  rep.roots.assign(es.eigenvalues().data(), es.eigenvalues().data() + deg);
  std::sort(rep.roots.begin(), rep.roots.end(),
            [](const auto& a, const auto& b) { return a.real() < b.real(); });
  rep.margin = 0.0;
  for (const auto& r : rep.roots)
    rep.margin = std::max(rep.margin, std::abs(r.imag()) / std::max(1.0, std::abs(r)));
  rep.real_rooted = rep.margin <= tol;
  return rep;
}

BernoulliVector bernoulli_decomposition(const SubsetDistribution& dist,
                                        double tol) {
  UnivariatePoly q = diagonalize(dist);
  RealRootReport rep = real_rooted(q, tol);
  if (!rep.real_rooted) {
    std::complex<double> worst;
    double m = -1;
    for (const auto& r : rep.roots) {
      const double s = std::abs(r.imag()) / std::max(1.0, std::abs(r));
      if (s > m) { m = s; worst = r; }
    }
    throw Error(ErrorCode::kNumerical,
                "bernoulli_decomposition: count polynomial is not real-rooted "
                "(violating root " + std::to_string(worst.real()) + (worst.imag() < 0 ? "-" : "+") +
                    std::to_string(std::abs(worst.imag())) + "i)");
  }
  // Q*(w) = c prod (w + w_i), roots -w_i <= 0, p_i = 1/(1 + w_i).
  BernoulliVector p;
  p.reserve(static_cast<std::size_t>(dist.n()));
  for (const auto& r : rep.roots) {
    const double w_i = std::max(0.0, -r.real());
    p.push_back(1.0 / (1.0 + w_i));
  }
  for (int k = 0; k < rep.roots_at_infinity; ++k) p.push_back(0.0);
  std::sort(p.rbegin(), p.rend());
  // Round-trip guard: the product polynomial must reproduce Q*.
  UnivariatePoly back = bernoulli_product_poly(p);
  const double err = (back.coeffs - q.coeffs).cwiseAbs().maxCoeff();
  require(err < std::max(tol, 1e-9) * 10,
          "bernoulli_decomposition: reconstruction mismatch " + std::to_string(err),
          ErrorCode::kNumerical);
  return p;
}

UnivariatePoly bernoulli_product_poly(const BernoulliVector& p) {
  UnivariatePoly q;
  q.coeffs = Eigen::VectorXd::Zero(static_cast<Index>(p.size()) + 1);
  q.coeffs(0) = 1.0;
  Index deg = 0;
  for (double pi : p) {
    ++deg;
    for (Index k = deg; k >= 1; --k)
      q.coeffs(k) = q.coeffs(k) * (1 - pi) + q.coeffs(k - 1) * pi;
    q.coeffs(0) *= (1 - pi);
  }
  return q;
}

StabilityReport pair_stability(const PairCoefficients& pc, double margin_tol) {
  const auto [a, b, c, d] = pc;
  require(std::abs(a) + std::abs(b) + std::abs(c) + std::abs(d) > 0,
          "pair_stability: all coefficients zero");
  StabilityReport rep;
  rep.slack[0] = (b * std::conj(c) - a * std::conj(d)).real() - std::abs(b * c - a * d);
  rep.slack[1] = (a * std::conj(b)).imag();
  rep.slack[2] = (a * std::conj(c)).imag();
  rep.slack[3] = (b * std::conj(d)).imag();
  rep.slack[4] = (c * std::conj(d)).imag();
  rep.stable = true;
  for (double s : rep.slack) {
    if (s < -margin_tol) rep.stable = false;
    if (std::abs(s) <= margin_tol) rep.boundary = true;
  }
  return rep;
}

SubsetDistribution transposition_mix(const SubsetDistribution& dist, int i,
                                     int j, double p) {
  require(i != j, "transposition_mix: indices must differ");
  require(i >= 0 && i < dist.n() && j >= 0 && j < dist.n(),
          "transposition_mix: index out of range");
  require(p >= 0.0 && p <= 1.0, "transposition_mix: p outside [0,1]");
  const auto& w = dist.weights();
  Eigen::VectorXd out(w.size());
  const std::uint64_t bi = std::uint64_t{1} << i, bj = std::uint64_t{1} << j;
  for (Index mask = 0; mask < w.size(); ++mask) {
    const auto m = static_cast<std::uint64_t>(mask);
    const bool vi = m & bi, vj = m & bj;
    std::uint64_t swapped = m;
    if (vi != vj) swapped = (m ^ bi) ^ bj;
    out(mask) = p * w(mask) + (1 - p) * w(static_cast<Index>(swapped));
  }
  return SubsetDistribution(dist.n(), std::move(out));
}

namespace {

// Partial evaluations of the multi-affine Q split on coordinates (i, j):
// returns (Q00, Q10, Q01, Q11) with z_i, z_j formally set to one elsewhere.
std::array<double, 4> split_evaluate(const SubsetDistribution& dist,
                                     const Eigen::VectorXd& z, int i, int j) {
  const int n = dist.n();
  const auto& w = dist.weights();
  // prods[mask] = prod_{k in mask, k != i, j} z_k via subset DP.
  std::vector<double> prods(static_cast<std::size_t>(w.size()));
  prods[0] = 1.0;
  for (Index mask = 1; mask < w.size(); ++mask) {
    const int low = std::countr_zero(static_cast<std::uint64_t>(mask));
    const double zk = (low == i || low == j) ? 1.0 : z(low);
    prods[static_cast<std::size_t>(mask)] =
        prods[static_cast<std::size_t>(mask & (mask - 1))] * zk;
  }
  std::array<double, 4> parts{0, 0, 0, 0};
  const std::uint64_t bi = std::uint64_t{1} << i, bj = std::uint64_t{1} << j;
  for (Index mask = 0; mask < w.size(); ++mask) {
    const auto m = static_cast<std::uint64_t>(mask);
    const int idx = (m & bi ? 1 : 0) + (m & bj ? 2 : 0);
    parts[static_cast<std::size_t>(idx)] += w(mask) * prods[static_cast<std::size_t>(mask)];
  }
  (void)n;
  return parts;
}

}  // namespace

RayleighReport rayleigh_check(const SubsetDistribution& dist,
                              const std::vector<Eigen::VectorXd>& points,
                              const std::vector<std::pair<int, int>>& pairs,
                              double tol) {
  RayleighReport rep;
  rep.min_value = std::numeric_limits<double>::infinity();
  for (const auto& z : points) {
    require(z.size() == dist.n(), "rayleigh_check: point size mismatch");
    for (const auto& [i, j] : pairs) {
      const auto [q00, q10, q01, q11] = split_evaluate(dist, z, i, j);
      // dQ_i dQ_j - Q dQ_ij reduces to Q10 Q01 - Q00 Q11 (z_i, z_j cancel).
      const double value = q10 * q01 - q00 * q11;
      if (value < rep.min_value) {
        rep.min_value = value;
        rep.worst_point = z;
        rep.worst_i = i;
        rep.worst_j = j;
      }
    }
  }
  rep.passed = rep.min_value >= -tol;
  return rep;
}

std::vector<Eigen::VectorXd> default_rayleigh_points(int n, int count,
                                                     std::uint64_t seed) {
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(count) + 1);
  pts.push_back(Eigen::VectorXd::Ones(n));  // the negative-correlation point
  rng::Stream stream = rng::Stream::for_key(seed, 0x52415947);
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = stream.uniform(-3.0, 3.0);
    pts.push_back(std::move(z));
  }
  return pts;
}

std::vector<std::pair<int, int>> all_pairs(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

double marginal_mean(const SubsetDistribution& dist, int i) {
  require(i >= 0 && i < dist.n(), "marginal_mean: index out of range");
  const auto& w = dist.weights();
  const std::uint64_t bi = std::uint64_t{1} << i;
  double mean = 0;
  for (Index mask = 0; mask < w.size(); ++mask)
    if (static_cast<std::uint64_t>(mask) & bi) mean += w(mask);
  return mean;
}

double pairwise_covariance(const SubsetDistribution& dist, int i, int j) {
  require(i != j, "pairwise_covariance: indices must differ");
  const auto& w = dist.weights();
  const std::uint64_t bi = std::uint64_t{1} << i, bj = std::uint64_t{1} << j;
  double ei = 0, ej = 0, eij = 0;
  for (Index mask = 0; mask < w.size(); ++mask) {
    const auto m = static_cast<std::uint64_t>(mask);
    if (m & bi) ei += w(mask);
    if (m & bj) ej += w(mask);
    if ((m & bi) && (m & bj)) eij += w(mask);
  }
  return eij - ei * ej;
}

}  // namespace sep::genpoly
