#include "sep/kernels.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "json.hpp"

namespace sep::kernels {

namespace {

// Tree layout: per side, levels 0..depth, 2^level vertices per level, in
// breadth-first order from the left basis endpoint. Index arithmetic below
// mirrors that layout.
struct TreeLayout {
  int depth;
  std::vector<Index> level_offset;  // offset of (level) block within a side
  Index per_side;

  explicit TreeLayout(int d) : depth(d), level_offset(d + 2, 0) {
    for (int l = 0; l <= d; ++l)
      level_offset[l + 1] = level_offset[l] + (Index{1} << l);
    per_side = level_offset[d + 1];
  }
  Index index(Side s, int level, Index offset) const {
    // Level blocks interleave L then R: [L0 R0 L1 R1 ...], preserving the
    // breadth-first-from-left-endpoint visit order.
    Index block = 2 * level_offset[level];
    Index width = Index{1} << level;
    return block + (s == Side::kRight ? width : 0) + offset;
  }
  std::tuple<Side, int, Index> locate(Index i) const {
    int level = 0;
    while (level < depth && i >= 2 * level_offset[level + 1]) ++level;
    Index rem = i - 2 * level_offset[level];
    Index width = Index{1} << level;
    Side s = rem < width ? Side::kLeft : Side::kRight;
    return {s, level, rem % width};
  }
};

int tree_distance(const SiteInfo& a, const SiteInfo& b, Index off_a, Index off_b) {
  if (a.side != b.side) {
    return a.level + 1 + b.level;
  }
  // Climb the deeper one to the common level, then both until offsets meet.
  int la = a.level, lb = b.level;
  Index oa = off_a, ob = off_b;
  int d = 0;
  while (la > lb) { oa >>= 1; --la; ++d; }
  while (lb > la) { ob >>= 1; --lb; ++d; }
  while (oa != ob) { oa >>= 1; ob >>= 1; --la; d += 2; }
  return d;
}

}  // namespace

std::string Kernel::site_label(Index i) const {
  const SiteInfo& s = sites[static_cast<std::size_t>(i)];
  std::ostringstream os;
  if (topology == Topology::kTree) {
    TreeLayout lay(tree_depth);
    auto [side, level, off] = lay.locate(i);
    os << (side == Side::kLeft ? "L" : "R") << level << "." << off;
  } else if (topology == Topology::kLine) {
    os << "x" << s.coord;
  } else {
    os << "s" << i;
  }
  return os.str();
}

Index Kernel::site_at(Side side, std::int32_t level, std::int64_t offset) const {
  require(topology == Topology::kTree, "site_at: tree kernels only");
  require(level >= 0 && level <= tree_depth, "site_at: level out of range");
  TreeLayout lay(tree_depth);
  require(offset >= 0 && offset < (Index{1} << level), "site_at: offset out of range");
  return lay.index(side, level, offset);
}

Index Kernel::site_at_coord(std::int64_t coord) const {
  require(topology == Topology::kLine, "site_at_coord: line kernels only");
  require(coord >= line_lo && coord <= line_hi, "site_at_coord: out of range");
  return coord - line_lo;
}

int Kernel::distance(Index x, Index y) const {
  if (x == y) return 0;
  if (topology == Topology::kTree) {
    TreeLayout lay(tree_depth);
    auto [sx, lx, ox] = lay.locate(x);
    auto [sy, ly, oy] = lay.locate(y);
    SiteInfo a{lx, sx, 0}, b{ly, sy, 0};
    return tree_distance(a, b, ox, oy);
  }
  if (topology == Topology::kLine && !jump_law.empty()) {
    // Coordinate gap is the graph distance only for nearest-neighbor support.
    bool nn = true;
    for (const auto& [step, prob] : jump_law)
      if (std::abs(step) > 1 && prob > 0) nn = false;
    if (nn)
      return static_cast<int>(
          std::abs(sites[static_cast<std::size_t>(x)].coord -
                   sites[static_cast<std::size_t>(y)].coord));
  }
  auto it = bfs_cache_.find(x);
  if (it == bfs_cache_.end()) {
    std::vector<int> dist(sites.size(), -1);
    std::deque<Index> queue{x};
    dist[x] = 0;
    while (!queue.empty()) {
      Index u = queue.front();
      queue.pop_front();
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator jt(p, u);
           jt; ++jt) {
        if (jt.col() == u || jt.value() <= 0) continue;
        if (dist[jt.col()] < 0) {
          dist[jt.col()] = dist[u] + 1;
          queue.push_back(jt.col());
        }
      }
    }
    it = bfs_cache_.emplace(x, std::move(dist)).first;
  }
  int d = it->second[static_cast<std::size_t>(y)];
  require(d >= 0, "distance: sites not connected");
  return d;
}

int Kernel::boundary_distance(Index x) const {
  if (topology == Topology::kTree)
    return tree_depth - sites[static_cast<std::size_t>(x)].level;
  if (topology == Topology::kLine) {
    auto c = sites[static_cast<std::size_t>(x)].coord;
    return static_cast<int>(std::min(c - line_lo, line_hi - c));
  }
  int best = std::numeric_limits<int>::max();
  for (Index b = 0; b < size(); ++b)
    if (!is_interior(b)) best = std::min(best, distance(x, b));
  return best;
}

Kernel build_binary_tree(int depth) {
  require(depth >= 0, "build_binary_tree: depth must be >= 0");
  require(depth <= 24, "build_binary_tree: depth too large to materialize");
  TreeLayout lay(depth);
  const Index n = 2 * lay.per_side;
  Kernel k;
  k.topology = Topology::kTree;
  k.tree_depth = depth;
  k.sites.resize(static_cast<std::size_t>(n));
  k.escape = Eigen::VectorXd::Zero(n);
  k.p.resize(n, n);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(3 * n));
  const double r = 1.0 / 3.0;
  for (Index i = 0; i < n; ++i) {
    auto [side, level, off] = lay.locate(i);
    k.sites[static_cast<std::size_t>(i)] = SiteInfo{level, side, 0};
    if (level == 0) {
      Side other = side == Side::kLeft ? Side::kRight : Side::kLeft;
      trips.emplace_back(i, lay.index(other, 0, 0), r);
    } else {
      trips.emplace_back(i, lay.index(side, level - 1, off >> 1), r);
    }
    if (level < depth) {
      trips.emplace_back(i, lay.index(side, level + 1, 2 * off), r);
      trips.emplace_back(i, lay.index(side, level + 1, 2 * off + 1), r);
    } else {
      k.escape(i) = 2.0 * r;  // two absent children
      trips.emplace_back(i, i, 2.0 * r);
    }
  }
  k.p.setFromTriplets(trips.begin(), trips.end());
  k.p.makeCompressed();
  return k;
}

Kernel build_line_range(std::int64_t lo, std::int64_t hi, const JumpLaw& law) {
  require(hi >= lo, "build_line_range: empty range");
  double total = 0;
  for (const auto& [step, prob] : law) {
    require(prob >= 0, "build_line_range: negative probability");
    auto it = law.find(-step);
    require(it != law.end() && std::abs(it->second - prob) < 1e-14,
            "build_line_range: jump law must be symmetric");
    total += prob;
  }
  require(std::abs(total - 1.0) < 1e-12, "build_line_range: law must sum to 1");

  const Index n = hi - lo + 1;
  Kernel k;
  k.topology = Topology::kLine;
  k.line_lo = lo;
  k.line_hi = hi;
  k.jump_law = law;
  k.sites.resize(static_cast<std::size_t>(n));
  k.escape = Eigen::VectorXd::Zero(n);
  k.p.resize(n, n);
  for (const auto& [step, prob] : law) {
    k.jump_sigma2 += static_cast<double>(step) * static_cast<double>(step) * prob;
    if (std::abs(step) > hi - lo) k.truncated_law_mass += prob;
  }

  std::vector<Eigen::Triplet<double>> trips;
  for (Index i = 0; i < n; ++i) {
    std::int64_t c = lo + i;
    k.sites[static_cast<std::size_t>(i)] = SiteInfo{0, Side::kNone, c};
    double holding = 0, esc = 0;
    for (const auto& [step, prob] : law) {
      if (prob == 0) continue;
      if (step == 0) {
        holding += prob;
      } else if (c + step >= lo && c + step <= hi) {
        trips.emplace_back(i, i + step, prob);
      } else {
        esc += prob;
      }
    }
    if (holding + esc > 0) trips.emplace_back(i, i, holding + esc);
    k.escape(i) = esc;
  }
  k.p.setFromTriplets(trips.begin(), trips.end());
  k.p.makeCompressed();
  return k;
}

Kernel build_line(std::int64_t radius, const JumpLaw& law) {
  require(radius >= 1, "build_line: radius must be >= 1");
  return build_line_range(-radius, radius, law);
}

JumpLaw nearest_neighbor_law() { return JumpLaw{{-1, 0.5}, {1, 0.5}}; }

KilledKernel killed_truncation(const Kernel& k) {
  KilledKernel kk;
  kk.p = k.p;
  kk.escape = k.escape;
  kk.parent = &k;
  for (Index i = 0; i < k.size(); ++i) {
    if (k.escape(i) > 0) kk.p.coeffRef(i, i) -= k.escape(i);
  }
  kk.p.prune([](Index, Index, double v) { return v != 0.0; });
  kk.p.makeCompressed();
  return kk;
}

namespace {

Eigen::MatrixXd heat_kernel_impl(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& p, double t, double tol,
    Index site_cap) {
  require(t >= 0, "heat_kernel: t must be >= 0");
  const Index n = p.rows();
  require(n <= site_cap, "heat_kernel: kernel exceeds dense site cap");
  if (t == 0) return Eigen::MatrixXd::Identity(n, n);
  // e^{-t} sum t^m/m! P^m, stopping when the Poisson tail is below tol.
  double log_weight = -t;  // log of e^{-t} t^m / m! at m=0
  double weight = std::exp(log_weight);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd acc = weight * term;
  double cum = weight;
  const int max_terms = static_cast<int>(t + 12 * std::sqrt(t + 1) + 64);
  for (int m = 1; m <= max_terms && 1.0 - cum > tol; ++m) {
    term = p * term;  // term = P^m, entries (x,y)
    log_weight += std::log(t) - std::log(static_cast<double>(m));
    weight = std::exp(log_weight);
    acc += weight * term;
    cum += weight;
  }
  return acc;
}

}  // namespace

Eigen::MatrixXd heat_kernel(const Kernel& k, double t, double tol, Index cap) {
  return heat_kernel_impl(k.p, t, tol, cap);
}

Eigen::MatrixXd heat_kernel(const KilledKernel& k, double t, double tol,
                            Index cap) {
  return heat_kernel_impl(k.p, t, tol, cap);
}

Eigen::VectorXd green_column(const KilledKernel& k, Index y, double tol) {
  require(k.escape.sum() > 1e-12,
          "green_column: kernel is stochastic; Green series diverges on a "
          "recurrent finite chain",
          ErrorCode::kNumerical);
  const Index n = k.size();
  require(y >= 0 && y < n, "green_column: site out of range");
  Eigen::SparseMatrix<double> a(n, n);
  {
    Eigen::SparseMatrix<double> pc = k.p;  // column-major copy
    Eigen::SparseMatrix<double> id(n, n);
    id.setIdentity();
    a = id - pc;
  }
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                           Eigen::Lower | Eigen::Upper>
      cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(20000);
  cg.compute(a);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e(y) = 1.0;
  Eigen::VectorXd g = cg.solve(e);
  require(cg.info() == Eigen::Success, "green_column: CG did not converge",
          ErrorCode::kNonConvergence);
  return g;
}

double green_function(const KilledKernel& k, Index x, Index y, double tol) {
  return green_column(k, y, tol)(x);
}

WindowSupResult green_window_sup(const KilledKernel& k, const SiteWindow& w,
                                 double tol) {
  require(k.escape.sum() > 1e-12,
          "green_window_sup: kernel is stochastic; Green sums diverge",
          ErrorCode::kNumerical);
  const Index n = k.size();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (Index s : w.sites) {
    require(s >= 0 && s < n, "green_window_sup: window site out of range");
    b(s) = 1.0;
  }
  Eigen::SparseMatrix<double> pc = k.p;
  Eigen::SparseMatrix<double> id(n, n);
  id.setIdentity();
  Eigen::SparseMatrix<double> a = id - pc;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                           Eigen::Lower | Eigen::Upper>
      cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(20000);
  cg.compute(a);
  Eigen::VectorXd sums = cg.solve(b);
  require(cg.info() == Eigen::Success, "green_window_sup: CG did not converge",
          ErrorCode::kNonConvergence);
  WindowSupResult res;
  for (Index i = 0; i < n; ++i) {
    if (k.escape(i) > 0) continue;  // interior sites only
    if (sums(i) > res.value) {
      res.value = sums(i);
      res.argmax = i;
    }
  }
  return res;
}

SiteWindow SiteWindow::tree_level_below(const Kernel& k, int n,
                                        std::optional<Side> side) {
  require(k.topology == Topology::kTree, "window: tree kernel required");
  SiteWindow w;
  for (Index i = 0; i < k.size(); ++i) {
    const auto& s = k.sites[static_cast<std::size_t>(i)];
    if (s.level < n && (!side || s.side == *side)) w.sites.push_back(i);
  }
  std::ostringstream os;
  if (side) os << (*side == Side::kLeft ? "L&" : "R&");
  os << "level<" << n;
  w.description = os.str();
  return w;
}

SiteWindow SiteWindow::tree_level_equal(const Kernel& k, int n,
                                        std::optional<Side> side) {
  require(k.topology == Topology::kTree, "window: tree kernel required");
  SiteWindow w;
  for (Index i = 0; i < k.size(); ++i) {
    const auto& s = k.sites[static_cast<std::size_t>(i)];
    if (s.level == n && (!side || s.side == *side)) w.sites.push_back(i);
  }
  std::ostringstream os;
  if (side) os << (*side == Side::kLeft ? "L&" : "R&");
  os << "level=" << n;
  w.description = os.str();
  return w;
}

SiteWindow SiteWindow::coord_positive(const Kernel& k) {
  require(k.topology == Topology::kLine, "window: line kernel required");
  SiteWindow w;
  for (Index i = 0; i < k.size(); ++i)
    if (k.sites[static_cast<std::size_t>(i)].coord > 0) w.sites.push_back(i);
  w.description = "coord>0";
  return w;
}

SiteWindow SiteWindow::parse(const Kernel& k, const std::string& text) {
  std::string rest = text;
  std::optional<Side> side;
  if (rest.rfind("L&", 0) == 0) { side = Side::kLeft; rest = rest.substr(2); }
  else if (rest.rfind("R&", 0) == 0) { side = Side::kRight; rest = rest.substr(2); }
  if (rest == "coord>0") return coord_positive(k);
  if (rest.rfind("level<", 0) == 0)
    return tree_level_below(k, std::stoi(rest.substr(6)), side);
  if (rest.rfind("level=", 0) == 0)
    return tree_level_equal(k, std::stoi(rest.substr(6)), side);
  throw Error(ErrorCode::kValidation, "window: cannot parse '" + text + "'");
}

HarmonicProfile tree_alpha(const Kernel& tree, double lambda, double rho) {
  require(tree.topology == Topology::kTree, "tree_alpha: tree kernel required");
  require(lambda >= 0 && lambda <= 1 && rho >= 0 && rho <= 1,
          "tree_alpha: lambda, rho must lie in [0,1]");
  HarmonicProfile a;
  a.lambda = lambda;
  a.rho = rho;
  a.values.resize(tree.size());
  for (Index i = 0; i < tree.size(); ++i) {
    const auto& s = tree.sites[static_cast<std::size_t>(i)];
    const double scale = 3.0 * std::pow(2.0, s.level);
    a.values(i) = s.side == Side::kLeft ? lambda + (rho - lambda) / scale
                                        : rho + (lambda - rho) / scale;
  }
  return a;
}

HarmonicProfile line_alpha(const Kernel& line, double lambda, double rho) {
  require(line.topology == Topology::kLine, "line_alpha: line kernel required");
  HarmonicProfile a;
  a.lambda = lambda;
  a.rho = rho;
  a.values.resize(line.size());
  const double span = static_cast<double>(line.line_hi - line.line_lo);
  for (Index i = 0; i < line.size(); ++i) {
    const double frac =
        span == 0 ? 0.5
                  : static_cast<double>(line.sites[static_cast<std::size_t>(i)].coord -
                                        line.line_lo) /
                        span;
    a.values(i) = lambda + (rho - lambda) * frac;
  }
  return a;
}

HarmonicProfile constant_alpha(const Kernel& k, double value) {
  require(value >= 0 && value <= 1, "constant_alpha: value must lie in [0,1]");
  HarmonicProfile a;
  a.lambda = a.rho = value;
  a.values = Eigen::VectorXd::Constant(k.size(), value);
  return a;
}

HarmonicProfile explicit_alpha(const Kernel& k, Eigen::VectorXd values) {
  require(values.size() == k.size(), "explicit_alpha: size mismatch");
  require(values.minCoeff() >= 0 && values.maxCoeff() <= 1,
          "explicit_alpha: marginals must lie in [0,1]");
  HarmonicProfile a;
  a.lambda = values(0);
  a.rho = values(values.size() - 1);
  a.values = std::move(values);
  return a;
}

double harmonicity_residual(const Kernel& k, const HarmonicProfile& alpha) {
  require(alpha.values.size() == k.size(), "harmonicity_residual: size mismatch");
  // Difference form sum p(x,y)(alpha(y) - alpha(x)): exact zero for constant
  // profiles even though the stored rates only sum to one up to rounding.
  double worst = 0;
  for (Index x = 0; x < k.size(); ++x) {
    if (!k.is_interior(x)) continue;
    double acc = 0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
         it; ++it) {
      if (it.col() == x) continue;
      acc += it.value() * (alpha.values(it.col()) - alpha.values(x));
    }
    worst = std::max(worst, std::abs(acc));
  }
  return worst;
}

DirichletResult dirichlet_sum(const Kernel& k, const HarmonicProfile& alpha) {
  require(alpha.values.size() == k.size(), "dirichlet_sum: size mismatch");
  DirichletResult res;
  std::vector<double> per_level;
  for (Index x = 0; x < k.size(); ++x) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
         it; ++it) {
      if (it.col() == x) continue;
      const double d = alpha.values(it.col()) - alpha.values(x);
      const double contrib = it.value() * d * d;
      res.value += contrib;
      if (k.topology == Topology::kTree) {
        const int lvl = std::max(k.sites[static_cast<std::size_t>(x)].level,
                                 k.sites[static_cast<std::size_t>(it.col())].level);
        if (per_level.size() <= static_cast<std::size_t>(lvl))
          per_level.resize(static_cast<std::size_t>(lvl) + 1, 0.0);
        per_level[static_cast<std::size_t>(lvl)] += contrib;
      }
    }
  }
  for (std::size_t l = 0; l < per_level.size(); ++l) {
    if (per_level[l] < 1e-12) {
      res.tail_level = static_cast<int>(l);
      break;
    }
  }
  return res;
}

std::string kernel_to_json(const Kernel& k) {
  nlohmann::json j;
  j["topology"] = k.topology == Topology::kTree   ? "tree"
                  : k.topology == Topology::kLine ? "line"
                                                  : "custom";
  if (k.topology == Topology::kTree) j["depth"] = k.tree_depth;
  if (k.topology == Topology::kLine) {
    j["lo"] = k.line_lo;
    j["hi"] = k.line_hi;
  }
  nlohmann::json sites = nlohmann::json::array();
  for (Index i = 0; i < k.size(); ++i) {
    const auto& s = k.sites[static_cast<std::size_t>(i)];
    nlohmann::json js;
    js["id"] = k.site_label(i);
    js["level"] = s.level;
    js["side"] = s.side == Side::kLeft ? "L" : s.side == Side::kRight ? "R" : "";
    js["coord"] = s.coord;
    sites.push_back(js);
  }
  j["sites"] = sites;
  nlohmann::json edges = nlohmann::json::array();
  nlohmann::json holding = nlohmann::json::array();
  for (Index x = 0; x < k.size(); ++x) {
    double hold = 0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
         it; ++it) {
      if (it.col() == x) hold = it.value();
      else if (it.col() > x) edges.push_back({x, it.col(), it.value()});
    }
    holding.push_back(hold);
  }
  j["edges"] = edges;
  j["holding"] = holding;
  return j.dump(2);
}

Kernel kernel_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const std::string topo = j.at("topology");
  if (topo == "tree") return build_binary_tree(j.at("depth").get<int>());
  if (topo == "line") {
    // Edges encode the law implicitly; rebuild from the explicit matrix.
    const auto& sites = j.at("sites");
    const Index n = static_cast<Index>(sites.size());
    Kernel k;
    k.topology = Topology::kLine;
    k.line_lo = sites.front().at("coord").get<std::int64_t>();
    k.line_hi = sites.back().at("coord").get<std::int64_t>();
    k.sites.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      k.sites[static_cast<std::size_t>(i)] =
          SiteInfo{0, Side::kNone, sites[static_cast<std::size_t>(i)].at("coord").get<std::int64_t>()};
    std::vector<Eigen::Triplet<double>> trips;
    for (const auto& e : j.at("edges")) {
      Index a = e[0], b = e[1];
      double v = e[2];
      trips.emplace_back(a, b, v);
      trips.emplace_back(b, a, v);
    }
    const auto& holding = j.at("holding");
    for (Index i = 0; i < n; ++i) {
      double h = holding[static_cast<std::size_t>(i)];
      if (h > 0) trips.emplace_back(i, i, h);
    }
    k.p.resize(n, n);
    k.p.setFromTriplets(trips.begin(), trips.end());
    k.p.makeCompressed();
    k.escape = Eigen::VectorXd::Zero(n);
    // Boundary escape: holding in excess of the interior holding level.
    double interior_hold = 0;
    if (n >= 3) interior_hold = k.p.coeff(n / 2, n / 2);
    for (Index i = 0; i < n; ++i) {
      double h = k.p.coeff(i, i);
      if (h > interior_hold + 1e-15) k.escape(i) = h - interior_hold;
    }
    return k;
  }
  throw Error(ErrorCode::kValidation, "kernel_from_json: unsupported topology");
}

}  // namespace sep::kernels
