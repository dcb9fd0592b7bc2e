// Command-line harness: stability checks, exact evolution, Green functions,
// dual covariances, stirring Monte Carlo, and the verification scenarios.
//
// Exit codes: 0 success, 1 negative verdict under --assert or failed
// verification, 2 usage/validation error, 3 numerical failure.

#include <complex>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sep/dualcorr.hpp"
#include "sep/exactevolve.hpp"
#include "sep/genpoly.hpp"
#include "sep/kernels.hpp"
#include "sep/simulate.hpp"
#include "sep/stats.hpp"
#include "sep/treequotient.hpp"
#include "sep/verify.hpp"

namespace {

using sep::Index;
namespace kernels = sep::kernels;
namespace genpoly = sep::genpoly;
namespace exactevolve = sep::exactevolve;
namespace dualcorr = sep::dualcorr;
namespace simulate = sep::simulate;

constexpr const char* kBuildId = "exclusion-0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  sep::require(in.good(), "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  sep::require(out.good(), "cannot write " + path);
  out << content;
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const std::vector<std::string>& args, std::uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& files) {
  nlohmann::json j;
  j["command"] = command;
  j["args"] = args;
  j["master_seed"] = seed;
  j["build"] = kBuildId;
  nlohmann::json hashes;
  for (const auto& [role, path] : files) {
    const std::string bytes = read_file(path);
    std::ostringstream hex;
    hex << std::hex << simulate::hash_bytes(bytes.data(), bytes.size());
    hashes[role] = {{"path", path}, {"fnv1a64", hex.str()}};
  }
  j["files"] = hashes;
  write_file(out_path + ".manifest.json", j.dump(2));
}

std::complex<double> parse_complex(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) return {std::stod(text), 0.0};
  return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
}

// Site forms: "L:level:offset" / "R:level:offset" on trees, integer
// coordinate on lines.
Index parse_site(const kernels::Kernel& k, const std::string& text) {
  if (!text.empty() && (text[0] == 'L' || text[0] == 'R')) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    sep::require(c1 != std::string::npos && c2 != std::string::npos,
                 "site: expected L:level:offset");
    return k.site_at(text[0] == 'L' ? kernels::Side::kLeft : kernels::Side::kRight,
                     std::stoi(text.substr(c1 + 1, c2 - c1 - 1)),
                     std::stoll(text.substr(c2 + 1)));
  }
  return k.site_at_coord(std::stoll(text));
}

kernels::HarmonicProfile parse_alpha(const kernels::Kernel& k,
                                     const std::string& text) {
  if (text.rfind("const:", 0) == 0)
    return kernels::constant_alpha(k, std::stod(text.substr(6)));
  const auto comma = text.find(',');
  sep::require(comma != std::string::npos,
               "alpha: expected const:c or lambda,rho");
  const double lam = std::stod(text.substr(0, comma));
  const double rho = std::stod(text.substr(comma + 1));
  return k.topology == kernels::Topology::kTree ? kernels::tree_alpha(k, lam, rho)
                                                : kernels::line_alpha(k, lam, rho);
}

int run(int argc, char** argv) {
  CLI::App app{"symmetric exclusion process toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  std::vector<std::string> raw_args(argv + 1, argv + argc);

  std::uint64_t seed = 1;
  int jobs = 2;
  std::string out_path;
  std::string format = "json";
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--jobs", jobs, "worker threads")->capture_default_str();
  app.add_option("--out", out_path, "output file (or prefix)");
  app.add_option("--format", format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));

  // ---- stability ----
  auto* stab = app.add_subcommand("stability", "stability / Rayleigh checks");
  stab->require_subcommand(1);
  bool assert_flag = false;
  stab->add_flag("--assert", assert_flag, "exit 1 on a negative verdict");

  auto* pair = stab->add_subcommand("pair", "two-variable multi-affine criterion");
  std::string a_s = "0", b_s = "0", c_s = "0", d_s = "0";
  double margin_tol = 1e-12;
  pair->add_option("--a", a_s, "coefficient a as re[,im]");
  pair->add_option("--b", b_s, "coefficient b");
  pair->add_option("--c", c_s, "coefficient c");
  pair->add_option("--d", d_s, "coefficient d");
  pair->add_option("--margin-tol", margin_tol, "boundary tolerance");

  auto* decomp = stab->add_subcommand("decompose", "Bernoulli decomposition of the count law");
  std::string dist_path;
  double decomp_tol = 1e-8;
  decomp->add_option("--dist", dist_path, "distribution JSON file")->required();
  decomp->add_option("--tol", decomp_tol, "real-rootedness tolerance");

  auto* rayl = stab->add_subcommand("rayleigh", "sampled Rayleigh inequality check");
  std::string rayl_dist;
  int rayl_points = 100;
  rayl->add_option("--dist", rayl_dist, "distribution JSON file")->required();
  rayl->add_option("--points", rayl_points, "random evaluation points");

  auto* rroot = stab->add_subcommand("realroot", "real-rootedness of the count law");
  std::string rroot_dist, rroot_coeffs;
  rroot->add_option("--dist", rroot_dist, "distribution JSON file");
  rroot->add_option("--coeffs", rroot_coeffs, "comma-separated coefficients");

  // ---- evolve ----
  auto* evolve_cmd = app.add_subcommand("evolve", "exact master-equation evolution");
  std::string ev_kernel = "line:2", ev_alpha = "const:0.5", ev_dist_path;
  double ev_t = 1.0, ev_tol = 1e-13;
  int stirring_steps = 0, trace_steps = 0;
  evolve_cmd->add_option("--kernel", ev_kernel, "tree:D | line:R | line:lo:hi");
  evolve_cmd->add_option("--alpha", ev_alpha, "const:c | lambda,rho (product initial)");
  evolve_cmd->add_option("--dist", ev_dist_path, "initial distribution JSON (overrides --alpha)");
  evolve_cmd->add_option("--t", ev_t, "horizon");
  evolve_cmd->add_option("--tol", ev_tol, "uniformization tail tolerance");
  evolve_cmd->add_option("--stirring-steps", stirring_steps,
                         "use the Trotter stirring product with this many steps");
  evolve_cmd->add_option("--trace", trace_steps,
                         "emit per-step diagnostics over this many sub-steps");

  // ---- green ----
  auto* green_cmd = app.add_subcommand("green", "killed-walk Green functions");
  std::string gr_kernel = "tree:12", gr_pair, gr_window;
  double gr_tol = 1e-12;
  green_cmd->add_option("--kernel", gr_kernel, "tree:D | line:R | line:lo:hi");
  green_cmd->add_option("--pair", gr_pair, "x,y sites (L:lvl:off or coordinate)");
  green_cmd->add_option("--window", gr_window, "window expression, e.g. L&level<6");
  green_cmd->add_option("--tol", gr_tol, "solver tolerance");

  // ---- dual-cov ----
  auto* dual_cmd = app.add_subcommand("dual-cov", "two-particle dual covariances");
  std::string du_kernel = "line:3", du_pair, du_window, du_mode = "proxy";
  double du_lambda = 0.0, du_rho = 1.0, du_tol = 1e-8;
  dual_cmd->add_option("--kernel", du_kernel, "tree:D | line:R | line:lo:hi");
  dual_cmd->add_option("--lambda", du_lambda, "profile left density");
  dual_cmd->add_option("--rho", du_rho, "profile right density");
  dual_cmd->add_option("--pair", du_pair, "x,y sites");
  dual_cmd->add_option("--window", du_window, "window for the variance ratio");
  dual_cmd->add_option("--mode", du_mode, "proxy|exact")
      ->check(CLI::IsMember({"proxy", "exact"}));
  dual_cmd->add_option("--tol", du_tol, "integration tolerance");

  // ---- simulate ----
  auto* sim_cmd = app.add_subcommand("simulate", "stirring Monte Carlo experiments");
  std::string sim_spec_path, sim_kernel, sim_init = "product", sim_stat = "w_plus",
              sim_window, sim_alpha = "0,1";
  double sim_t = 1.0;
  std::int64_t sim_replicas = 100;
  sim_cmd->add_option("--spec", sim_spec_path, "experiment spec JSON (flags override)");
  sim_cmd->add_option("--kernel", sim_kernel, "tree:D | line:R | line:lo:hi");
  sim_cmd->add_option("--initial", sim_init, "product|step")
      ->check(CLI::IsMember({"product", "step"}));
  sim_cmd->add_option("--alpha", sim_alpha, "const:c | lambda,rho");
  sim_cmd->add_option("--statistic", sim_stat, "w_plus|window")
      ->check(CLI::IsMember({"w_plus", "window"}));
  sim_cmd->add_option("--window", sim_window, "window expression");
  sim_cmd->add_option("--t", sim_t, "horizon");
  sim_cmd->add_option("--replicas", sim_replicas, "replica count");

  // ---- verify ----
  auto* verify_cmd = app.add_subcommand("verify", "verification scenarios");
  std::string scenario;
  verify_cmd->add_option("scenario", scenario,
                         "constants|thm1|thm2|thm3|pairstability|preservation|exactmc|"
                         "duality|countlaw|covariance|hconst|all|criterion:<k>")
      ->required();
  sep::verify::Options vopts;
  double v_t = 0;
  std::int64_t v_replicas = 0;
  int v_depth = 0, v_level = 0;
  verify_cmd->add_option("--t", v_t, "horizon override");
  verify_cmd->add_option("--replicas", v_replicas, "replica override");
  verify_cmd->add_option("--depth", v_depth, "tree depth override");
  verify_cmd->add_option("--level", v_level, "window level override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  nlohmann::json out_json;
  bool verdict_pass = true;

  if (pair->parsed()) {
    genpoly::PairCoefficients pc{parse_complex(a_s), parse_complex(b_s),
                                 parse_complex(c_s), parse_complex(d_s)};
    genpoly::StabilityReport rep = genpoly::pair_stability(pc, margin_tol);
    out_json["stable"] = rep.stable;
    out_json["boundary"] = rep.boundary;
    out_json["slack"] = rep.slack;
    verdict_pass = rep.stable;
  } else if (decomp->parsed()) {
    auto dist = genpoly::SubsetDistribution::from_json(read_file(dist_path));
    genpoly::BernoulliVector p = genpoly::bernoulli_decomposition(dist, decomp_tol);
    out_json["p"] = p;
    out_json["count_poly"] =
        nlohmann::json::parse(genpoly::diagonalize(dist).to_json());
  } else if (rayl->parsed()) {
    auto dist = genpoly::SubsetDistribution::from_json(read_file(rayl_dist));
    auto points = genpoly::default_rayleigh_points(dist.n(), rayl_points, seed);
    auto rep = genpoly::rayleigh_check(dist, points, genpoly::all_pairs(dist.n()));
    out_json["passed"] = rep.passed;
    out_json["min_value"] = rep.min_value;
    out_json["points"] = points.size();
    out_json["note"] =
        "sampled necessary condition, not a proof of the strong Rayleigh property";
    verdict_pass = rep.passed;
  } else if (rroot->parsed()) {
    genpoly::UnivariatePoly poly;
    if (!rroot_dist.empty()) {
      poly = genpoly::diagonalize(
          genpoly::SubsetDistribution::from_json(read_file(rroot_dist)));
    } else {
      sep::require(!rroot_coeffs.empty(), "realroot: need --dist or --coeffs");
      std::vector<double> cs;
      std::stringstream ss(rroot_coeffs);
      std::string tok;
      while (std::getline(ss, tok, ',')) cs.push_back(std::stod(tok));
      poly.coeffs = Eigen::Map<Eigen::VectorXd>(cs.data(), static_cast<Index>(cs.size()));
    }
    auto rep = genpoly::real_rooted(poly, 1e-9);
    out_json["real_rooted"] = rep.real_rooted;
    out_json["margin"] = rep.margin;
    out_json["roots_at_infinity"] = rep.roots_at_infinity;
    nlohmann::json roots = nlohmann::json::array();
    for (const auto& r : rep.roots) roots.push_back({r.real(), r.imag()});
    out_json["roots"] = roots;
    verdict_pass = rep.real_rooted;
  } else if (evolve_cmd->parsed()) {
    kernels::Kernel k = simulate::kernel_from_spec(ev_kernel);
    sep::require(k.size() <= exactevolve::kSiteCap,
                 "evolve: kernel exceeds the exact-evolution site cap");
    auto gen = exactevolve::build_generator(k);
    genpoly::SubsetDistribution dist = [&] {
      if (!ev_dist_path.empty())
        return genpoly::SubsetDistribution::from_json(read_file(ev_dist_path));
      kernels::HarmonicProfile prof = parse_alpha(k, ev_alpha);
      std::vector<double> alphas(prof.values.data(),
                                 prof.values.data() + prof.values.size());
      return genpoly::from_product(alphas);
    }();
    genpoly::SubsetDistribution result = dist;
    nlohmann::json trace = nlohmann::json::array();
    if (trace_steps > 0) {
      genpoly::SubsetDistribution prev = dist;
      for (int s = 1; s <= trace_steps; ++s) {
        const double target = ev_t * s / trace_steps;
        genpoly::SubsetDistribution next =
            stirring_steps > 0
                ? exactevolve::evolve_stirring_products(dist, gen, target,
                                                        stirring_steps)
                : exactevolve::evolve(dist, gen, target, ev_tol);
        auto pts = genpoly::default_rayleigh_points(result.n(), 20, seed);
        auto rep = genpoly::rayleigh_check(next, pts, genpoly::all_pairs(next.n()));
        auto rr = genpoly::real_rooted(genpoly::diagonalize(next), 1e-8);
        nlohmann::json step_line{{"step", s},
                                 {"t", target},
                                 {"tv_change", next.total_variation(prev)},
                                 {"rayleigh_min", rep.min_value},
                                 {"realroot_margin", rr.margin}};
        // Diagnostics stream as JSON lines; the final state goes to --out.
        if (!out_path.empty()) std::cout << step_line.dump() << "\n";
        trace.push_back(step_line);
        prev = next;
        if (s == trace_steps) result = next;
      }
    } else {
      result = stirring_steps > 0
                   ? exactevolve::evolve_stirring_products(dist, gen, ev_t,
                                                           stirring_steps)
                   : exactevolve::evolve(dist, gen, ev_t, ev_tol);
    }
    out_json = nlohmann::json::parse(result.to_json());
    if (trace_steps > 0) out_json["trace"] = trace;
  } else if (green_cmd->parsed()) {
    kernels::Kernel k = simulate::kernel_from_spec(gr_kernel);
    kernels::KilledKernel killed = kernels::killed_truncation(k);
    if (!gr_pair.empty()) {
      const auto comma = gr_pair.find(',');
      sep::require(comma != std::string::npos, "green: --pair needs x,y");
      const Index x = parse_site(k, gr_pair.substr(0, comma));
      const Index y = parse_site(k, gr_pair.substr(comma + 1));
      out_json["pair"] = gr_pair;
      out_json["distance"] = k.distance(x, y);
      out_json["value"] = kernels::green_function(killed, x, y, gr_tol);
    } else {
      sep::require(!gr_window.empty(), "green: need --pair or --window");
      kernels::SiteWindow w = kernels::SiteWindow::parse(k, gr_window);
      auto sup = kernels::green_window_sup(killed, w, gr_tol);
      out_json["window"] = gr_window;
      out_json["value"] = sup.value;
      out_json["argmax_site"] = k.site_label(sup.argmax);
    }
    out_json["tolerances"] = {{"solver", gr_tol}};
  } else if (dual_cmd->parsed()) {
    kernels::Kernel k = simulate::kernel_from_spec(du_kernel);
    kernels::HarmonicProfile prof =
        k.topology == kernels::Topology::kTree
            ? kernels::tree_alpha(k, du_lambda, du_rho)
            : kernels::line_alpha(k, du_lambda, du_rho);
    dualcorr::DualOptions dopts;
    dopts.mode = du_mode == "proxy" ? dualcorr::DualMode::kInfiniteProxy
                                    : dualcorr::DualMode::kTruncationExact;
    dopts.tol = du_tol;
    dopts.enforce_monitor = false;
    if (!du_pair.empty()) {
      const auto comma = du_pair.find(',');
      sep::require(comma != std::string::npos, "dual-cov: --pair needs x,y");
      const Index x = parse_site(k, du_pair.substr(0, comma));
      const Index y = parse_site(k, du_pair.substr(comma + 1));
      auto rep = dualcorr::stationary_neg_covariance(k, prof, x, y, dopts);
      out_json["pair"] = du_pair;
      out_json["value"] = rep.value;
      out_json["horizon_T"] = rep.horizon;
      out_json["boundary_leak"] = rep.boundary_leak;
      out_json["monitor_ok"] = rep.monitor_ok;
    } else {
      sep::require(!du_window.empty(), "dual-cov: need --pair or --window");
      kernels::SiteWindow w = kernels::SiteWindow::parse(k, du_window);
      auto rep = dualcorr::variance_ratio(k, prof, w, dopts);
      out_json["window"] = du_window;
      out_json["variance"] = rep.variance;
      out_json["ratio"] = rep.ratio;
      out_json["bernoulli_sum"] = rep.bernoulli_sum;
      out_json["horizon_T"] = rep.diagnostics.horizon;
      out_json["boundary_leak"] = rep.diagnostics.boundary_leak;
    }
    out_json["tolerances"] = {{"integration", du_tol}};
  } else if (sim_cmd->parsed()) {
    simulate::ExperimentSpec spec;
    if (!sim_spec_path.empty())
      spec = simulate::ExperimentSpec::from_json(read_file(sim_spec_path));
    if (!sim_kernel.empty()) spec.kernel_spec = sim_kernel;
    sep::require(!spec.kernel_spec.empty(), "simulate: kernel spec required");
    if (sim_cmd->count("--initial") || spec.kernel_spec == sim_kernel) {
      spec.initial = sim_init == "step" ? simulate::InitialLaw::kStep
                                        : simulate::InitialLaw::kProduct;
    }
    if (sim_cmd->count("--alpha")) {
      if (sim_alpha.rfind("const:", 0) == 0) {
        spec.alpha_const = std::stod(sim_alpha.substr(6));
      } else {
        const auto comma = sim_alpha.find(',');
        sep::require(comma != std::string::npos, "simulate: bad --alpha");
        spec.alpha_lambda = std::stod(sim_alpha.substr(0, comma));
        spec.alpha_rho = std::stod(sim_alpha.substr(comma + 1));
      }
    }
    if (sim_cmd->count("--t")) spec.t = sim_t;
    if (sim_cmd->count("--replicas")) spec.replicas = sim_replicas;
    if (sim_cmd->count("--statistic"))
      spec.statistic = sim_stat == "w_plus" ? simulate::Statistic::kWPlus
                                            : simulate::Statistic::kWindowSum;
    if (sim_cmd->count("--window")) spec.window_text = sim_window;
    spec.master_seed = seed;
    simulate::SampleSet set = simulate::run_experiment(spec, jobs);
    const std::string base = out_path.empty() ? "samples" : out_path;
    write_file(base + ".csv", set.csv());
    write_file(base + ".json", set.sidecar_json());
    write_manifest(base, "simulate", raw_args, seed,
                   {{"samples_csv", base + ".csv"}, {"sidecar", base + ".json"}});
    std::cout << "wrote " << base << ".csv (" << set.samples.back().size()
              << " replicas)\n";
    return 0;
  } else if (verify_cmd->parsed()) {
    vopts.seed = seed;
    vopts.jobs = jobs;
    vopts.t = v_t;
    vopts.replicas = v_replicas;
    vopts.depth = v_depth;
    vopts.level = v_level;
    std::vector<int> ids;
    if (scenario == "all") {
      for (int i = 1; i <= sep::verify::criterion_count(); ++i) ids.push_back(i);
    } else if (scenario.rfind("criterion:", 0) == 0) {
      ids.push_back(std::stoi(scenario.substr(10)));
    } else if (scenario == "pairstability") ids = {1};
    else if (scenario == "preservation") ids = {2};
    else if (scenario == "exactmc") ids = {3};
    else if (scenario == "duality") ids = {4};
    else if (scenario == "countlaw") ids = {5};
    else if (scenario == "covariance") ids = {6};
    else if (scenario == "constants") ids = {7};
    else if (scenario == "thm2") ids = {8};
    else if (scenario == "thm3") ids = {9};
    else if (scenario == "hconst") ids = {10};
    else if (scenario == "thm1") ids = {11};
    else throw sep::Error(sep::ErrorCode::kValidation, "unknown scenario " + scenario);

    bool all_pass = true;
    nlohmann::json reports = nlohmann::json::array();
    for (int id : ids) {
      sep::verify::CheckResult r = sep::verify::run_criterion(id, vopts);
      all_pass = all_pass && r.pass;
      std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << id << "/"
                << sep::verify::criterion_count() << " " << r.name << " ("
                << r.seconds << "s)\n";
      for (const auto& line : r.lines) std::cout << "       " << line << "\n";
      nlohmann::json jr;
      jr["id"] = id;
      jr["name"] = r.name;
      jr["pass"] = r.pass;
      jr["lines"] = r.lines;
      jr["seconds"] = r.seconds;
      reports.push_back(jr);
    }
    if (!out_path.empty()) {
      write_file(out_path, reports.dump(2));
      write_manifest(out_path, "verify", raw_args, seed, {{"report", out_path}});
    }
    return all_pass ? 0 : 1;
  }

  const std::string text = out_json.dump(2);
  if (!out_path.empty()) {
    write_file(out_path, text);
    write_manifest(out_path, app.get_subcommands().front()->get_name(), raw_args,
                   seed, {{"output", out_path}});
  } else {
    std::cout << text << "\n";
  }
  if (assert_flag && !verdict_pass) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sep::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == sep::ErrorCode::kValidation ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
