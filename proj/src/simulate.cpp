#include "sep/simulate.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace sep::simulate {

Configuration sample_product(const kernels::HarmonicProfile& alpha,
                             rng::Stream& stream) {
  Configuration c(static_cast<std::size_t>(alpha.values.size()));
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = stream.bernoulli(alpha.values(static_cast<Index>(i))) ? 1 : 0;
  return c;
}

Configuration step_initial(const kernels::Kernel& line) {
  require(line.topology == kernels::Topology::kLine,
          "step_initial: line kernel required");
  Configuration c(static_cast<std::size_t>(line.size()));
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = line.sites[i].coord <= 0 ? 1 : 0;
  return c;
}

namespace {

std::vector<double> edge_weights(const kernels::Kernel& k,
                                 std::vector<std::pair<Index, Index>>& edges) {
  std::vector<double> weights;
  for (Index x = 0; x < k.size(); ++x) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(k.p, x);
         it; ++it) {
      if (it.col() <= x || it.value() <= 0) continue;
      edges.emplace_back(x, it.col());
      weights.push_back(it.value());
    }
  }
  return weights;
}

}  // namespace

StirringEngine::StirringEngine(const kernels::Kernel& k)
    : kernel_(&k), alias_([&] {
        std::vector<double> w = edge_weights(k, edges_);
        for (double r : w) total_rate_ += r;
        // Edgeless kernels (single site) stir nothing; keep a dummy table.
        if (w.empty()) w.push_back(1.0);
        return rng::AliasTable(w);
      }()) {
  edge_boundary_margin_.reserve(edges_.size());
  for (const auto& [a, b] : edges_)
    edge_boundary_margin_.push_back(
        std::min(k.boundary_distance(a), k.boundary_distance(b)));
}

void StirringEngine::evolve(Configuration& config, double t,
                            rng::Stream& stream, Monitor* monitor) const {
  require(config.size() == static_cast<std::size_t>(kernel_->size()),
          "StirringEngine: configuration size mismatch");
  require(t >= 0, "StirringEngine: t must be >= 0");
  if (t == 0 || total_rate_ == 0) return;
  const std::uint64_t events = stream.poisson(total_rate_ * t);
  for (std::uint64_t e = 0; e < events; ++e) {
    const std::size_t idx = alias_.sample(stream);
    const auto [a, b] = edges_[idx];
    const std::uint8_t va = config[static_cast<std::size_t>(a)];
    const std::uint8_t vb = config[static_cast<std::size_t>(b)];
    if (monitor && va != vb &&
        edge_boundary_margin_[idx] < monitor->boundary_margin) {
      monitor->boundary_swap_changed = true;
    }
    config[static_cast<std::size_t>(a)] = vb;
    config[static_cast<std::size_t>(b)] = va;
  }
}

std::int64_t window_sum(const Configuration& config,
                        const kernels::SiteWindow& window) {
  std::int64_t total = 0;
  for (Index s : window.sites) total += config[static_cast<std::size_t>(s)];
  return total;
}

std::int64_t w_plus(const Configuration& config, const kernels::Kernel& line) {
  require(line.topology == kernels::Topology::kLine, "w_plus: line kernel required");
  std::int64_t total = 0;
  for (std::size_t i = 0; i < config.size(); ++i)
    if (line.sites[i].coord > 0) total += config[i];
  return total;
}

std::string ExperimentSpec::to_json() const {
  nlohmann::json j;
  j["kernel"] = kernel_spec;
  j["initial"] = initial == InitialLaw::kProduct ? "product"
                 : initial == InitialLaw::kStep  ? "step"
                                                 : "explicit";
  j["alpha_lambda"] = alpha_lambda;
  j["alpha_rho"] = alpha_rho;
  if (alpha_const) j["alpha_const"] = *alpha_const;
  if (!explicit_initial.empty())
    j["explicit_initial"] = std::vector<int>(explicit_initial.begin(),
                                             explicit_initial.end());
  j["t"] = t;
  j["statistic"] = statistic == Statistic::kWPlus ? "w_plus" : "window_sum";
  if (!window_text.empty()) j["window"] = window_text;
  if (!checkpoint_times.empty()) j["checkpoints"] = checkpoint_times;
  j["replicas"] = replicas;
  j["master_seed"] = master_seed;
  return j.dump(2);
}

ExperimentSpec ExperimentSpec::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ExperimentSpec s;
  s.kernel_spec = j.at("kernel");
  const std::string init = j.value("initial", "product");
  s.initial = init == "product" ? InitialLaw::kProduct
              : init == "step"  ? InitialLaw::kStep
                                : InitialLaw::kExplicit;
  s.alpha_lambda = j.value("alpha_lambda", 0.0);
  s.alpha_rho = j.value("alpha_rho", 1.0);
  if (j.contains("alpha_const")) s.alpha_const = j["alpha_const"].get<double>();
  if (j.contains("explicit_initial")) {
    for (int v : j["explicit_initial"])
      s.explicit_initial.push_back(static_cast<std::uint8_t>(v));
  }
  s.t = j.value("t", 0.0);
  const std::string stat = j.value("statistic", "w_plus");
  s.statistic = stat == "w_plus" ? Statistic::kWPlus : Statistic::kWindowSum;
  s.window_text = j.value("window", std::string{});
  if (j.contains("checkpoints"))
    s.checkpoint_times = j["checkpoints"].get<std::vector<double>>();
  s.replicas = j.value("replicas", std::int64_t{1});
  s.master_seed = j.value("master_seed", std::uint64_t{0});
  return s;
}

kernels::Kernel kernel_from_spec(const std::string& spec) {
  if (spec.rfind("tree:", 0) == 0)
    return kernels::build_binary_tree(std::stoi(spec.substr(5)));
  if (spec.rfind("line:", 0) == 0) {
    const std::string rest = spec.substr(5);
    const auto colon = rest.find(':');
    if (colon == std::string::npos)
      return kernels::build_line(std::stoll(rest), kernels::nearest_neighbor_law());
    // "line:lo:hi" range form
    return kernels::build_line_range(std::stoll(rest.substr(0, colon)),
                                     std::stoll(rest.substr(colon + 1)),
                                     kernels::nearest_neighbor_law());
  }
  throw Error(ErrorCode::kValidation, "kernel spec: expected tree:D or line:R");
}

std::uint64_t hash_bytes(const void* data, std::size_t len, std::uint64_t seed) {
  // FNV-1a
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string SampleSet::csv() const {
  std::ostringstream os;
  os << "replica,seed,statistic,value\n";
  const std::string stat_name =
      spec.statistic == Statistic::kWPlus ? "w_plus" : "window_sum";
  for (std::size_t c = 0; c < times.size(); ++c) {
    std::ostringstream name;
    name << stat_name;
    if (times.size() > 1) name << "@t=" << times[c];
    for (std::size_t r = 0; r < samples[c].size(); ++r) {
      os << r << "," << replica_seeds[r] << "," << name.str() << ","
         << samples[c][r] << "\n";
    }
  }
  return os.str();
}

std::string SampleSet::sidecar_json() const {
  nlohmann::json j;
  j["spec"] = nlohmann::json::parse(spec.to_json());
  j["master_seed"] = spec.master_seed;
  j["kernel_hash"] = kernel_hash;
  j["truncation_monitor"] = {{"boundary_clean_fraction", boundary_clean_fraction}};
  return j.dump(2);
}

SampleSet run_experiment(const ExperimentSpec& spec, int jobs) {
  require(spec.replicas >= 1, "run_experiment: replicas must be >= 1");
  require(spec.t >= 0, "run_experiment: t must be >= 0");
  kernels::Kernel kernel = kernel_from_spec(spec.kernel_spec);
  StirringEngine engine(kernel);

  std::vector<double> times = spec.checkpoint_times;
  if (times.empty()) times = {spec.t};
  for (std::size_t c = 1; c < times.size(); ++c)
    require(times[c] > times[c - 1], "run_experiment: checkpoints must increase");

  kernels::SiteWindow window;
  if (spec.statistic == Statistic::kWindowSum)
    window = kernels::SiteWindow::parse(kernel, spec.window_text);

  kernels::HarmonicProfile alpha;
  if (spec.initial == InitialLaw::kProduct) {
    if (spec.alpha_const) {
      alpha = kernels::constant_alpha(kernel, *spec.alpha_const);
    } else if (kernel.topology == kernels::Topology::kTree) {
      alpha = kernels::tree_alpha(kernel, spec.alpha_lambda, spec.alpha_rho);
    } else {
      alpha = kernels::line_alpha(kernel, spec.alpha_lambda, spec.alpha_rho);
    }
  }

  SampleSet out;
  out.spec = spec;
  out.times = times;
  out.samples.assign(times.size(),
                     std::vector<std::int64_t>(static_cast<std::size_t>(spec.replicas)));
  out.replica_seeds.resize(static_cast<std::size_t>(spec.replicas));
  {
    const std::string kj = kernels::kernel_to_json(kernel);
    out.kernel_hash = hash_bytes(kj.data(), kj.size());
  }

  std::atomic<std::int64_t> next{0};
  std::atomic<std::int64_t> dirty_replicas{0};
  auto worker = [&] {
    for (;;) {
      const std::int64_t r = next.fetch_add(1);
      if (r >= spec.replicas) return;
      const auto key = static_cast<std::uint64_t>(r);
      rng::Stream stream = rng::Stream::for_key(spec.master_seed, key);
      out.replica_seeds[static_cast<std::size_t>(r)] =
          rng::Stream::derived_seed(spec.master_seed, key);

      Configuration config;
      switch (spec.initial) {
        case InitialLaw::kProduct:
          config = sample_product(alpha, stream);
          break;
        case InitialLaw::kStep:
          config = step_initial(kernel);
          break;
        case InitialLaw::kExplicit:
          require(spec.explicit_initial.size() ==
                      static_cast<std::size_t>(kernel.size()),
                  "run_experiment: explicit initial size mismatch");
          config = spec.explicit_initial;
          break;
      }
      StirringEngine::Monitor monitor;
      double now = 0;
      for (std::size_t c = 0; c < times.size(); ++c) {
        engine.evolve(config, times[c] - now, stream, &monitor);
        now = times[c];
        const std::int64_t value = spec.statistic == Statistic::kWPlus
                                       ? w_plus(config, kernel)
                                       : window_sum(config, window);
        out.samples[c][static_cast<std::size_t>(r)] = value;
      }
      if (monitor.boundary_swap_changed) dirty_replicas.fetch_add(1);
    }
  };

  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  out.boundary_clean_fraction =
      1.0 - static_cast<double>(dirty_replicas.load()) /
                static_cast<double>(spec.replicas);
  return out;
}

}  // namespace sep::simulate
