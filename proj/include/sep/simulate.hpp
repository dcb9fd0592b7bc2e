#pragma once

// Event-driven stirring Monte Carlo on large truncations, with reproducible
// per-replica random streams and file-based sample sets.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sep/kernels.hpp"
#include "sep/rng.hpp"

namespace sep::simulate {

using Configuration = std::vector<std::uint8_t>;  // occupancy bit per site

Configuration sample_product(const kernels::HarmonicProfile& alpha,
                             rng::Stream& stream);

// Occupied iff coordinate <= 0; line kernels only.
Configuration step_initial(const kernels::Kernel& line);

// Precomputed stirring engine: total event rate, alias table over edges.
class StirringEngine {
 public:
  explicit StirringEngine(const kernels::Kernel& k);

  const kernels::Kernel& kernel() const { return *kernel_; }
  double total_rate() const { return total_rate_; }

  struct Monitor {
    int boundary_margin = 5;        // sites within this distance count
    bool boundary_swap_changed = false;  // any discordant swap near boundary
  };

  // Exact stirring to horizon t: the event count over [0,t] is
  // Poisson(R t) and events are i.i.d. rate-weighted edges, which is
  // distributionally identical to exponential waiting times.
  void evolve(Configuration& config, double t, rng::Stream& stream,
              Monitor* monitor = nullptr) const;

 private:
  const kernels::Kernel* kernel_;
  std::vector<std::pair<Index, Index>> edges_;
  std::vector<int> edge_boundary_margin_;  // min boundary distance of endpoints
  double total_rate_ = 0.0;
  rng::AliasTable alias_;  // initialized last: fills edges_ and total_rate_
};

std::int64_t window_sum(const Configuration& config,
                        const kernels::SiteWindow& window);
std::int64_t w_plus(const Configuration& config, const kernels::Kernel& line);

enum class InitialLaw { kProduct, kStep, kExplicit };
enum class Statistic { kWindowSum, kWPlus };

struct ExperimentSpec {
  // Kernel description (one of)
  std::string kernel_spec;  // "tree:12" or "line:320" or "line:-2:3"
  InitialLaw initial = InitialLaw::kProduct;
  double alpha_lambda = 0.0, alpha_rho = 1.0;  // tree/line profile parameters
  std::optional<double> alpha_const;
  Configuration explicit_initial;
  double t = 0.0;
  Statistic statistic = Statistic::kWPlus;
  std::string window_text;  // parsed against the kernel when kWindowSum
  // Checkpoints: when nonempty, the statistic is recorded at each time.
  std::vector<double> checkpoint_times;
  std::int64_t replicas = 1;
  std::uint64_t master_seed = 0;

  std::string to_json() const;
  static ExperimentSpec from_json(const std::string& text);
};

struct SampleSet {
  ExperimentSpec spec;
  std::vector<double> times;                       // checkpoint times
  std::vector<std::vector<std::int64_t>> samples;  // [checkpoint][replica]
  std::vector<std::uint64_t> replica_seeds;
  double boundary_clean_fraction = 1.0;  // replicas with no boundary activity
  std::uint64_t kernel_hash = 0;

  std::string csv() const;        // replica,seed,statistic,value rows
  std::string sidecar_json() const;
};

kernels::Kernel kernel_from_spec(const std::string& spec);

// Runs the experiment; replicas are distributed over `jobs` workers and the
// result is independent of the worker count.
SampleSet run_experiment(const ExperimentSpec& spec, int jobs = 1);

std::uint64_t hash_bytes(const void* data, std::size_t len,
                         std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace sep::simulate
