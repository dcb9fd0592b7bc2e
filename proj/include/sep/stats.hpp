#pragma once

// Statistical verdicts and analytic constants: moments with confidence
// intervals, Poisson total-variation distance, normality diagnostics, the
// h(r) exchange probability and the constant H, and the variance envelope
// for the flux statistic.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sep/common.hpp"

namespace sep::stats {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double mean_ci_halfwidth = 0.0;  // normal approximation, level 0.99
  double var_ci_halfwidth = 0.0;
  std::size_t count = 0;
};

Moments empirical_moments(const std::vector<double>& samples);

// Total variation between the empirical law of integer samples and
// Poisson(mean); tail mass beyond the observed maximum is folded in exactly.
double tv_poisson(const std::vector<std::int64_t>& samples, double mean);
// Frequency-vector form: freq[k] are probabilities of k = 0, 1, ...
double tv_poisson_from_frequencies(const std::vector<double>& freq, double mean);

struct NormalityReport {
  double ks = 0.0;            // classical two-sided KS to N(0,1)
  double ks_midpoint = 0.0;   // lattice-friendly variant: empirical CDF
                              // evaluated at jump midpoints
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

// Samples standardized by their own mean and standard deviation.
NormalityReport normality_distance(const std::vector<double>& samples);

// h(r) = E[Phi(cN)^2 + (1-Phi(cN))^2], c = sqrt(r / (2(1-r))), by
// one-dimensional quadrature against the normal density.
double h_of_r(double r, double tol = 1e-10);

struct HConstant {
  double value = 0.0;
  double refinement_gap = 0.0;  // |coarse - fine| quadrature agreement
};

// H = int_0^1 h(r) / (2 sqrt(r)) dr, endpoint handled by r = u^2.
HConstant h_constant(double tol = 1e-10);

struct Envelope {
  double mean_coeff = 0.0;  // sigma / sqrt(2 pi)
  double var_lower = 0.0;   // (1 - H) sigma / (2 sqrt(pi))
  double var_upper = 0.0;   // sigma / (2 sqrt(pi))
  double h_value = 0.0;
  double h_refinement_gap = 0.0;  // quadrature error estimate for H
};

Envelope flux_envelope(double sigma);

// --- verdict assembly ---------------------------------------------------------

enum class TargetLaw { kPoisson, kNormal };

struct VerdictSpec {
  std::string statistic_name;
  TargetLaw law = TargetLaw::kPoisson;
  double poisson_mean = 0.0;
  double tv_tolerance = 0.0;
  double ks_tolerance = 0.0;
};

struct LimitReport {
  std::string statistic;
  std::size_t n_samples = 0;
  Moments moments;
  TargetLaw law = TargetLaw::kPoisson;
  double target_param = 0.0;
  std::optional<double> tv;
  std::optional<NormalityReport> normality;
  bool pass = false;
  double tolerance = 0.0;

  std::string to_json() const;
  static LimitReport from_json(const std::string& text);
};

LimitReport verdict(const std::vector<std::int64_t>& samples,
                    const VerdictSpec& spec);

}  // namespace sep::stats
