#include "sep/stats.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "sep/quadrature.hpp"
#include "sep/rng.hpp"

namespace sep::stats {

namespace {
constexpr double kZ995 = 2.5758293035489004;  // 99% two-sided normal quantile
}

Moments empirical_moments(const std::vector<double>& samples) {
  require(samples.size() >= 2, "empirical_moments: need at least two samples");
  Moments m;
  m.count = samples.size();
  const double n = static_cast<double>(samples.size());
  for (double s : samples) m.mean += s;
  m.mean /= n;
  for (double s : samples) m.variance += (s - m.mean) * (s - m.mean);
  m.variance /= (n - 1);
  m.mean_ci_halfwidth = kZ995 * std::sqrt(m.variance / n);
  m.var_ci_halfwidth = kZ995 * m.variance * std::sqrt(2.0 / (n - 1));
  return m;
}

double tv_poisson_from_frequencies(const std::vector<double>& freq, double mean) {
  require(mean > 0, "tv_poisson: mean must be positive");
  double tv = 0;
  double pmf = std::exp(-mean);
  double tail = 1.0;  // Poisson mass at and beyond current k
  for (std::size_t k = 0; k < freq.size(); ++k) {
    tv += std::abs(freq[k] - pmf);
    tail -= pmf;
    pmf *= mean / static_cast<double>(k + 1);
  }
  tv += std::abs(tail);  // all Poisson mass beyond the observed support
  return 0.5 * tv;
}

double tv_poisson(const std::vector<std::int64_t>& samples, double mean) {
  require(!samples.empty(), "tv_poisson: empty sample set");
  std::int64_t max_v = 0;
  for (std::int64_t s : samples) {
    require(s >= 0, "tv_poisson: negative count");
    max_v = std::max(max_v, s);
  }
  std::vector<double> freq(static_cast<std::size_t>(max_v) + 1, 0.0);
  const double w = 1.0 / static_cast<double>(samples.size());
  for (std::int64_t s : samples) freq[static_cast<std::size_t>(s)] += w;
  return tv_poisson_from_frequencies(freq, mean);
}

NormalityReport normality_distance(const std::vector<double>& samples) {
  require(samples.size() >= 50, "normality_distance: need at least 50 samples");
  Moments m = empirical_moments(samples);
  require(m.variance > 0, "normality_distance: zero variance");
  const double sd = std::sqrt(m.variance);

  std::vector<double> z(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    z[i] = (samples[i] - m.mean) / sd;
  std::sort(z.begin(), z.end());

  NormalityReport rep;
  const double n = static_cast<double>(z.size());
  for (std::size_t i = 0; i < z.size();) {
    // Handle ties as a single jump of the empirical CDF.
    std::size_t j = i;
    while (j < z.size() && z[j] == z[i]) ++j;
    const double phi = rng::normal_cdf(z[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(j) / n;
    rep.ks = std::max({rep.ks, std::abs(phi - lo), std::abs(phi - hi)});
    rep.ks_midpoint = std::max(rep.ks_midpoint, std::abs(phi - 0.5 * (lo + hi)));
    i = j;
  }
  double m3 = 0, m4 = 0;
  for (double v : z) {
    m3 += v * v * v;
    m4 += v * v * v * v;
  }
  rep.skewness = m3 / n;
  rep.excess_kurtosis = m4 / n - 3.0;
  return rep;
}

double h_of_r(double r, double tol) {
  require(r >= 0 && r < 1, "h_of_r: r must lie in [0,1)");
  if (r == 0) return 0.5;
  const double c = std::sqrt(r / (2.0 * (1.0 - r)));
  return quadrature::gauss_expect(
      [&](double x) {
        const double phi = rng::normal_cdf(c * x);
        return phi * phi + (1 - phi) * (1 - phi);
      },
      tol);
}

HConstant h_constant(double tol) {
  // H = int_0^1 h(r) / (2 sqrt r) dr = int_0^1 h(u^2) du; the u = 1 endpoint
  // takes the limit value h(1-) = 1.
  auto compute = [](double t) {
    auto integrand = [&](double u) {
      const double r = u * u;
      if (r >= 1.0 - 1e-12) return 1.0;
      return h_of_r(r, t * 0.1);
    };
    HConstant h;
    const double coarse = quadrature::integrate(integrand, 0.0, 1.0, t * 100);
    const double fine = quadrature::integrate(integrand, 0.0, 1.0, t);
    h.value = fine;
    h.refinement_gap = std::abs(fine - coarse);
    require(h.refinement_gap < 1e-6, "h_constant: quadrature did not settle",
            ErrorCode::kNonConvergence);
    return h;
  };
  if (tol == 1e-10) {
    static const HConstant cached = compute(1e-10);
    return cached;
  }
  return compute(tol);
}

Envelope flux_envelope(double sigma) {
  require(sigma > 0, "flux_envelope: sigma must be positive");
  Envelope e;
  const HConstant h = h_constant();
  e.h_value = h.value;
  e.h_refinement_gap = h.refinement_gap;
  e.mean_coeff = sigma / std::sqrt(2.0 * M_PI);
  e.var_upper = sigma / (2.0 * std::sqrt(M_PI));
  e.var_lower = (1.0 - e.h_value) * e.var_upper;
  return e;
}

std::string LimitReport::to_json() const {
  nlohmann::json j;
  j["statistic"] = statistic;
  j["n_samples"] = n_samples;
  j["mean"] = moments.mean;
  j["var"] = moments.variance;
  j["ci"] = {{"mean_halfwidth", moments.mean_ci_halfwidth},
             {"var_halfwidth", moments.var_ci_halfwidth},
             {"level", 0.99}};
  j["target"] = {{"law", law == TargetLaw::kPoisson ? "poisson" : "normal"},
                 {"param", target_param}};
  nlohmann::json metrics;
  if (tv) metrics["tv"] = *tv;
  if (normality) {
    metrics["ks"] = normality->ks;
    metrics["ks_midpoint"] = normality->ks_midpoint;
    metrics["skewness"] = normality->skewness;
    metrics["excess_kurtosis"] = normality->excess_kurtosis;
  }
  j["metrics"] = metrics;
  j["pass"] = pass;
  j["tolerances"] = tolerance;
  return j.dump(2);
}

LimitReport LimitReport::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LimitReport r;
  r.statistic = j.at("statistic");
  r.n_samples = j.at("n_samples");
  r.moments.mean = j.at("mean");
  r.moments.variance = j.at("var");
  r.moments.mean_ci_halfwidth = j.at("ci").at("mean_halfwidth");
  r.moments.var_ci_halfwidth = j.at("ci").at("var_halfwidth");
  r.law = j.at("target").at("law") == "poisson" ? TargetLaw::kPoisson
                                                : TargetLaw::kNormal;
  r.target_param = j.at("target").at("param");
  if (j.at("metrics").contains("tv")) r.tv = j["metrics"]["tv"].get<double>();
  if (j.at("metrics").contains("ks")) {
    NormalityReport n;
    n.ks = j["metrics"]["ks"];
    n.ks_midpoint = j["metrics"].value("ks_midpoint", 0.0);
    n.skewness = j["metrics"].value("skewness", 0.0);
    n.excess_kurtosis = j["metrics"].value("excess_kurtosis", 0.0);
    r.normality = n;
  }
  r.pass = j.at("pass");
  r.tolerance = j.at("tolerances");
  return r;
}

LimitReport verdict(const std::vector<std::int64_t>& samples,
                    const VerdictSpec& spec) {
  LimitReport rep;
  rep.statistic = spec.statistic_name;
  rep.n_samples = samples.size();
  std::vector<double> vals(samples.begin(), samples.end());
  rep.moments = empirical_moments(vals);
  rep.law = spec.law;
  if (spec.law == TargetLaw::kPoisson) {
    rep.target_param = spec.poisson_mean;
    rep.tolerance = spec.tv_tolerance;
    rep.tv = tv_poisson(samples, spec.poisson_mean);
    rep.pass = *rep.tv <= spec.tv_tolerance;
  } else {
    rep.target_param = 0.0;
    rep.tolerance = spec.ks_tolerance;
    rep.normality = normality_distance(vals);
    rep.pass = rep.normality->ks <= spec.ks_tolerance;
  }
  return rep;
}

}  // namespace sep::stats
