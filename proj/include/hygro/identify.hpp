#pragma once

// Inverse identification by Latin Hypercube Sampling over truncated log-normal
// marginals and least-squares ranking of forward experiment runs.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hygro/experiment.hpp"

namespace hygro {

/// Parameter addressed as "<brick|mortar>.<lambda0|b_tcs|mu|w_f|w80|A|rho_s|c_s>" or
/// "interface.<alpha|beta>".
void set_parameter(MaterialSet& materials, const std::string& name, double value);
double get_parameter(const MaterialSet& materials, const std::string& name);

struct ParameterPrior {
  std::string name;
  double mean = 0.0;
  double cov = 0.2;
  double lower = 0.0;
  double upper = 0.0;

  /// Throws ConfigError: cov <= 0, mean outside [lower, upper], lower < 0.
  void validate() const;
  double log_sigma() const;
  double log_mu() const;
  double cdf(double x) const;
  double quantile(double p) const;
};

/// Default prior around `mean`: cov 0.2, bounds [mean / 4, mean * 4].
ParameterPrior default_prior(const std::string& name, double mean, double cov = 0.2);

/// n samples; samples[i][j] is parameter j of realization i. Every parameter's samples
/// occupy the n equiprobable strata of its truncated marginal exactly once.
/// Deterministic in `seed`. Throws ConfigError for n < 1 or zero-probability bounds.
std::vector<std::vector<double>> lhs_sample(const std::vector<ParameterPrior>& priors,
                                            std::size_t n, std::uint64_t seed);

/// Index in [0, n) of the equiprobable stratum containing x.
std::size_t stratum_of(const ParameterPrior& prior, std::size_t n, double x);

struct FieldMask {
  bool theta = true;
  bool phi = true;
};

/// Sum of squared residuals over sensors x time steps; each residual is divided by the
/// sensor accuracy (temperature band chosen by the sign of the observed reading).
/// Observed traces are resampled onto the simulated times by linear interpolation;
/// simulated times outside the observed span are ignored. `per_probe` receives the
/// contribution of each observed probe, in observed order.
double trace_objective(const Traces& simulated, const Traces& observed,
                       const SensorAccuracy& accuracy, FieldMask fields,
                       std::vector<double>* per_probe = nullptr);

struct ForwardModel {
  const Mesh* mesh = nullptr;
  ClimateSeries climate;
  SensorLayout layout;
  MaterialSet materials;
  ExperimentSpec spec;

  Traces run(const MaterialSet& m) const;
};

struct FitResult {
  std::size_t id = 0;
  std::vector<double> params;
  double objective = 0.0;  // +inf when the forward run failed
  std::vector<std::pair<std::string, double>> per_sensor;
  std::string status = "ok";
};

/// Forward runs for every sample, up to `jobs` concurrently. Failed runs are kept
/// with an infinite objective.
std::vector<FitResult> evaluate_pool(const ForwardModel& model,
                                     const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& samples,
                                     const Traces& observed, FieldMask fields, int jobs = 1);

struct Selection {
  std::vector<FitResult> top;
  bool all_failed = false;
};

/// Ascending objective, ties broken by realization id.
Selection select_best(const std::vector<FitResult>& results, std::size_t k);

struct StageConfig {
  std::string name;
  ForwardModel model;
  Traces observed;
  std::vector<ParameterPrior> priors;
  FieldMask fields;
  std::size_t pool_size = 50;  // total realizations including `extra`
  /// Realizations appended after the LHS draws (e.g. a known reference vector).
  std::vector<std::vector<double>> extra;
};

struct StageResult {
  std::string name;
  std::vector<std::string> names;
  std::vector<std::vector<double>> pool;
  std::vector<FitResult> results;
  Selection best;
  MaterialSet identified;  // stage materials with the best vector applied
};

/// Runs the stages in order. The best vector of each stage is applied to the
/// materials of every later stage before it runs. Stage s samples with seed + s.
std::vector<StageResult> run_pipeline(std::vector<StageConfig> stages, std::uint64_t seed,
                                      int jobs = 1, std::size_t top_k = 5);

/// CSV schema "fit": id, objective, status, then one column per parameter.
void write_fit_csv(std::ostream& os, const StageResult& stage,
                   const std::vector<std::pair<std::string, std::string>>& meta = {});

}  // namespace hygro
