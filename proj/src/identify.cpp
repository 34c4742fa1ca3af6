#include "hygro/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/distributions/lognormal.hpp>

#include "hygro/csv.hpp"
#include "hygro/errors.hpp"
#include "hygro/parallel.hpp"

namespace hygro {

namespace {

double* parameter_slot(MaterialSet& m, const std::string& name) {
  const auto dot = name.find('.');
  if (dot == std::string::npos) return nullptr;
  const std::string group = name.substr(0, dot), field = name.substr(dot + 1);
  if (group == "interface") {
    if (field == "alpha") return &m.interface.alpha_int;
    if (field == "beta") return &m.interface.beta_int;
    return nullptr;
  }
  PhaseModel* model = group == "brick" ? &m.brick : group == "mortar" ? &m.mortar : nullptr;
  if (!model) return nullptr;
  auto* k = std::get_if<KunzelPhase>(model);
  if (!k) return nullptr;
  MaterialParams& p = k->params;
  if (field == "lambda0") return &p.lambda0;
  if (field == "b_tcs") return &p.b_tcs;
  if (field == "mu") return &p.mu;
  if (field == "w_f") return &p.w_f;
  if (field == "w80") return &p.w80;
  if (field == "A") return &p.A;
  if (field == "rho_s") return &p.rho_s;
  if (field == "c_s") return &p.c_s;
  return nullptr;
}

// Uniform double in [0, 1) from the raw engine output (portable across libraries).
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n) by rejection.
std::size_t below(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

}  // namespace

void set_parameter(MaterialSet& materials, const std::string& name, double value) {
  double* slot = parameter_slot(materials, name);
  if (!slot) throw ConfigError("unknown parameter '" + name + "'");
  *slot = value;
}

double get_parameter(const MaterialSet& materials, const std::string& name) {
  double* slot = parameter_slot(const_cast<MaterialSet&>(materials), name);
  if (!slot) throw ConfigError("unknown parameter '" + name + "'");
  return *slot;
}

void ParameterPrior::validate() const {
  std::ostringstream os;
  os << "prior '" << name << "': ";
  if (!(cov > 0.0)) os << "cov must be positive (got " << cov << ")";
  else if (!(mean > 0.0)) os << "mean must be positive (got " << mean << ")";
  else if (!(lower >= 0.0)) os << "lower bound must be non-negative (got " << lower << ")";
  else if (!(mean >= lower && mean <= upper))
    os << "mean " << mean << " outside bounds [" << lower << ", " << upper << "]";
  else return;
  throw ConfigError(os.str());
}

double ParameterPrior::log_sigma() const { return std::sqrt(std::log1p(cov * cov)); }

double ParameterPrior::log_mu() const {
  const double s = log_sigma();
  return std::log(mean) - 0.5 * s * s;
}

double ParameterPrior::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::cdf(boost::math::lognormal(log_mu(), log_sigma()), x);
}

double ParameterPrior::quantile(double p) const {
  return boost::math::quantile(boost::math::lognormal(log_mu(), log_sigma()), p);
}

ParameterPrior default_prior(const std::string& name, double mean, double cov) {
  return {name, mean, cov, 0.25 * mean, 4.0 * mean};
}

std::vector<std::vector<double>> lhs_sample(const std::vector<ParameterPrior>& priors,
                                            std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("LHS sample size must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> out(n, std::vector<double>(priors.size()));
  for (std::size_t j = 0; j < priors.size(); ++j) {
    const ParameterPrior& p = priors[j];
    p.validate();
    const double lo = p.cdf(p.lower), hi = p.cdf(p.upper);
    if (!(hi - lo > 1e-12)) {
      std::ostringstream os;
      os << "prior '" << p.name << "': bounds [" << p.lower << ", " << p.upper
         << "] carry no probability mass";
      throw ConfigError(os.str());
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[below(rng, i)]);
    for (std::size_t i = 0; i < n; ++i) {
      double u = lo + (hi - lo) * (static_cast<double>(perm[i]) + unit(rng)) / static_cast<double>(n);
      u = std::clamp(u, std::nextafter(lo, 1.0), std::nextafter(hi, 0.0));
      out[i][j] = std::clamp(p.quantile(u), p.lower, p.upper);
    }
  }
  return out;
}

std::size_t stratum_of(const ParameterPrior& prior, std::size_t n, double x) {
  const double lo = prior.cdf(prior.lower), hi = prior.cdf(prior.upper);
  const double r = (prior.cdf(x) - lo) / (hi - lo);
  const auto k = static_cast<long long>(std::floor(r * static_cast<double>(n)));
  return static_cast<std::size_t>(std::clamp<long long>(k, 0, static_cast<long long>(n) - 1));
}

double trace_objective(const Traces& sim, const Traces& obs, const SensorAccuracy& acc,
                       FieldMask fields, std::vector<double>* per_probe) {
  if (obs.times.empty()) throw ConfigError("observed traces are empty");
  if (per_probe) per_probe->assign(obs.probes.size(), 0.0);
  double total = 0.0;
  for (std::size_t p = 0; p < obs.probes.size(); ++p) {
    const int s = sim.find(obs.probes[p]);
    if (s < 0) throw ConfigError("observed probe '" + obs.probes[p] + "' is not simulated");
    double sum = 0.0;
    for (std::size_t k = 0; k < sim.times.size(); ++k) {
      const double t = sim.times[k];
      if (t < obs.times.front() || t > obs.times.back()) continue;
      auto it = std::lower_bound(obs.times.begin(), obs.times.end(), t);
      std::size_t hi = static_cast<std::size_t>(it - obs.times.begin());
      double th, ph;
      if (obs.times[hi] == t) {
        th = obs.theta[p][hi];
        ph = obs.phi[p][hi];
      } else {
        const std::size_t lo = hi - 1;
        const double w = (t - obs.times[lo]) / (obs.times[hi] - obs.times[lo]);
        th = obs.theta[p][lo] + w * (obs.theta[p][hi] - obs.theta[p][lo]);
        ph = obs.phi[p][lo] + w * (obs.phi[p][hi] - obs.phi[p][lo]);
      }
      if (fields.theta) {
        const double r = (sim.theta[s][k] - th) / acc.theta_band(th);
        sum += r * r;
      }
      if (fields.phi) {
        const double r = (sim.phi[s][k] - ph) / acc.phi;
        sum += r * r;
      }
    }
    if (per_probe) (*per_probe)[p] = sum;
    total += sum;
  }
  return total;
}

Traces ForwardModel::run(const MaterialSet& m) const {
  if (!mesh) throw ConfigError("forward model has no mesh");
  return run_experiment(*mesh, climate, layout, m, spec).traces;
}

std::vector<FitResult> evaluate_pool(const ForwardModel& model,
                                     const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& samples,
                                     const Traces& observed, FieldMask fields, int jobs) {
  {
    MaterialSet probe = model.materials;
    for (const auto& n : names) set_parameter(probe, n, get_parameter(probe, n));
  }
  std::vector<FitResult> results(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    FitResult& r = results[i];
    r.id = i;
    r.params = samples[i];
    try {
      MaterialSet m = model.materials;
      for (std::size_t j = 0; j < names.size(); ++j) set_parameter(m, names[j], samples[i][j]);
      const Traces sim = model.run(m);
      std::vector<double> per;
      r.objective = trace_objective(sim, observed, model.layout.accuracy, fields, &per);
      for (std::size_t p = 0; p < per.size(); ++p) r.per_sensor.emplace_back(observed.probes[p], per[p]);
    } catch (const std::exception& e) {
      r.objective = std::numeric_limits<double>::infinity();
      r.status = e.what();
    }
  });
  return results;
}

Selection select_best(const std::vector<FitResult>& results, std::size_t k) {
  Selection s;
  s.top = results;
  std::stable_sort(s.top.begin(), s.top.end(), [](const FitResult& a, const FitResult& b) {
    if (a.objective != b.objective) return a.objective < b.objective;
    return a.id < b.id;
  });
  if (s.top.size() > k) s.top.resize(k);
  s.all_failed = std::none_of(results.begin(), results.end(),
                              [](const FitResult& r) { return std::isfinite(r.objective); });
  return s;
}

std::vector<StageResult> run_pipeline(std::vector<StageConfig> stages, std::uint64_t seed,
                                      int jobs, std::size_t top_k) {
  std::vector<StageResult> out;
  std::vector<std::pair<std::string, double>> carried;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    StageConfig& cfg = stages[s];
    for (const auto& [name, value] : carried) set_parameter(cfg.model.materials, name, value);
    StageResult res;
    res.name = cfg.name;
    for (const auto& p : cfg.priors) res.names.push_back(p.name);
    if (cfg.extra.size() > cfg.pool_size)
      throw ConfigError("stage '" + cfg.name + "': more extra realizations than pool_size");
    const std::size_t n_lhs = cfg.pool_size - cfg.extra.size();
    if (n_lhs > 0) res.pool = lhs_sample(cfg.priors, n_lhs, seed + s);
    for (const auto& e : cfg.extra) {
      if (e.size() != cfg.priors.size())
        throw ConfigError("stage '" + cfg.name + "': extra realization has " +
                          std::to_string(e.size()) + " values for " +
                          std::to_string(cfg.priors.size()) + " parameters");
      res.pool.push_back(e);
    }
    res.results = evaluate_pool(cfg.model, res.names, res.pool, cfg.observed, cfg.fields, jobs);
    res.best = select_best(res.results, top_k);
    res.identified = cfg.model.materials;
    if (!res.best.all_failed) {
      const FitResult& b = res.best.top.front();
      for (std::size_t j = 0; j < res.names.size(); ++j) {
        set_parameter(res.identified, res.names[j], b.params[j]);
        carried.emplace_back(res.names[j], b.params[j]);
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

void write_fit_csv(std::ostream& os, const StageResult& stage,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
  std::vector<std::string> header = {"id", "objective", "status"};
  header.insert(header.end(), stage.names.begin(), stage.names.end());
  csv::Writer w(os, "fit", header, meta);
  for (const auto& r : stage.results) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    std::vector<std::string> row = {std::to_string(r.id), csv::format(r.objective), status};
    for (double v : r.params) row.push_back(csv::format(v));
    w.row(row);
  }
}

}  // namespace hygro
