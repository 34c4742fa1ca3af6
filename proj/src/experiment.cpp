#include "hygro/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "hygro/csv.hpp"
#include "hygro/errors.hpp"

namespace hygro {

// ---------------------------------------------------------------------------
// Climate

ClimateSeries::ClimateSeries(std::vector<ClimateSample> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw ConfigError("climate series is empty");
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    const auto& s = samples_[k];
    std::ostringstream os;
    if (k > 0 && !(s.t > samples_[k - 1].t)) {
      os << "climate sample " << k << ": time " << s.t << " s does not increase (previous "
         << samples_[k - 1].t << " s)";
      throw ConfigError(os.str());
    }
    for (double phi : {s.phi_int, s.phi_ext})
      if (!(phi > 0.0 && phi <= 1.0)) {
        os << "climate sample " << k << " at t = " << s.t << " s: phi " << phi
           << " outside (0, 1]";
        throw ConfigError(os.str());
      }
    for (double th : {s.theta_int, s.theta_ext})
      if (!(th >= kMinTheta && th <= kMaxTheta)) {
        os << "climate sample " << k << " at t = " << s.t << " s: theta " << th
           << " C outside [" << kMinTheta << ", " << kMaxTheta << "]";
        throw ConfigError(os.str());
      }
  }
}

ClimateSeries ClimateSeries::constant(double duration, double theta_int, double phi_int,
                                      double theta_ext, double phi_ext) {
  if (!(duration > 0.0)) throw ConfigError("climate duration must be positive");
  // Hourly samples: a constant record still passes the gap check.
  const auto n = static_cast<std::size_t>(std::ceil(duration / 3600.0));
  std::vector<ClimateSample> s;
  s.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k)
    s.push_back({std::min(duration, 3600.0 * static_cast<double>(k)), theta_int, phi_int,
                 theta_ext, phi_ext});
  return ClimateSeries(std::move(s));
}

ClimateSample ClimateSeries::at(double t) const {
  if (samples_.size() == 1 || t <= start()) {
    if (t < start()) {
      std::ostringstream os;
      os << "climate requested at t = " << t << " s before the first sample (" << start()
         << " s)";
      throw ConfigError(os.str());
    }
    return samples_.front();
  }
  if (t > end()) {
    std::ostringstream os;
    os << "climate requested at t = " << t << " s after the last sample (" << end() << " s)";
    throw ConfigError(os.str());
  }
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                   [](double v, const ClimateSample& s) { return v < s.t; });
  if (it == samples_.end()) return samples_.back();
  const ClimateSample& b = *it;
  const ClimateSample& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  auto lerp = [w](double x, double y) { return x + w * (y - x); };
  return {t, lerp(a.theta_int, b.theta_int), lerp(a.phi_int, b.phi_int),
          lerp(a.theta_ext, b.theta_ext), lerp(a.phi_ext, b.phi_ext)};
}

std::vector<std::pair<double, double>> ClimateSeries::gaps(double limit) const {
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 1; k < samples_.size(); ++k)
    if (samples_[k].t - samples_[k - 1].t > limit) out.emplace_back(samples_[k - 1].t, samples_[k].t);
  return out;
}

void ClimateSeries::require_coverage(double t0, double t1, double limit) const {
  std::ostringstream os;
  if (samples_.empty() || start() > t0 || end() < t1) {
    os << "climate covers [" << (samples_.empty() ? 0.0 : start()) << ", "
       << (samples_.empty() ? 0.0 : end()) << "] s, run needs [" << t0 << ", " << t1 << "] s";
    throw ConfigError(os.str());
  }
  for (const auto& [a, b] : gaps(limit))
    if (b > t0 && a < t1) {
      os << "climate gap of " << (b - a) / 3600.0 << " h between t = " << a << " s and t = " << b
         << " s inside the simulated horizon";
      throw ConfigError(os.str());
    }
}

ClimateSeries experiment1_climate(double duration) {
  return ClimateSeries::constant(duration, 24.5, 0.5, -9.5, 0.5);
}

ClimateSeries experiment2_climate(double duration) {
  return ClimateSeries::constant(duration, 27.0, 0.95, 27.0, 0.3);
}

// ---------------------------------------------------------------------------
// Probes

namespace {

struct Location {
  int triangle = -1;
  std::array<double, 3> weights{};
};

Location locate(const Mesh& mesh, const Vec2& p, std::optional<Phase> phase) {
  Location best;
  double best_min = -std::numeric_limits<double>::infinity();
  const double scale = std::max(mesh.period().x, mesh.period().y);
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const Triangle& t = mesh.triangles[e];
    if (phase && t.phase != *phase) continue;
    const Vec2& a = mesh.nodes[t.nodes[0]];
    const Vec2& b = mesh.nodes[t.nodes[1]];
    const Vec2& c = mesh.nodes[t.nodes[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((b.y - c.y) * (p.x - c.x) + (c.x - b.x) * (p.y - c.y)) / det;
    const double l2 = ((c.y - a.y) * (p.x - c.x) + (a.x - c.x) * (p.y - c.y)) / det;
    const double l3 = 1.0 - l1 - l2;
    const double m = std::min({l1, l2, l3});
    if (m > best_min) {
      best_min = m;
      best.triangle = static_cast<int>(e);
      best.weights = {l1, l2, l3};
    }
  }
  if (best.triangle < 0 || best_min < -1e-9 * std::max(scale, 1.0)) best.triangle = -1;
  return best;
}

std::string describe(const Vec2& p) {
  std::ostringstream os;
  os << "(" << p.x << ", " << p.y << ")";
  return os.str();
}

}  // namespace

int SensorLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (probes[i].name == name) return static_cast<int>(i);
  return -1;
}

void SensorLayout::validate(const Mesh& mesh) const {
  std::set<std::string> names;
  std::vector<Location> loc;
  for (const auto& p : probes) {
    if (p.name.empty()) throw ConfigError("probe with empty name");
    if (!names.insert(p.name).second) throw ConfigError("duplicate probe name '" + p.name + "'");
    loc.push_back(locate(mesh, p.position, p.phase));
    if (loc.back().triangle < 0)
      throw ConfigError("probe '" + p.name + "' at " + describe(p.position) + " is not inside the " +
                        to_string(p.phase) + " region");
  }
  for (const auto& pair : pairs) {
    const int b = find(pair.brick_probe), m = find(pair.mortar_probe);
    if (b < 0 || m < 0)
      throw ConfigError("jump pair '" + pair.name + "' references unknown probe '" +
                        (b < 0 ? pair.brick_probe : pair.mortar_probe) + "'");
    if (probes[b].phase != Phase::brick || probes[m].phase != Phase::mortar)
      throw ConfigError("jump pair '" + pair.name + "' must join a brick probe and a mortar probe");
    const auto& tb = mesh.triangles[loc[b].triangle].nodes;
    const auto& tm = mesh.triangles[loc[m].triangle].nodes;
    auto touches = [](const std::array<int, 3>& tri, const std::array<int, 2>& side) {
      return std::any_of(tri.begin(), tri.end(),
                         [&](int n) { return n == side[0] || n == side[1]; });
    };
    const bool ok = std::any_of(mesh.interfaces.begin(), mesh.interfaces.end(),
                                [&](const InterfaceSegment& s) {
                                  return touches(tb, s.side1) && touches(tm, s.side2);
                                });
    if (!ok)
      throw ConfigError("jump pair '" + pair.name +
                        "' does not straddle a common interface segment within one element");
  }
}

SensorLayout default_sensor_layout(const Mesh& mesh, double offset) {
  SensorLayout layout;
  const double height = mesh.period().y;
  const double y_target = mesh.lower.y + 0.25 * height;
  // Vertical interface segments nearest to the target height, one per interface line.
  std::map<long long, const InterfaceSegment*> lines;
  const double key_scale = 1e9;
  for (const auto& s : mesh.interfaces) {
    if (std::abs(s.normal.x) < 0.5) continue;
    const Vec2& a = mesh.nodes[s.side1[0]];
    const Vec2& b = mesh.nodes[s.side1[1]];
    const long long key = std::llround(a.x * key_scale);
    const double ym = 0.5 * (a.y + b.y);
    auto it = lines.find(key);
    if (it == lines.end()) {
      lines[key] = &s;
    } else {
      const Vec2& c = mesh.nodes[it->second->side1[0]];
      const Vec2& d = mesh.nodes[it->second->side1[1]];
      if (std::abs(ym - y_target) < std::abs(0.5 * (c.y + d.y) - y_target)) it->second = &s;
    }
  }
  int k = 0;
  for (const auto& [key, s] : lines) {
    (void)key;
    ++k;
    const Vec2& a = mesh.nodes[s->side1[0]];
    const Vec2& b = mesh.nodes[s->side1[1]];
    const Vec2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    const std::string base = "J" + std::to_string(k);
    layout.probes.push_back({base + "_brick",
                             {mid.x - offset * s->normal.x, mid.y - offset * s->normal.y},
                             Phase::brick});
    layout.probes.push_back({base + "_mortar",
                             {mid.x + offset * s->normal.x, mid.y + offset * s->normal.y},
                             Phase::mortar});
    layout.pairs.push_back({base, base + "_brick", base + "_mortar"});
  }
  return layout;
}

int Traces::find(const std::string& name) const {
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (probes[i] == name) return static_cast<int>(i);
  return -1;
}

// ---------------------------------------------------------------------------
// Simulation

Problem experiment_problem(const Mesh& mesh, const ClimateSeries& climate,
                           const MaterialSet& materials) {
  Problem p;
  p.mesh = &mesh;
  p.materials = materials;
  // Shared copy: the problem may outlive the caller's series.
  const auto c = std::make_shared<const ClimateSeries>(climate);
  p.boundary_loads = {
      {BoundaryMarker::left, Field::theta, [c](double t) { return c->at(t).theta_int; }},
      {BoundaryMarker::left, Field::phi, [c](double t) { return c->at(t).phi_int; }},
      {BoundaryMarker::right, Field::theta, [c](double t) { return c->at(t).theta_ext; }},
      {BoundaryMarker::right, Field::phi, [c](double t) { return c->at(t).phi_ext; }},
  };
  return p;
}

ExperimentResult run_experiment(const Mesh& mesh, const ClimateSeries& climate,
                                const SensorLayout& layout, const MaterialSet& materials,
                                const ExperimentSpec& spec) {
  if (!(spec.duration > 0.0)) throw ConfigError("experiment duration must be positive");
  if (!(spec.dt > 0.0)) throw ConfigError("experiment dt must be positive");
  if (!(spec.output_interval > 0.0)) throw ConfigError("output interval must be positive");
  climate.require_coverage(0.0, spec.duration);
  layout.validate(mesh);

  const CoupledSystem system(experiment_problem(mesh, climate, materials));
  std::vector<Location> loc;
  for (const auto& p : layout.probes) loc.push_back(locate(mesh, p.position, p.phase));

  ExperimentResult out;
  out.traces.probes.reserve(layout.probes.size());
  for (const auto& p : layout.probes) out.traces.probes.push_back(p.name);
  out.traces.theta.resize(layout.probes.size());
  out.traces.phi.resize(layout.probes.size());

  const ClimateSample first = climate.at(0.0);
  const PointState init = spec.initial.value_or(PointState{first.theta_int, first.phi_int});
  NodalState state = NodalState::uniform(mesh.node_count(), init.theta, init.phi, 0.0);
  system.apply_constraints(state, 0.0);

  auto record = [&](const NodalState& s) {
    out.traces.times.push_back(s.time);
    for (std::size_t i = 0; i < loc.size(); ++i) {
      const auto& tri = mesh.triangles[loc[i].triangle].nodes;
      double th = 0.0, ph = 0.0;
      for (int k = 0; k < 3; ++k) {
        th += loc[i].weights[k] * s.theta[tri[k]];
        ph += loc[i].weights[k] * s.phi[tri[k]];
      }
      out.traces.theta[i].push_back(th);
      out.traces.phi[i].push_back(ph);
    }
  };
  record(state);

  const double eps = 1e-9 * spec.dt;
  int next_index = 1;
  while (state.time < spec.duration - eps) {
    const double target = std::min(next_index * spec.output_interval, spec.duration);
    double h = std::min(spec.dt, target - state.time);
    if (target - state.time - h < eps) h = target - state.time;
    StepReport rep;
    NodalState next = step_transient(system, state, h, spec.newton, &rep);
    if (std::abs(next.time - target) < eps) next.time = target;
    state = std::move(next);
    out.steps += 1;
    out.halvings += rep.halvings;
    out.clamp_events += rep.clamp_events;
    out.max_newton_iterations = std::max(out.max_newton_iterations, rep.max_newton_iterations);
    if (state.time >= target - eps) {
      record(state);
      ++next_index;
    }
  }
  out.jumps = extract_jumps(out.traces, layout, materials.constants);
  out.final_state = std::move(state);
  return out;
}

std::vector<JumpSeries> extract_jumps(const Traces& traces, const SensorLayout& layout,
                                      const PhysicalConstants& constants) {
  std::vector<JumpSeries> out;
  for (const auto& pair : layout.pairs) {
    const int b = traces.find(pair.brick_probe), m = traces.find(pair.mortar_probe);
    if (b < 0 || m < 0)
      throw ConfigError("jump pair '" + pair.name + "': traces lack probe '" +
                        (b < 0 ? pair.brick_probe : pair.mortar_probe) + "'");
    JumpSeries js;
    js.pair = pair.name;
    js.times = traces.times;
    const auto pb = back_calculate_pc(traces.theta[b], traces.phi[b], constants);
    const auto pm = back_calculate_pc(traces.theta[m], traces.phi[m], constants);
    for (std::size_t k = 0; k < traces.times.size(); ++k) {
      const double dt = traces.theta[m][k] - traces.theta[b][k];
      const double dp = traces.phi[m][k] - traces.phi[b][k];
      js.dtheta.push_back(dt);
      js.dphi.push_back(dp);
      js.dpc.push_back(pm.pc[k] - pb.pc[k]);
      js.max_abs_dtheta = std::max(js.max_abs_dtheta, std::abs(dt));
      js.max_abs_dphi = std::max(js.max_abs_dphi, std::abs(dp));
      if (std::abs(dt) > layout.accuracy.theta_band(traces.theta[b][k])) js.theta_exceeds_band = true;
      if (std::abs(dp) > layout.accuracy.phi) js.phi_exceeds_band = true;
    }
    out.push_back(std::move(js));
  }
  return out;
}

CapillarySeries back_calculate_pc(const std::vector<double>& theta,
                                  const std::vector<double>& phi,
                                  const PhysicalConstants& constants) {
  if (theta.size() != phi.size())
    throw ConfigError("back_calculate_pc: theta and phi series differ in length");
  CapillarySeries out;
  out.pc.reserve(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (!(phi[k] > 0.0)) {
      out.pc.push_back(std::nan(""));
      out.skipped.push_back(k);
      continue;
    }
    out.pc.push_back(capillary_pressure(theta[k] + kKelvinOffset, phi[k], constants));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

ClimateSeries read_climate_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const std::size_t c[5] = {t.column("t_s"), t.column("theta_int_C"), t.column("phi_int"),
                            t.column("theta_ext_C"), t.column("phi_ext")};
  std::vector<ClimateSample> s;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    s.push_back({t.number(r, c[0]), t.number(r, c[1]), t.number(r, c[2]), t.number(r, c[3]),
                 t.number(r, c[4])});
  try {
    return ClimateSeries(std::move(s));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_climate_csv(std::ostream& os, const ClimateSeries& climate, const CsvMeta& meta) {
  csv::Writer w(os, "climate", {"t_s", "theta_int_C", "phi_int", "theta_ext_C", "phi_ext"}, meta);
  for (const auto& s : climate.samples())
    w.row({csv::format(s.t), csv::format(s.theta_int), csv::format(s.phi_int),
           csv::format(s.theta_ext), csv::format(s.phi_ext)});
}

Traces read_traces_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const std::size_t ct = t.column("t_s"), cn = t.column("probe_name"), cth = t.column("theta_C"),
                    cph = t.column("phi");
  Traces tr;
  std::map<std::string, std::map<double, std::pair<double, double>>> by_probe;
  std::set<double> times;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double time = t.number(r, ct);
    const std::string& name = t.rows[r][cn];
    if (tr.find(name) < 0) tr.probes.push_back(name);
    by_probe[name][time] = {t.number(r, cth), t.number(r, cph)};
    times.insert(time);
  }
  tr.times.assign(times.begin(), times.end());
  for (const auto& name : tr.probes) {
    const auto& series = by_probe[name];
    if (series.size() != tr.times.size())
      throw ConfigError(path + ": probe '" + name + "' is not sampled at every time stamp");
    std::vector<double> th, ph;
    for (const auto& [time, v] : series) {
      (void)time;
      th.push_back(v.first);
      ph.push_back(v.second);
    }
    tr.theta.push_back(std::move(th));
    tr.phi.push_back(std::move(ph));
  }
  return tr;
}

void write_traces_csv(std::ostream& os, const Traces& traces, const CsvMeta& meta) {
  csv::Writer w(os, "traces", {"t_s", "probe_name", "theta_C", "phi"}, meta);
  for (std::size_t k = 0; k < traces.times.size(); ++k)
    for (std::size_t p = 0; p < traces.probes.size(); ++p)
      w.row({csv::format(traces.times[k]), traces.probes[p], csv::format(traces.theta[p][k]),
             csv::format(traces.phi[p][k])});
}

void write_jumps_csv(std::ostream& os, const std::vector<JumpSeries>& jumps, const CsvMeta& meta) {
  csv::Writer w(os, "jumps", {"t_s", "pair_name", "dtheta_K", "dphi", "dpc_Pa"}, meta);
  if (jumps.empty()) return;
  for (std::size_t k = 0; k < jumps.front().times.size(); ++k)
    for (const auto& j : jumps)
      w.row({csv::format(j.times[k]), j.pair, csv::format(j.dtheta[k]), csv::format(j.dphi[k]),
             csv::format(j.dpc[k])});
}

}  // namespace hygro
