#include "hygro/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "hygro/config.hpp"
#include "hygro/csv.hpp"
#include "hygro/errors.hpp"
#include "hygro/experiment.hpp"
#include "hygro/homogenization.hpp"
#include "hygro/identify.hpp"
#include "hygro/mesh_io.hpp"
#include "hygro/parallel.hpp"

namespace fs = std::filesystem;

namespace hygro::cli {

namespace {

struct Options {
  std::string config;
  std::string mesh;
  std::string out;
  std::uint64_t seed = 1;
  int jobs = 0;
  std::string bc;
  bool perfect = false;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class Run {
 public:
  Run(std::string command, const Options& opt) : opt_(opt) {
    manifest_.command = std::move(command);
    manifest_.seed = opt.seed;
    manifest_.tool_version = kToolVersion;
    manifest_.started_utc = utc_now();
    start_ = std::chrono::steady_clock::now();
  }

  RunManifest& manifest() { return manifest_; }
  const Options& options() const { return opt_; }

  json load_config() {
    if (opt_.config.empty()) throw ConfigError("--config is required");
    base_dir_ = fs::path(opt_.config).parent_path().string();
    return read_json_file(opt_.config);
  }
  const std::string& base_dir() const { return base_dir_; }

  fs::path out_dir() const {
    if (opt_.out.empty()) throw ConfigError("--out is required");
    fs::create_directories(opt_.out);
    return fs::path(opt_.out);
  }

  std::ofstream open(const std::string& name) {
    const fs::path p = out_dir() / name;
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    os << std::setprecision(17);
    manifest_.outputs.push_back(name);
    return os;
  }

  CsvMeta meta(const std::string& extra_key = {}, const std::string& extra_value = {}) const {
    CsvMeta m = {{"manifest", "manifest.json"}};
    if (!extra_key.empty()) m.emplace_back(extra_key, extra_value);
    return m;
  }

  void finish() {
    manifest_.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const fs::path p = out_dir() / "manifest.json";
    std::ofstream os(p);
    os << manifest_.to_json().dump(2) << '\n';
  }

 private:
  Options opt_;
  RunManifest manifest_;
  std::string base_dir_;
  std::chrono::steady_clock::time_point start_;
};

// Mesh from --mesh (file) or the config's "mesh" entry.
LoadedMesh resolve_mesh(Run& run, const ConfigObject& cfg) {
  LoadedMesh m;
  if (!run.options().mesh.empty()) {
    if (cfg.has("mesh")) cfg.raw("mesh");
    m = load_mesh_config(json{{"file", run.options().mesh}}, "--mesh", "");
  } else {
    m = load_mesh_config(cfg.raw("mesh"), cfg.where("mesh"), run.base_dir());
  }
  const auto report = validate(m.mesh);
  if (!report.empty()) throw MeshError("mesh validation failed: " + report.front());
  run.manifest().mesh_hash = mesh_hash(m.mesh);
  for (const auto& [k, v] : m.provenance) run.manifest().provenance[k] = v;
  return m;
}

LoadedMaterials resolve_materials(Run& run, const ConfigObject& cfg) {
  LoadedMaterials lm = load_materials(cfg.has("materials") ? &cfg.raw("materials") : nullptr,
                                      cfg.where("materials"));
  if (run.options().perfect) {
    lm.set.interface.perfect = true;
    lm.provenance["interface.perfect"] = kFromUser;
  }
  for (const auto& [k, v] : lm.provenance) run.manifest().provenance[k] = v;
  return lm;
}

NewtonOptions newton_from(const ConfigObject& cfg, NewtonOptions base) {
  if (!cfg.has("newton")) return base;
  const ConfigObject n = cfg.object("newton");
  base.tol = n.number("tol", base.tol);
  base.max_iter = n.integer("max_iter", base.max_iter);
  n.finish();
  return base;
}

ClimateSeries climate_from(const ConfigObject& o, const std::string& base_dir, double duration) {
  if (o.has("file")) {
    const auto c = read_climate_csv(resolve_path(base_dir, o.string("file")));
    o.finish();
    return c;
  }
  if (o.has("experiment")) {
    const int e = o.integer("experiment", 1);
    o.finish();
    if (e == 1) return experiment1_climate(duration);
    if (e == 2) return experiment2_climate(duration);
    throw ConfigError(o.where("experiment") + ": expected 1 or 2");
  }
  const double ti = o.number("theta_int_C"), pi = o.number("phi_int");
  const double te = o.number("theta_ext_C"), pe = o.number("phi_ext");
  o.finish();
  return ClimateSeries::constant(duration, ti, pi, te, pe);
}

SensorLayout sensors_from(const ConfigObject* o, const Mesh& mesh) {
  if (!o) return default_sensor_layout(mesh, 0.0);
  SensorLayout layout;
  if (o->has("probes")) {
    for (const auto& p : o->objects("probes")) {
      const std::string ph = p.string("phase", "brick");
      if (ph != "brick" && ph != "mortar")
        throw ConfigError(p.where("phase") + ": expected brick|mortar");
      layout.probes.push_back(
          {p.string("name"), p.vec2("position", {}), ph == "brick" ? Phase::brick : Phase::mortar});
      p.finish();
    }
    if (o->has("pairs"))
      for (const auto& p : o->objects("pairs")) {
        layout.pairs.push_back({p.string("name"), p.string("brick"), p.string("mortar")});
        p.finish();
      }
  } else {
    layout = default_sensor_layout(mesh, o->number("offset", 0.0));
  }
  if (o->has("accuracy")) {
    const ConfigObject a = o->object("accuracy");
    layout.accuracy.theta_above_zero = a.number("theta_above_zero", layout.accuracy.theta_above_zero);
    layout.accuracy.theta_below_zero = a.number("theta_below_zero", layout.accuracy.theta_below_zero);
    layout.accuracy.phi = a.number("phi", layout.accuracy.phi);
    a.finish();
  }
  o->finish();
  return layout;
}

ExperimentSpec run_spec_from(const ConfigObject* o) {
  ExperimentSpec s;
  s.duration = 50.0 * 86400.0;
  s.dt = 600.0;
  s.output_interval = 3600.0;
  if (!o) return s;
  if (o->has("duration_days")) s.duration = o->number("duration_days") * 86400.0;
  s.duration = o->number("duration_s", s.duration);
  s.dt = o->number("dt_s", s.dt);
  s.output_interval = o->number("output_interval_s", s.output_interval);
  if (o->has("initial")) {
    const ConfigObject i = o->object("initial");
    s.initial = PointState{i.number("theta_C"), i.number("phi")};
    i.finish();
  }
  s.newton = newton_from(*o, s.newton);
  o->finish();
  return s;
}

struct ExperimentSetup {
  ClimateSeries climate;
  SensorLayout layout;
  ExperimentSpec spec;
};

ExperimentSetup experiment_from(const ConfigObject& cfg, const std::string& base_dir,
                                const Mesh& mesh) {
  ExperimentSetup s;
  std::optional<ConfigObject> run_o, sens_o;
  if (cfg.has("run")) run_o.emplace(cfg.object("run"));
  s.spec = run_spec_from(run_o ? &*run_o : nullptr);
  if (cfg.has("climate"))
    s.climate = climate_from(cfg.object("climate"), base_dir, s.spec.duration);
  else
    s.climate = experiment1_climate(s.spec.duration);
  if (cfg.has("sensors")) sens_o.emplace(cfg.object("sensors"));
  s.layout = sensors_from(sens_o ? &*sens_o : nullptr, mesh);
  return s;
}

// ---------------------------------------------------------------------------

int cmd_mesh(Run& run, std::ostream& out) {
  const json j = run.load_config();
  const ConfigObject cfg(j, "");
  const json& recipe = cfg.has("mesh") ? cfg.raw("mesh") : j;
  if (!cfg.has("mesh")) {
    // The whole file is the recipe; mark every key as read.
    for (auto it = j.begin(); it != j.end(); ++it) cfg.has(it.key());
  }
  cfg.finish();
  LoadedMesh m = load_mesh_config(recipe, cfg.has("mesh") ? "mesh" : "", run.base_dir());
  const auto report = validate(m.mesh);
  if (!report.empty()) {
    for (const auto& r : report) out << "invalid: " << r << '\n';
    throw MeshError("generated mesh failed validation (" + std::to_string(report.size()) +
                    " problems)");
  }
  if (run.options().out.empty()) throw ConfigError("--out is required");
  const fs::path target(run.options().out);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  save_mesh(target.string(), m.mesh);
  {
    std::ofstream js(target.string() + ".json");
    js << mesh_to_json(m.mesh);
  }
  run.manifest().config = m.recipe;
  run.manifest().mesh_hash = mesh_hash(m.mesh);
  run.manifest().provenance = m.provenance;
  run.manifest().outputs = {target.filename().string(), target.filename().string() + ".json"};
  run.manifest().wall_clock_s = 0.0;
  {
    std::ofstream ms(target.string() + ".manifest.json");
    ms << run.manifest().to_json().dump(2) << '\n';
  }
  out << "mesh: " << m.mesh.node_count() << " nodes, " << m.mesh.triangles.size()
      << " triangles, " << m.mesh.interfaces.size() << " interface segments, "
      << m.mesh.periodic.size() << " periodic pairs -> " << target.string() << '\n';
  return kOk;
}

int cmd_solve(Run& run, std::ostream& out) {
  const json j = run.load_config();
  const ConfigObject cfg(j, "");
  const LoadedMesh m = resolve_mesh(run, cfg);
  const LoadedMaterials mat = resolve_materials(run, cfg);
  const ExperimentSetup setup = experiment_from(cfg, run.base_dir(), m.mesh);
  cfg.finish();

  run.manifest().config = {{"mesh", m.recipe},
                           {"materials", materials_to_json(mat.set)},
                           {"run",
                            {{"duration_s", setup.spec.duration},
                             {"dt_s", setup.spec.dt},
                             {"output_interval_s", setup.spec.output_interval}}}};
  const ExperimentResult res =
      run_experiment(m.mesh, setup.climate, setup.layout, mat.set, setup.spec);

  {
    auto os = run.open("traces.csv");
    write_traces_csv(os, res.traces, run.meta());
  }
  {
    auto os = run.open("jumps.csv");
    write_jumps_csv(os, res.jumps, run.meta("orientation", "mortar_minus_brick"));
  }
  {
    auto os = run.open("climate.csv");
    write_climate_csv(os, setup.climate, run.meta());
  }
  json summary = {{"steps", res.steps},
                  {"halvings", res.halvings},
                  {"max_newton_iterations", res.max_newton_iterations},
                  {"clamp_events", res.clamp_events}};
  json jumps = json::array();
  for (const auto& js : res.jumps)
    jumps.push_back({{"pair", js.pair},
                     {"max_abs_dtheta_K", js.max_abs_dtheta},
                     {"max_abs_dphi", js.max_abs_dphi},
                     {"theta_exceeds_sensor_band", js.theta_exceeds_band},
                     {"phi_exceeds_sensor_band", js.phi_exceeds_band}});
  summary["jumps"] = jumps;
  {
    auto os = run.open("summary.json");
    os << summary.dump(2) << '\n';
  }
  run.finish();
  out << "solve: " << res.steps << " steps, max Newton iterations " << res.max_newton_iterations
      << ", outputs in " << run.options().out << '\n';
  return kOk;
}

std::vector<std::string> sweep_header() {
  std::vector<std::string> h = {"case",       "interface_set", "Theta0_C",    "Phi0",
                                "gradTheta_x", "gradTheta_y",  "gradPhi_x",   "gradPhi_y",
                                "bc",         "alpha_int",     "beta_int",    "perfect_contact"};
  const char* blocks[] = {"tt", "tp", "pt", "pp"};
  const char* comps[] = {"xx", "xy", "yx", "yy"};
  for (const char* b : blocks)
    for (const char* c : comps) h.push_back(std::string("KM_") + b + "_" + c);
  h.insert(h.end(), {"hill_mandel_residual", "newton_iterations", "status"});
  return h;
}

std::vector<std::string> sweep_row(const SweepRow& r) {
  const MacroLoadCase& lc = r.load;
  std::vector<std::string> row = {std::to_string(r.case_index),
                                  std::to_string(r.interface_index),
                                  csv::format(lc.Theta0),
                                  csv::format(lc.Phi0),
                                  csv::format(lc.grad_theta.x),
                                  csv::format(lc.grad_theta.y),
                                  csv::format(lc.grad_phi.x),
                                  csv::format(lc.grad_phi.y),
                                  to_string(lc.bc),
                                  csv::format(r.interface.alpha_int),
                                  csv::format(r.interface.beta_int),
                                  r.interface.perfect ? "1" : "0"};
  // Block (a, b), component (i, j) sits at K(2a + i, 2b + j).
  const int blocks[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (const auto& b : blocks)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        row.push_back(r.result ? csv::format(r.result->macro(2 * b[0] + i, 2 * b[1] + j)) : "nan");
  row.push_back(r.result ? csv::format(r.result->hill_mandel_residual) : "nan");
  row.push_back(r.result ? std::to_string(r.result->newton.iterations) : "0");
  std::string status = r.status;
  for (char& c : status)
    if (c == ',' || c == '\n') c = ';';
  row.push_back(status);
  return row;
}

json sweep_sidecar() {
  return {{"schema", "sweep"},
          {"schema_version", csv::kSchemaVersion},
          {"units",
           {{"KM_tt", "W m^-1 K^-1"},
            {"KM_tp", "W m^-1 per unit phi gradient"},
            {"KM_pt", "kg m^-1 s^-1 K^-1"},
            {"KM_pp", "kg m^-1 s^-1"},
            {"gradTheta", "K m^-1"},
            {"gradPhi", "m^-1"},
            {"alpha_int", "W m^-2 K^-1"},
            {"beta_int", "kg m^-2 s^-1 Pa^-1"}}},
          {"component_order", "xx, xy, yx, yy"},
          {"flux_convention", "<q> = -KM * [gradTheta; gradPhi]"}};
}

MacroLoadCase apply_bc_flag(MacroLoadCase lc, const Options& opt) {
  if (!opt.bc.empty()) lc.bc = parse_fluctuation_bc(opt.bc);
  return lc;
}

int cmd_homogenize(Run& run, std::ostream& out) {
  const json j = run.load_config();
  const ConfigObject cfg(j, "");
  const LoadedMesh m = resolve_mesh(run, cfg);
  const LoadedMaterials mat = resolve_materials(run, cfg);
  MacroLoadCase lc;
  if (cfg.has("load")) lc = load_case_from_json(cfg.object("load"));
  lc = apply_bc_flag(lc, run.options());
  HomogenizationOptions ho;
  ho.thermal_only = cfg.boolean("thermal_only", false);
  ho.newton = newton_from(cfg, ho.newton);
  cfg.finish();
  run.manifest().config = {{"mesh", m.recipe},
                           {"materials", materials_to_json(mat.set)},
                           {"load", load_case_to_json(lc)},
                           {"thermal_only", ho.thermal_only}};

  SweepRow row;
  row.load = lc;
  row.interface = mat.set.interface;
  row.result = homogenize(m.mesh, lc, mat.set, ho);
  {
    auto os = run.open("homogenization.csv");
    csv::Writer w(os, "sweep", sweep_header(), run.meta());
    w.row(sweep_row(row));
  }
  const MacroConductivity& r = *row.result;
  auto mat4 = [](const Eigen::Matrix4d& k) {
    json a = json::array();
    for (int i = 0; i < 4; ++i) a.push_back({k(i, 0), k(i, 1), k(i, 2), k(i, 3)});
    return a;
  };
  auto vec4 = [](const Eigen::Vector4d& v) { return json{v(0), v(1), v(2), v(3)}; };
  const json result = {{"macro", mat4(r.macro)},
                       {"local", mat4(r.local)},
                       {"gradient", vec4(r.gradient)},
                       {"average_flux", vec4(r.average_flux)},
                       {"condensed_flux", vec4(r.condensed_flux)},
                       {"hill_mandel_residual", r.hill_mandel_residual},
                       {"mean_fluctuation_gradient", vec4(r.mean_fluctuation_gradient)},
                       {"newton_iterations", r.newton.iterations},
                       {"ordering", "(theta,x), (theta,y), (phi,x), (phi,y)"}};
  {
    auto os = run.open("homogenization.json");
    os << result.dump(2) << '\n';
  }
  run.finish();
  out << "homogenize: KM_tt_xx = " << r.macro(0, 0) << ", KM_pp_xx = " << r.macro(2, 2)
      << ", Hill-Mandel residual " << r.hill_mandel_residual << '\n';
  return kOk;
}

int cmd_sweep(Run& run, std::ostream& out) {
  const json j = run.load_config();
  const ConfigObject cfg(j, "");
  const LoadedMesh m = resolve_mesh(run, cfg);
  const LoadedMaterials mat = resolve_materials(run, cfg);
  HomogenizationOptions ho;
  ho.thermal_only = cfg.boolean("thermal_only", false);
  ho.newton = newton_from(cfg, ho.newton);

  std::vector<MacroLoadCase> cases;
  {
    const ConfigObject g = cfg.object("grid");
    const auto th0 = g.has("Theta0") ? g.numbers("Theta0") : std::vector<double>{20.0};
    const auto ph0 = g.has("Phi0") ? g.numbers("Phi0") : std::vector<double>{0.5};
    auto vecs = [&](const std::string& key) {
      std::vector<Vec2> v;
      if (!g.has(key)) return std::vector<Vec2>{Vec2{}};
      const json& a = g.raw(key);
      if (!a.is_array()) throw ConfigError(g.where(key) + ": expected an array of [x, y] pairs");
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_array() || a[i].size() != 2 || !a[i][0].is_number() || !a[i][1].is_number())
          throw ConfigError(g.where(key) + "[" + std::to_string(i) + "]: expected [x, y]");
        v.push_back({a[i][0].get<double>(), a[i][1].get<double>()});
      }
      return v;
    };
    const auto gth = vecs("grad_theta"), gph = vecs("grad_phi");
    MacroLoadCase proto;
    if (g.has("bc")) proto.bc = parse_fluctuation_bc(g.string("bc"));
    g.finish();
    for (double t : th0)
      for (double p : ph0)
        for (const Vec2& a : gth)
          for (const Vec2& b : gph) {
            MacroLoadCase lc = proto;
            lc.Theta0 = t;
            lc.Phi0 = p;
            lc.grad_theta = a;
            lc.grad_phi = b;
            cases.push_back(apply_bc_flag(lc, run.options()));
          }
  }
  std::vector<InterfaceParams> interfaces;
  if (cfg.has("interfaces")) {
    const json& ij = cfg.raw("interfaces");
    if (ij.is_array()) {
      for (const auto& o : cfg.objects("interfaces")) {
        InterfaceParams ip = mat.set.interface;
        ip.alpha_int = o.number("alpha", ip.alpha_int);
        ip.beta_int = o.number("beta", ip.beta_int);
        ip.perfect = o.boolean("perfect", ip.perfect);
        o.finish();
        interfaces.push_back(ip);
      }
    } else {
      const ConfigObject o = cfg.object("interfaces");
      const auto alphas = o.has("alpha") ? o.numbers("alpha")
                                         : std::vector<double>{mat.set.interface.alpha_int};
      const auto betas = o.has("beta") ? o.numbers("beta")
                                       : std::vector<double>{mat.set.interface.beta_int};
      o.finish();
      for (double a : alphas)
        for (double b : betas) {
          InterfaceParams ip = mat.set.interface;
          ip.alpha_int = a;
          ip.beta_int = b;
          interfaces.push_back(ip);
        }
    }
  } else {
    interfaces.push_back(mat.set.interface);
  }
  cfg.finish();
  for (const auto& ip : interfaces) ip.validate();

  json case_list = json::array();
  for (const auto& c : cases) case_list.push_back(load_case_to_json(c));
  json if_list = json::array();
  for (const auto& ip : interfaces)
    if_list.push_back({{"alpha", ip.alpha_int}, {"beta", ip.beta_int}, {"perfect", ip.perfect}});
  run.manifest().config = {{"mesh", m.recipe},
                           {"materials", materials_to_json(mat.set)},
                           {"cases", case_list},
                           {"interfaces", if_list},
                           {"thermal_only", ho.thermal_only},
                           {"jobs", run.options().jobs}};

  const int jobs = run.options().jobs > 0 ? run.options().jobs : default_jobs();
  const auto rows = sweep(m.mesh, cases, interfaces, mat.set, ho, jobs);
  std::size_t failed = 0;
  {
    auto os = run.open("sweep.csv");
    csv::Writer w(os, "sweep", sweep_header(), run.meta());
    for (const auto& r : rows) {
      w.row(sweep_row(r));
      if (!r.result) ++failed;
    }
  }
  {
    json side = sweep_sidecar();
    side["rows"] = rows.size();
    side["failed_rows"] = failed;
    side["manifest"] = "manifest.json";
    auto os = run.open("sweep.json");
    os << side.dump(2) << '\n';
  }
  run.finish();
  out << "sweep: " << rows.size() << " rows (" << failed << " failed) -> " << run.options().out
      << "/sweep.csv\n";
  return kOk;
}

int cmd_identify(Run& run, std::ostream& out) {
  const json j = run.load_config();
  const ConfigObject cfg(j, "");
  const LoadedMesh m = resolve_mesh(run, cfg);
  const LoadedMaterials mat = resolve_materials(run, cfg);
  const std::size_t top_k = static_cast<std::size_t>(cfg.integer("top_k", 5));

  std::vector<StageConfig> stages;
  json stage_cfg = json::array();
  for (const auto& so : cfg.objects("stages")) {
    StageConfig st;
    st.name = so.string("name");
    const ExperimentSetup setup = experiment_from(so, run.base_dir(), m.mesh);
    st.model = {&m.mesh, setup.climate, setup.layout, mat.set, setup.spec};
    for (const auto& po : so.objects("priors")) {
      const std::string name = po.string("name");
      const double mean = po.number("mean");
      ParameterPrior p = default_prior(name, mean, po.number("cov", 0.2));
      run.manifest().provenance["prior." + name + ".cov"] = po.has("cov") ? kFromUser : kFromDefault;
      p.lower = po.number("lower", p.lower);
      p.upper = po.number("upper", p.upper);
      po.finish();
      p.validate();
      get_parameter(mat.set, name);
      st.priors.push_back(p);
    }
    st.fields = {false, false};
    for (const auto& f : so.has("fields") ? so.raw("fields") : json::array({"theta", "phi"})) {
      const std::string s = f.is_string() ? f.get<std::string>() : std::string();
      if (s == "theta") st.fields.theta = true;
      else if (s == "phi") st.fields.phi = true;
      else throw ConfigError(so.where("fields") + ": expected theta|phi entries");
    }
    st.pool_size = static_cast<std::size_t>(so.integer("pool_size", 50));
    const ConfigObject obs = so.object("observed");
    if (obs.has("file")) {
      st.observed = read_traces_csv(resolve_path(run.base_dir(), obs.string("file")));
      obs.finish();
    } else {
      // Synthetic observations from the forward model at a reference vector.
      const ConfigObject truth = obs.object("synthetic");
      MaterialSet tm = mat.set;
      std::vector<double> truth_vec;
      for (const auto& p : st.priors) {
        if (truth.has(p.name)) set_parameter(tm, p.name, truth.number(p.name));
        truth_vec.push_back(get_parameter(tm, p.name));
      }
      truth.finish();
      const bool include = obs.boolean("include_in_pool", true);
      obs.finish();
      st.model.materials = tm;  // later stages overwrite the identified subset
      st.observed = st.model.run(tm);
      if (include) st.extra.push_back(truth_vec);
    }
    so.finish();
    stage_cfg.push_back({{"name", st.name}, {"pool_size", st.pool_size}});
    stages.push_back(std::move(st));
  }
  cfg.finish();
  run.manifest().config = {{"mesh", m.recipe},
                           {"materials", materials_to_json(mat.set)},
                           {"stages", stage_cfg},
                           {"top_k", top_k}};
  const int jobs = run.options().jobs > 0 ? run.options().jobs : default_jobs();
  const auto results = run_pipeline(stages, run.options().seed, jobs, top_k);

  json summary = {{"stages", json::array()}};
  for (const auto& st : results) {
    {
      auto os = run.open("fit_" + st.name + ".csv");
      write_fit_csv(os, st, run.meta("stage", st.name));
    }
    json top = json::array();
    for (const auto& r : st.best.top) {
      json params;
      for (std::size_t k = 0; k < st.names.size(); ++k) params[st.names[k]] = r.params[k];
      top.push_back({{"id", r.id}, {"objective", r.objective}, {"parameters", params},
                     {"status", r.status}});
    }
    std::string optimal;
    if (!st.best.all_failed) {
      std::ostringstream os;
      os << std::setprecision(6);
      for (std::size_t k = 0; k < st.names.size(); ++k)
        os << (k ? ", " : "") << st.names[k] << " = " << st.best.top.front().params[k];
      optimal = os.str();
    }
    summary["stages"].push_back({{"name", st.name},
                                 {"realizations", st.results.size()},
                                 {"best_id", st.best.all_failed ? json(nullptr) : json(st.best.top.front().id)},
                                 {"all_failed", st.best.all_failed},
                                 {"optimal", optimal},
                                 {"top", top}});
    out << "identify[" << st.name << "]: " << (st.best.all_failed ? "all realizations failed" : optimal)
        << '\n';
  }
  {
    auto os = run.open("summary.json");
    os << summary.dump(2) << '\n';
  }
  run.finish();
  return kOk;
}

void write_diagnostics(const Options& opt, const std::string& command, const SolverError& e) {
  if (opt.out.empty()) return;
  std::error_code ec;
  const fs::path dir = command == "mesh" ? fs::path(opt.out).parent_path() : fs::path(opt.out);
  if (!dir.empty()) fs::create_directories(dir, ec);
  std::ofstream os(dir / "diagnostics.json");
  os << json{{"command", command}, {"error", e.what()}, {"residual_history", e.residual_history()}}
            .dump(2)
     << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupled heat and moisture homogenization of brick-mortar masonry"};
  app.require_subcommand(1);
  Options opt;
  auto common = [&](CLI::App* sub, bool with_mesh) {
    sub->add_option("--config", opt.config, "JSON configuration file")->required();
    sub->add_option("--out", opt.out, "output directory (mesh: output file)")->required();
    if (with_mesh) {
      sub->add_option("--mesh", opt.mesh, "mesh file overriding the config's mesh entry");
      sub->add_option("--seed", opt.seed, "random seed");
      sub->add_option("--jobs", opt.jobs, "worker threads (default: available cores)");
      sub->add_option("--bc", opt.bc, "fluctuation boundary conditions")
          ->check(CLI::IsMember({"dirichlet", "periodic"}));
      sub->add_flag("--perfect-contact", opt.perfect, "tie interface node pairs");
    }
  };
  CLI::App* mesh = app.add_subcommand("mesh", "generate and validate a mesh");
  common(mesh, false);
  CLI::App* solve = app.add_subcommand("solve", "transient wall-sample experiment");
  common(solve, true);
  CLI::App* homog = app.add_subcommand("homogenize", "macroscopic conductivity of a unit cell");
  common(homog, true);
  CLI::App* sw = app.add_subcommand("sweep", "homogenization over load and interface grids");
  common(sw, true);
  CLI::App* ident = app.add_subcommand("identify", "LHS least-squares parameter identification");
  common(ident, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  std::string command = "?";
  for (CLI::App* s : {mesh, solve, homog, sw, ident})
    if (s->parsed()) command = s->get_name();
  try {
    Run r(command, opt);
    if (command == "mesh") return cmd_mesh(r, out);
    if (command == "solve") return cmd_solve(r, out);
    if (command == "homogenize") return cmd_homogenize(r, out);
    if (command == "sweep") return cmd_sweep(r, out);
    return cmd_identify(r, out);
  } catch (const SolverError& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    write_diagnostics(opt, command, e);
    return kNumerical;
  } catch (const DomainError& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    write_diagnostics(opt, command, SolverError(e.what()));
    return kNumerical;
  } catch (const ConfigError& e) {
    err << "error: configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const MeshError& e) {
    err << "error: mesh: " << e.what() << '\n';
    return kUsage;
  } catch (const ParameterError& e) {
    err << "error: parameters: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace hygro::cli
