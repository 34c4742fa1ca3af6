#include "hygro/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hygro/errors.hpp"
#include "hygro/mesh_io.hpp"

namespace hygro {

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  try {
    return json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    // e.what() carries "parse error at line L, column C".
    throw ConfigError(path + ": " + e.what());
  }
}

ConfigObject::ConfigObject(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
  if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
}

std::string ConfigObject::where(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

bool ConfigObject::has(const std::string& key) const {
  if (j_->contains(key)) {
    used_.insert(key);
    return true;
  }
  return false;
}

const json& ConfigObject::get(const std::string& key) const {
  if (!j_->contains(key)) throw ConfigError(where(key) + ": required field is missing");
  used_.insert(key);
  return (*j_)[key];
}

const json& ConfigObject::raw(const std::string& key) const { return get(key); }

double ConfigObject::number(const std::string& key) const {
  const json& v = get(key);
  if (!v.is_number()) throw ConfigError(where(key) + ": expected a number, got " + v.dump());
  return v.get<double>();
}

double ConfigObject::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

int ConfigObject::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer, got " + v.dump());
  return v.get<int>();
}

bool ConfigObject::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = get(key);
  if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false, got " + v.dump());
  return v.get<bool>();
}

std::string ConfigObject::string(const std::string& key) const {
  const json& v = get(key);
  if (!v.is_string()) throw ConfigError(where(key) + ": expected a string, got " + v.dump());
  return v.get<std::string>();
}

std::string ConfigObject::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

std::vector<double> ConfigObject::numbers(const std::string& key) const {
  const json& v = get(key);
  if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError(where(key) + "[" + std::to_string(i) + "]: expected a number, got " +
                        v[i].dump());
    out.push_back(v[i].get<double>());
  }
  return out;
}

Vec2 ConfigObject::vec2(const std::string& key, Vec2 fallback) const {
  if (!has(key)) return fallback;
  const auto v = numbers(key);
  if (v.size() != 2) throw ConfigError(where(key) + ": expected two components");
  return {v[0], v[1]};
}

ConfigObject ConfigObject::object(const std::string& key) const {
  return ConfigObject(get(key), where(key));
}

std::vector<ConfigObject> ConfigObject::objects(const std::string& key) const {
  const json& v = get(key);
  if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of objects");
  std::vector<ConfigObject> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.emplace_back(v[i], where(key) + "[" + std::to_string(i) + "]");
  return out;
}

void ConfigObject::finish() const {
  for (auto it = j_->begin(); it != j_->end(); ++it)
    if (!used_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown field");
}

// ---------------------------------------------------------------------------

namespace {

const char* const kParamNames[] = {"lambda0", "b_tcs", "mu", "w_f", "w80", "A", "rho_s", "c_s"};

double& param_ref(MaterialParams& p, const std::string& name) {
  if (name == "lambda0") return p.lambda0;
  if (name == "b_tcs") return p.b_tcs;
  if (name == "mu") return p.mu;
  if (name == "w_f") return p.w_f;
  if (name == "w80") return p.w80;
  if (name == "A") return p.A;
  if (name == "rho_s") return p.rho_s;
  return p.c_s;
}

PhaseModel load_phase(const ConfigObject& o, const std::string& prefix, const MaterialParams& base,
                      std::map<std::string, std::string>& prov) {
  const std::string model = o.string("model", "kunzel");
  if (model == "constant") {
    ConstantPhase c;
    if (o.has("k")) {
      const json& k = o.raw("k");
      if (!k.is_array() || k.size() != 2 || !k[0].is_array() || !k[1].is_array() ||
          k[0].size() != 2 || k[1].size() != 2)
        throw ConfigError(o.where("k") + ": expected a 2x2 array");
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) c.k[a][b] = k[a][b].get<double>();
    }
    c.c_theta = o.number("c_theta", c.c_theta);
    c.c_phi = o.number("c_phi", c.c_phi);
    prov[prefix + ".model"] = kFromUser;
    o.finish();
    return c;
  }
  if (model != "kunzel")
    throw ConfigError(o.where("model") + ": unknown model '" + model + "' (expected kunzel|constant)");
  MaterialParams p = base;
  for (const char* name : kParamNames) {
    if (o.has(name)) {
      param_ref(p, name) = o.number(name);
      prov[prefix + "." + name] = kFromUser;
    }
  }
  o.finish();
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(o.path() + ": " + e.what());
  }
  return KunzelPhase{p};
}

}  // namespace

LoadedMaterials load_materials(const json* j, const std::string& path) {
  LoadedMaterials out;
  for (const char* phase : {"brick", "mortar"})
    for (const char* name : kParamNames) out.provenance[std::string(phase) + "." + name] = kFromPaper;
  out.provenance["interface.alpha"] = kFromPaper;
  out.provenance["interface.beta"] = kFromPaper;
  out.provenance["interface.perfect"] = kFromDefault;
  out.provenance["coupling"] = kFromDefault;
  for (const char* c : {"gas_constant", "molar_mass_water", "water_density",
                        "evaporation_enthalpy", "water_heat_capacity", "ambient_pressure"})
    out.provenance[std::string("constants.") + c] = kFromDefault;
  if (!j || j->is_null()) return out;

  const ConfigObject o(*j, path);
  if (o.has("coupling")) {
    const std::string c = o.string("coupling");
    if (c == "full") out.set.coupling = Coupling::full;
    else if (c == "decoupled") out.set.coupling = Coupling::decoupled;
    else throw ConfigError(o.where("coupling") + ": expected full|decoupled, got '" + c + "'");
    out.provenance["coupling"] = kFromUser;
  }
  if (o.has("brick"))
    out.set.brick = load_phase(o.object("brick"), "brick", identified_brick(), out.provenance);
  if (o.has("mortar"))
    out.set.mortar = load_phase(o.object("mortar"), "mortar", identified_mortar(), out.provenance);
  if (o.has("interface")) {
    const ConfigObject i = o.object("interface");
    if (i.has("alpha")) {
      out.set.interface.alpha_int = i.number("alpha");
      out.provenance["interface.alpha"] = kFromUser;
    }
    if (i.has("beta")) {
      out.set.interface.beta_int = i.number("beta");
      out.provenance["interface.beta"] = kFromUser;
    }
    if (i.has("perfect")) {
      out.set.interface.perfect = i.boolean("perfect", false);
      out.provenance["interface.perfect"] = kFromUser;
    }
    i.finish();
  }
  if (o.has("constants")) {
    const ConfigObject c = o.object("constants");
    PhysicalConstants& k = out.set.constants;
    auto read = [&](const char* name, double& slot) {
      if (c.has(name)) {
        slot = c.number(name);
        out.provenance[std::string("constants.") + name] = kFromUser;
      }
    };
    read("gas_constant", k.gas_constant);
    read("molar_mass_water", k.molar_mass_water);
    read("water_density", k.water_density);
    read("evaporation_enthalpy", k.evaporation_enthalpy);
    read("water_heat_capacity", k.water_heat_capacity);
    read("ambient_pressure", k.ambient_pressure);
    c.finish();
  }
  o.finish();
  try {
    out.set.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return out;
}

json materials_to_json(const MaterialSet& m) {
  json j;
  j["coupling"] = m.coupling == Coupling::full ? "full" : "decoupled";
  auto phase = [](const PhaseModel& model) {
    json p;
    if (const auto* c = std::get_if<ConstantPhase>(&model)) {
      p["model"] = "constant";
      p["k"] = {{c->k[0][0], c->k[0][1]}, {c->k[1][0], c->k[1][1]}};
      p["c_theta"] = c->c_theta;
      p["c_phi"] = c->c_phi;
      return p;
    }
    MaterialParams q = std::get<KunzelPhase>(model).params;
    p["model"] = "kunzel";
    for (const char* name : kParamNames) p[name] = param_ref(q, name);
    return p;
  };
  j["brick"] = phase(m.brick);
  j["mortar"] = phase(m.mortar);
  j["interface"] = {{"alpha", m.interface.alpha_int},
                    {"beta", m.interface.beta_int},
                    {"perfect", m.interface.perfect}};
  j["constants"] = {{"gas_constant", m.constants.gas_constant},
                    {"molar_mass_water", m.constants.molar_mass_water},
                    {"water_density", m.constants.water_density},
                    {"evaporation_enthalpy", m.constants.evaporation_enthalpy},
                    {"water_heat_capacity", m.constants.water_heat_capacity},
                    {"ambient_pressure", m.constants.ambient_pressure}};
  return j;
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return p;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

LoadedMesh load_mesh_config(const json& j, const std::string& path, const std::string& base_dir) {
  const ConfigObject o(j, path);
  LoadedMesh out;
  if (o.has("file")) {
    const std::string file = resolve_path(base_dir, o.string("file"));
    o.finish();
    out.mesh = load_mesh(file);
    out.recipe = {{"file", file}};
    out.provenance["mesh"] = kFromUser;
    return out;
  }
  const std::string kind = o.string("kind");
  out.provenance["mesh"] = kFromDefault;
  auto note = [&](const std::string& key) {
    if (o.has(key)) out.provenance["mesh." + key] = kFromUser;
  };
  if (kind == "puc") {
    PucSpec s;
    for (const char* k : {"brick_length", "brick_height", "bed_joint", "head_joint", "target_size"})
      note(k);
    s.brick_length = o.number("brick_length", s.brick_length);
    s.brick_height = o.number("brick_height", s.brick_height);
    s.bed_joint = o.number("bed_joint", s.bed_joint);
    s.head_joint = o.number("head_joint", s.head_joint);
    s.target_size = o.number("target_size", s.target_size);
    o.finish();
    out.mesh = generate_puc(s);
    out.recipe = {{"kind", "puc"},
                  {"brick_length", s.brick_length},
                  {"brick_height", s.brick_height},
                  {"bed_joint", s.bed_joint},
                  {"head_joint", s.head_joint},
                  {"target_size", s.target_size},
                  {"bond", "running"}};
  } else if (kind == "wall") {
    WallSpec s = WallSpec::laboratory_block();
    for (const char* k : {"layers", "courses", "course_height", "bed_joint", "target_size"}) note(k);
    if (o.has("layers")) {
      s.layers.clear();
      for (const auto& l : o.objects("layers")) {
        const std::string ph = l.string("phase");
        if (ph != "brick" && ph != "mortar")
          throw ConfigError(l.where("phase") + ": expected brick|mortar, got '" + ph + "'");
        s.layers.push_back({ph == "brick" ? Phase::brick : Phase::mortar, l.number("thickness")});
        l.finish();
      }
    }
    s.courses = o.integer("courses", s.courses);
    s.course_height = o.number("course_height", s.course_height);
    s.bed_joint = o.number("bed_joint", s.bed_joint);
    s.target_size = o.number("target_size", s.target_size);
    o.finish();
    out.mesh = generate_wall_sample(s);
    json layers = json::array();
    for (const auto& l : s.layers)
      layers.push_back({{"phase", to_string(l.phase)}, {"thickness", l.thickness}});
    out.recipe = {{"kind", "wall"},       {"layers", layers},
                  {"courses", s.courses}, {"course_height", s.course_height},
                  {"bed_joint", s.bed_joint}, {"target_size", s.target_size}};
  } else if (kind == "laminate") {
    for (const char* k : {"brick_width", "mortar_width", "height", "target_size"}) note(k);
    const double bw = o.number("brick_width", 0.1), mw = o.number("mortar_width", 0.02);
    const double h = o.number("height", 0.05), ts = o.number("target_size", 0.01);
    o.finish();
    for (auto [name, v] : {std::pair<const char*, double>{"brick_width", bw},
                           {"mortar_width", mw}, {"height", h}, {"target_size", ts}})
      if (!(v > 0.0)) {
        std::ostringstream os;
        os << name << " must be positive (got " << v << ")";
        throw MeshError(os.str());
      }
    out.mesh = generate_laminate(bw, mw, h, ts);
    out.recipe = {{"kind", "laminate"}, {"brick_width", bw}, {"mortar_width", mw},
                  {"height", h},        {"target_size", ts}};
  } else {
    throw ConfigError(o.where("kind") + ": expected puc|wall|laminate, got '" + kind + "'");
  }
  return out;
}

MacroLoadCase load_case_from_json(const ConfigObject& o) {
  MacroLoadCase lc;
  lc.Theta0 = o.number("Theta0", lc.Theta0);
  lc.Phi0 = o.number("Phi0", lc.Phi0);
  lc.grad_theta = o.vec2("grad_theta", lc.grad_theta);
  lc.grad_phi = o.vec2("grad_phi", lc.grad_phi);
  if (o.has("x0")) lc.x0 = o.vec2("x0", {});
  if (o.has("bc")) lc.bc = parse_fluctuation_bc(o.string("bc"));
  o.finish();
  return lc;
}

json load_case_to_json(const MacroLoadCase& lc) {
  json j = {{"Theta0", lc.Theta0},
            {"Phi0", lc.Phi0},
            {"grad_theta", {lc.grad_theta.x, lc.grad_theta.y}},
            {"grad_phi", {lc.grad_phi.x, lc.grad_phi.y}},
            {"bc", to_string(lc.bc)}};
  if (lc.x0) j["x0"] = {lc.x0->x, lc.x0->y};
  return j;
}

json RunManifest::to_json() const {
  return {{"schema_version", 1},
          {"command", command},
          {"config", config},
          {"mesh_hash", mesh_hash},
          {"provenance", provenance},
          {"seed", seed},
          {"tool_version", tool_version},
          {"started_utc", started_utc},
          {"wall_clock_s", wall_clock_s},
          {"outputs", outputs}};
}

}  // namespace hygro
