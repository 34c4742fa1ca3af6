#pragma once

// JSON configuration: strict readers with path-qualified diagnostics, material
// sets with per-parameter provenance, mesh recipes and run manifests.

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hygro/fem.hpp"
#include "hygro/homogenization.hpp"
#include "hygro/mesh.hpp"

namespace hygro {

using json = nlohmann::json;

/// Reads a JSON file. Parse errors become ConfigError carrying file, line and column.
json read_json_file(const std::string& path);

/// View of a JSON object that records which keys were read; finish() rejects the rest.
class ConfigObject {
 public:
  ConfigObject(const json& j, std::string path);

  const std::string& path() const { return path_; }
  std::string where(const std::string& key) const;
  bool has(const std::string& key) const;

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  Vec2 vec2(const std::string& key, Vec2 fallback) const;
  ConfigObject object(const std::string& key) const;
  std::vector<ConfigObject> objects(const std::string& key) const;
  const json& raw(const std::string& key) const;

  /// Throws ConfigError listing keys that were never read.
  void finish() const;

 private:
  const json& get(const std::string& key) const;
  const json* j_;
  std::string path_;
  mutable std::set<std::string> used_;
};

/// Parameter provenance recorded in manifests.
inline constexpr const char* kFromPaper = "paper";
inline constexpr const char* kFromDefault = "default";
inline constexpr const char* kFromUser = "user";

struct LoadedMaterials {
  MaterialSet set;
  std::map<std::string, std::string> provenance;  // "brick.lambda0" -> paper|default|user
};

/// Material set from an optional "materials" object; absent keys keep the built-in
/// values with their provenance.
LoadedMaterials load_materials(const json* j, const std::string& path);
json materials_to_json(const MaterialSet& m);

struct LoadedMesh {
  Mesh mesh;
  json recipe;       // resolved generation parameters (or the file path)
  std::map<std::string, std::string> provenance;
};

/// Mesh from {"file": path} (relative to base_dir) or a recipe with "kind" in
/// puc | wall | laminate. Generation errors surface as MeshError.
LoadedMesh load_mesh_config(const json& j, const std::string& path, const std::string& base_dir);

MacroLoadCase load_case_from_json(const ConfigObject& o);
json load_case_to_json(const MacroLoadCase& lc);

/// Resolves `p` against `base_dir` unless it is absolute.
std::string resolve_path(const std::string& base_dir, const std::string& p);

struct RunManifest {
  std::string command;
  json config;
  std::string mesh_hash;
  std::map<std::string, std::string> provenance;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started_utc;
  double wall_clock_s = 0.0;
  std::vector<std::string> outputs;

  json to_json() const;
};

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace hygro
