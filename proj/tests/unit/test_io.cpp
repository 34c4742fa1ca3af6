#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hygro/config.hpp"
#include "hygro/csv.hpp"
#include "hygro/errors.hpp"

using namespace hygro;

TEST_CASE("csv number format round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.0}) CHECK(std::stod(csv::format(v)) == v);
  CHECK(csv::format(0.5) == "0.5");
}

TEST_CASE("csv writer and reader") {
  std::stringstream ss;
  {
    csv::Writer w(ss, "demo", {"a", "b"}, {{"manifest", "m.json"}});
    w.row({"1", "x"});
    w.row({"2.5", "y"});
    CHECK_THROWS(w.row({"only one"}));
  }
  CHECK(ss.str().rfind("#schema_version=1,schema=demo,manifest=m.json\na,b\n", 0) == 0);
  const csv::Table t = csv::read(ss, "demo.csv");
  CHECK(t.schema_version == 1);
  CHECK(t.meta.at("schema") == "demo");
  CHECK(t.rows.size() == 2);
  CHECK(t.number(1, t.column("a")) == 2.5);
  CHECK_THROWS_WITH_AS(t.column("c"), doctest::Contains("demo.csv"), ConfigError);
  CHECK_THROWS_AS(t.number(0, t.column("b")), ConfigError);

  std::stringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_WITH_AS(csv::read(ragged, "r.csv"), doctest::Contains("r.csv"), ConfigError);
  std::stringstream future("#schema_version=2,schema=demo\na\n1\n");
  CHECK_THROWS_AS(csv::read(future, "f.csv"), ConfigError);
}

TEST_CASE("config objects reject unknown keys with their path") {
  const json j = json::parse(R"({"a": 1.5, "b": {"c": true, "typo": 2}})");
  const ConfigObject o(j, "cfg");
  CHECK(o.number("a") == 1.5);
  const ConfigObject b = o.object("b");
  CHECK(b.boolean("c", false));
  CHECK_THROWS_WITH_AS(b.finish(), doctest::Contains("typo"), ConfigError);
  CHECK_NOTHROW(o.finish());
  CHECK_THROWS_WITH_AS(o.number("missing"), doctest::Contains("missing"), ConfigError);
  const json bad = json::parse(R"({"a": "text"})");
  CHECK_THROWS_AS(ConfigObject(bad, "").number("a"), ConfigError);
}

TEST_CASE("json parse errors carry the location") {
  const auto path = std::filesystem::temp_directory_path() / "hygro_bad_config.json";
  {
    std::ofstream os(path);
    os << "{\n  \"a\": 1,\n  \"b\": \n}\n";
  }
  CHECK_THROWS_WITH_AS(read_json_file(path.string()), doctest::Contains("line"), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_json_file("/nonexistent/file.json"), ConfigError);
}

TEST_CASE("materials: overrides and provenance") {
  const json j = json::parse(R"({"brick": {"lambda0": 0.3}, "interface": {"alpha": 2e5}})");
  const LoadedMaterials m = load_materials(&j, "materials");
  CHECK(std::get<KunzelPhase>(m.set.brick).params.lambda0 == 0.3);
  CHECK(m.set.interface.alpha_int == 2e5);
  CHECK(m.provenance.at("brick.lambda0") == kFromUser);
  CHECK(m.provenance.at("mortar.lambda0") == kFromPaper);
  const json bad = json::parse(R"({"brick": {"lambda0": -1}})");
  CHECK_THROWS_WITH_AS(load_materials(&bad, "materials"), doctest::Contains("materials.brick"),
                       ConfigError);
  const json unknown = json::parse(R"({"brick": {"lambda": 1}})");
  CHECK_THROWS_AS(load_materials(&unknown, "materials"), ConfigError);
}

TEST_CASE("mesh recipes") {
  const auto puc = load_mesh_config(json::parse(R"({"kind": "puc", "target_size": 0.02})"), "mesh", "");
  CHECK(puc.mesh.periodic.size() > 0);
  CHECK(puc.recipe.at("target_size") == 0.02);
  const auto wall = load_mesh_config(json::parse(R"({"kind": "wall"})"), "mesh", "");
  CHECK(wall.mesh.interfaces.size() > 0);
  CHECK_THROWS_AS(load_mesh_config(json::parse(R"({"kind": "sphere"})"), "mesh", ""), ConfigError);
  CHECK_THROWS_AS(load_mesh_config(json::parse(R"({"kind": "laminate", "height": -1})"), "mesh", ""),
                  MeshError);
}

TEST_CASE("run manifest carries the reproducibility fields") {
  RunManifest m;
  m.command = "sweep";
  m.seed = 9;
  m.mesh_hash = "abc";
  m.outputs = {"sweep.csv"};
  const json j = m.to_json();
  for (const char* k : {"command", "config", "mesh_hash", "provenance", "seed", "tool_version",
                        "started_utc", "wall_clock_s", "outputs"})
    CHECK(j.contains(k));
  CHECK(j.at("seed") == 9);
}
