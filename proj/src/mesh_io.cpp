#include "hygro/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hygro/errors.hpp"

namespace hygro {

namespace {

Phase parse_phase(const std::string& s) {
  if (s == "brick") return Phase::brick;
  if (s == "mortar") return Phase::mortar;
  throw ConfigError("unknown phase '" + s + "' in mesh file");
}

BoundaryMarker parse_marker(const std::string& s) {
  if (s == "left") return BoundaryMarker::left;
  if (s == "right") return BoundaryMarker::right;
  if (s == "bottom") return BoundaryMarker::bottom;
  if (s == "top") return BoundaryMarker::top;
  throw ConfigError("unknown boundary marker '" + s + "' in mesh file");
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string next_line() {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return line;
    }
    fail("unexpected end of file");
  }

  std::size_t section(const std::string& name) {
    std::istringstream ls(next_line());
    std::string tag;
    std::size_t count = 0;
    if (!(ls >> tag >> count) || tag != name) fail("expected section " + name);
    return count;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("mesh file line " + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::istream& is_;
  int line_no_ = 0;
};

}  // namespace

void write_mesh(std::ostream& os, const Mesh& mesh) {
  const auto old_precision = os.precision();
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "HYGRO_MESH\nschema_version " << kMeshSchemaVersion << "\n";
  os << "BOX " << mesh.lower.x << ' ' << mesh.lower.y << ' ' << mesh.upper.x << ' '
     << mesh.upper.y << "\n";
  os << "NODES " << mesh.nodes.size() << "\n";
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    os << i << ' ' << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << ' '
       << to_string(mesh.node_phase[i]) << "\n";
  os << "TRIANGLES " << mesh.triangles.size() << "\n";
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    os << i << ' ' << t.nodes[0] << ' ' << t.nodes[1] << ' ' << t.nodes[2] << ' '
       << to_string(t.phase) << "\n";
  }
  os << "INTERFACES " << mesh.interfaces.size() << "\n";
  for (std::size_t i = 0; i < mesh.interfaces.size(); ++i) {
    const auto& s = mesh.interfaces[i];
    os << i << ' ' << s.side1[0] << ' ' << s.side1[1] << ' ' << s.side2[0] << ' '
       << s.side2[1] << ' ' << s.interface_id << ' ' << s.normal.x << ' ' << s.normal.y
       << "\n";
  }
  os << "BOUNDARY " << mesh.boundary.size() << "\n";
  for (std::size_t i = 0; i < mesh.boundary.size(); ++i) {
    const auto& b = mesh.boundary[i];
    os << i << ' ' << b.nodes[0] << ' ' << b.nodes[1] << ' ' << to_string(b.marker) << ' '
       << b.normal.x << ' ' << b.normal.y << "\n";
  }
  os << "PERIODIC " << mesh.periodic.size() << "\n";
  for (std::size_t i = 0; i < mesh.periodic.size(); ++i) {
    const auto& p = mesh.periodic[i];
    os << i << ' ' << p.master << ' ' << p.slave << ' ' << p.axis << "\n";
  }
  os << "END\n";
  os.precision(old_precision);
}

Mesh read_mesh(std::istream& is) {
  Reader r(is);
  Mesh mesh;
  if (r.next_line().rfind("HYGRO_MESH", 0) != 0) r.fail("missing HYGRO_MESH magic");
  {
    const std::size_t version = r.section("schema_version");
    if (version != static_cast<std::size_t>(kMeshSchemaVersion))
      r.fail("unsupported schema_version " + std::to_string(version));
  }
  {
    std::istringstream ls(r.next_line());
    std::string tag;
    if (!(ls >> tag >> mesh.lower.x >> mesh.lower.y >> mesh.upper.x >> mesh.upper.y) ||
        tag != "BOX")
      r.fail("expected BOX x0 y0 x1 y1");
  }
  const std::size_t nn = r.section("NODES");
  mesh.nodes.resize(nn);
  mesh.node_phase.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    std::istringstream ls(r.next_line());
    std::size_t id;
    std::string phase;
    if (!(ls >> id >> mesh.nodes[i].x >> mesh.nodes[i].y >> phase) || id != i)
      r.fail("malformed node record");
    mesh.node_phase[i] = parse_phase(phase);
  }
  const std::size_t nt = r.section("TRIANGLES");
  mesh.triangles.resize(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    std::istringstream ls(r.next_line());
    std::size_t id;
    std::string phase;
    auto& t = mesh.triangles[i];
    if (!(ls >> id >> t.nodes[0] >> t.nodes[1] >> t.nodes[2] >> phase) || id != i)
      r.fail("malformed triangle record");
    t.phase = parse_phase(phase);
  }
  const std::size_t ni = r.section("INTERFACES");
  mesh.interfaces.resize(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    std::istringstream ls(r.next_line());
    std::size_t id;
    auto& s = mesh.interfaces[i];
    if (!(ls >> id >> s.side1[0] >> s.side1[1] >> s.side2[0] >> s.side2[1] >> s.interface_id >>
          s.normal.x >> s.normal.y) ||
        id != i)
      r.fail("malformed interface record");
  }
  const std::size_t nb = r.section("BOUNDARY");
  mesh.boundary.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    std::istringstream ls(r.next_line());
    std::size_t id;
    std::string marker;
    auto& b = mesh.boundary[i];
    if (!(ls >> id >> b.nodes[0] >> b.nodes[1] >> marker >> b.normal.x >> b.normal.y) ||
        id != i)
      r.fail("malformed boundary record");
    b.marker = parse_marker(marker);
  }
  const std::size_t np = r.section("PERIODIC");
  mesh.periodic.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    std::istringstream ls(r.next_line());
    std::size_t id;
    auto& p = mesh.periodic[i];
    if (!(ls >> id >> p.master >> p.slave >> p.axis) || id != i)
      r.fail("malformed periodic record");
  }
  if (r.next_line().rfind("END", 0) != 0) r.fail("missing END");
  return mesh;
}

void save_mesh(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_mesh(os, mesh);
}

Mesh load_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open mesh file '" + path + "'");
  return read_mesh(is);
}

std::string mesh_to_json(const Mesh& mesh) {
  nlohmann::json j;
  j["schema_version"] = kMeshSchemaVersion;
  j["box"] = {mesh.lower.x, mesh.lower.y, mesh.upper.x, mesh.upper.y};
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    nodes.push_back({{"x", mesh.nodes[i].x}, {"y", mesh.nodes[i].y},
                     {"phase", to_string(mesh.node_phase[i])}});
  auto& tris = j["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles)
    tris.push_back({{"nodes", t.nodes}, {"phase", to_string(t.phase)}});
  auto& ifs = j["interfaces"] = nlohmann::json::array();
  for (const auto& s : mesh.interfaces)
    ifs.push_back({{"side1", s.side1},
                   {"side2", s.side2},
                   {"interface_id", s.interface_id},
                   {"normal", {s.normal.x, s.normal.y}}});
  auto& bnd = j["boundary"] = nlohmann::json::array();
  for (const auto& b : mesh.boundary)
    bnd.push_back({{"nodes", b.nodes},
                   {"marker", to_string(b.marker)},
                   {"normal", {b.normal.x, b.normal.y}}});
  auto& per = j["periodic"] = nlohmann::json::array();
  for (const auto& p : mesh.periodic)
    per.push_back({{"master", p.master}, {"slave", p.slave}, {"axis", p.axis}});
  return j.dump(1);
}

std::string mesh_hash(const Mesh& mesh) {
  std::ostringstream os;
  write_mesh(os, mesh);
  const std::string text = os.str();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hygro
