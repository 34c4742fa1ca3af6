#include "hygro/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "hygro/errors.hpp"

namespace hygro {

const char* to_string(Phase p) { return p == Phase::brick ? "brick" : "mortar"; }

const char* to_string(BoundaryMarker m) {
  switch (m) {
    case BoundaryMarker::left: return "left";
    case BoundaryMarker::right: return "right";
    case BoundaryMarker::bottom: return "bottom";
    case BoundaryMarker::top: return "top";
  }
  return "?";
}

double signed_area(const Mesh& mesh, const Triangle& t) {
  const Vec2& a = mesh.nodes[t.nodes[0]];
  const Vec2& b = mesh.nodes[t.nodes[1]];
  const Vec2& c = mesh.nodes[t.nodes[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double Mesh::area() const {
  double s = 0.0;
  for (const auto& t : triangles) s += signed_area(*this, t);
  return s;
}

double Mesh::phase_area(Phase p) const {
  double s = 0.0;
  for (const auto& t : triangles)
    if (t.phase == p) s += signed_area(*this, t);
  return s;
}

bool Mesh::has_phase(Phase p) const {
  return std::any_of(triangles.begin(), triangles.end(),
                     [p](const Triangle& t) { return t.phase == p; });
}

namespace {

// Refined grid coordinates plus, for every refined interval, the layout interval it
// came from.
struct Axis {
  std::vector<double> coords;
  std::vector<std::size_t> owner;
};

Axis refine_axis(const std::vector<double>& lines, double h) {
  Axis a;
  a.coords.push_back(lines.front());
  for (std::size_t k = 0; k + 1 < lines.size(); ++k) {
    const double len = lines[k + 1] - lines[k];
    const int n = std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
    for (int s = 1; s <= n; ++s) {
      a.coords.push_back(s == n ? lines[k + 1] : lines[k] + len * s / n);
      a.owner.push_back(k);
    }
  }
  return a;
}

void check_layout(const RectLayout& layout, double target_size) {
  if (layout.xs.size() < 2 || layout.ys.size() < 2)
    throw MeshError("layout needs at least one cell in each direction");
  if (layout.cells.size() != layout.nx() * layout.ny())
    throw MeshError("layout cell count does not match its grid lines");
  for (std::size_t k = 0; k + 1 < layout.xs.size(); ++k)
    if (!(layout.xs[k + 1] > layout.xs[k])) {
      std::ostringstream os;
      os << "layout x-interval " << k << " has non-positive width "
         << layout.xs[k + 1] - layout.xs[k];
      throw MeshError(os.str());
    }
  for (std::size_t k = 0; k + 1 < layout.ys.size(); ++k)
    if (!(layout.ys[k + 1] > layout.ys[k])) {
      std::ostringstream os;
      os << "layout y-interval " << k << " has non-positive height "
         << layout.ys[k + 1] - layout.ys[k];
      throw MeshError(os.str());
    }
  if (!(target_size > 0.0)) {
    std::ostringstream os;
    os << "target_size must be positive (got " << target_size << ")";
    throw MeshError(os.str());
  }
}

}  // namespace

Mesh mesh_from_layout(const RectLayout& layout, double target_size, bool periodic) {
  check_layout(layout, target_size);
  const Axis ax = refine_axis(layout.xs, target_size);
  const Axis ay = refine_axis(layout.ys, target_size);
  const int NX = static_cast<int>(ax.owner.size());
  const int NY = static_cast<int>(ay.owner.size());

  auto cell_phase = [&](int I, int J) { return layout.at(ax.owner[I], ay.owner[J]); };

  Mesh mesh;
  mesh.lower = {ax.coords.front(), ay.coords.front()};
  mesh.upper = {ax.coords.back(), ay.coords.back()};

  // node_at[(I, J)][phase] -> node id, -1 when that phase does not touch the point
  std::vector<std::array<int, 2>> node_at((NX + 1) * (NY + 1), {-1, -1});
  auto point = [&](int I, int J) -> std::array<int, 2>& { return node_at[J * (NX + 1) + I]; };

  for (int J = 0; J <= NY; ++J) {
    for (int I = 0; I <= NX; ++I) {
      bool present[2] = {false, false};
      for (int dj = -1; dj <= 0; ++dj)
        for (int di = -1; di <= 0; ++di) {
          const int ci = I + di, cj = J + dj;
          if (ci < 0 || cj < 0 || ci >= NX || cj >= NY) continue;
          present[static_cast<int>(cell_phase(ci, cj))] = true;
        }
      for (int p = 0; p < 2; ++p) {
        if (!present[p]) continue;
        point(I, J)[p] = static_cast<int>(mesh.nodes.size());
        mesh.nodes.push_back({ax.coords[I], ay.coords[J]});
        mesh.node_phase.push_back(static_cast<Phase>(p));
      }
    }
  }

  auto node = [&](int I, int J, Phase p) { return point(I, J)[static_cast<int>(p)]; };

  for (int J = 0; J < NY; ++J) {
    for (int I = 0; I < NX; ++I) {
      const Phase p = cell_phase(I, J);
      const int n00 = node(I, J, p), n10 = node(I + 1, J, p);
      const int n11 = node(I + 1, J + 1, p), n01 = node(I, J + 1, p);
      mesh.triangles.push_back({{n00, n10, n11}, p});
      mesh.triangles.push_back({{n00, n11, n01}, p});
    }
  }

  // Interface segments on interior lines where brick meets mortar.
  std::map<std::tuple<int, std::size_t, std::size_t>, int> line_ids;
  auto line_id = [&](int orientation, std::size_t line, std::size_t run) {
    auto key = std::make_tuple(orientation, line, run);
    auto it = line_ids.find(key);
    if (it != line_ids.end()) return it->second;
    const int id = static_cast<int>(line_ids.size());
    line_ids.emplace(key, id);
    return id;
  };
  for (int J = 0; J < NY; ++J) {
    for (int I = 1; I < NX; ++I) {
      const Phase pl = cell_phase(I - 1, J), pr = cell_phase(I, J);
      if (pl == pr) continue;
      const bool brick_left = pl == Phase::brick;
      InterfaceSegment s;
      s.side1 = {node(I, J, Phase::brick), node(I, J + 1, Phase::brick)};
      s.side2 = {node(I, J, Phase::mortar), node(I, J + 1, Phase::mortar)};
      s.normal = {brick_left ? 1.0 : -1.0, 0.0};
      s.interface_id = line_id(0, ax.owner[I], ay.owner[J]);
      mesh.interfaces.push_back(s);
    }
  }
  for (int J = 1; J < NY; ++J) {
    for (int I = 0; I < NX; ++I) {
      const Phase pb = cell_phase(I, J - 1), pt = cell_phase(I, J);
      if (pb == pt) continue;
      const bool brick_below = pb == Phase::brick;
      InterfaceSegment s;
      s.side1 = {node(I, J, Phase::brick), node(I + 1, J, Phase::brick)};
      s.side2 = {node(I, J, Phase::mortar), node(I + 1, J, Phase::mortar)};
      s.normal = {0.0, brick_below ? 1.0 : -1.0};
      s.interface_id = line_id(1, ay.owner[J], ax.owner[I]);
      mesh.interfaces.push_back(s);
    }
  }

  for (int I = 0; I < NX; ++I) {
    const Phase pb = cell_phase(I, 0), pt = cell_phase(I, NY - 1);
    mesh.boundary.push_back(
        {{node(I, 0, pb), node(I + 1, 0, pb)}, BoundaryMarker::bottom, {0.0, -1.0}});
    mesh.boundary.push_back(
        {{node(I + 1, NY, pt), node(I, NY, pt)}, BoundaryMarker::top, {0.0, 1.0}});
  }
  for (int J = 0; J < NY; ++J) {
    const Phase pl = cell_phase(0, J), pr = cell_phase(NX - 1, J);
    mesh.boundary.push_back(
        {{node(0, J + 1, pl), node(0, J, pl)}, BoundaryMarker::left, {-1.0, 0.0}});
    mesh.boundary.push_back(
        {{node(NX, J, pr), node(NX, J + 1, pr)}, BoundaryMarker::right, {1.0, 0.0}});
  }

  if (periodic) {
    auto pair_points = [&](int Im, int Jm, int Is, int Js, int axis) {
      const auto& m = point(Im, Jm);
      const auto& s = point(Is, Js);
      for (int p = 0; p < 2; ++p) {
        if ((m[p] < 0) != (s[p] < 0)) {
          std::ostringstream os;
          os << "opposite boundaries do not match: " << to_string(static_cast<Phase>(p))
             << " present at (" << ax.coords[Im] << ", " << ay.coords[Jm]
             << ") but not at its periodic image (" << ax.coords[Is] << ", " << ay.coords[Js]
             << ")";
          throw MeshError(os.str());
        }
        if (m[p] >= 0) mesh.periodic.push_back({m[p], s[p], axis});
      }
    };
    for (int J = 0; J <= NY; ++J) pair_points(0, J, NX, J, 0);
    for (int I = 0; I <= NX; ++I) pair_points(I, 0, I, NY, 1);
  }
  return mesh;
}

WallSpec WallSpec::laboratory_block() {
  WallSpec s;
  s.layers = {{Phase::brick, 0.14}, {Phase::mortar, 0.015}, {Phase::brick, 0.14}};
  s.courses = 2;
  s.course_height = 0.065;
  s.bed_joint = 0.015;
  s.target_size = 0.013;
  return s;
}

Mesh generate_wall_sample(const WallSpec& spec) {
  if (spec.layers.empty()) throw MeshError("wall spec has no layers");
  for (std::size_t k = 0; k < spec.layers.size(); ++k)
    if (!(spec.layers[k].thickness > 0.0)) {
      std::ostringstream os;
      os << "layers[" << k << "].thickness must be positive (got " << spec.layers[k].thickness
         << ")";
      throw MeshError(os.str());
    }
  if (spec.courses < 1) throw MeshError("courses must be at least 1");
  if (!(spec.course_height > 0.0)) {
    std::ostringstream os;
    os << "course_height must be positive (got " << spec.course_height << ")";
    throw MeshError(os.str());
  }
  if (!(spec.bed_joint >= 0.0)) {
    std::ostringstream os;
    os << "bed_joint must be non-negative (got " << spec.bed_joint << ")";
    throw MeshError(os.str());
  }
  if (!(spec.target_size > 0.0)) {
    std::ostringstream os;
    os << "target_size must be positive (got " << spec.target_size << ")";
    throw MeshError(os.str());
  }

  RectLayout layout;
  layout.xs.push_back(0.0);
  for (const auto& l : spec.layers) layout.xs.push_back(layout.xs.back() + l.thickness);
  std::vector<bool> row_is_joint;
  layout.ys.push_back(0.0);
  for (int c = 0; c < spec.courses; ++c) {
    if (c > 0 && spec.bed_joint > 0.0) {
      layout.ys.push_back(layout.ys.back() + spec.bed_joint);
      row_is_joint.push_back(true);
    }
    layout.ys.push_back(layout.ys.back() + spec.course_height);
    row_is_joint.push_back(false);
  }
  for (std::size_t j = 0; j < row_is_joint.size(); ++j)
    for (const auto& l : spec.layers)
      layout.cells.push_back(row_is_joint[j] ? Phase::mortar : l.phase);
  return mesh_from_layout(layout, spec.target_size, false);
}

namespace {

void check_puc(const PucSpec& s) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) {
      std::ostringstream os;
      os << name << " must be positive (got " << v << ")";
      throw MeshError(os.str());
    }
  };
  positive(s.brick_length, "brick_length");
  positive(s.brick_height, "brick_height");
  positive(s.target_size, "target_size");
  if (!(s.bed_joint >= 0.0) || !(s.bed_joint < s.brick_height)) {
    std::ostringstream os;
    os << "bed_joint must lie in [0, brick_height) (got " << s.bed_joint << ")";
    throw MeshError(os.str());
  }
  if (!(s.head_joint >= 0.0) || !(s.head_joint < s.brick_length)) {
    std::ostringstream os;
    os << "head_joint must lie in [0, brick_length) (got " << s.head_joint << ")";
    throw MeshError(os.str());
  }
}

}  // namespace

RectLayout puc_layout(const PucSpec& s) {
  check_puc(s);
  const double L = s.brick_length, H = s.brick_height, th = s.head_joint, tb = s.bed_joint;
  auto unique_lines = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
            v.end());
    return v;
  };
  RectLayout layout;
  layout.xs = unique_lines({0.0, th / 2, L / 2, L / 2 + th, L + th / 2, L + th});
  layout.ys = unique_lines({0.0, tb / 2, tb / 2 + H, 1.5 * tb + H, 1.5 * tb + 2 * H, 2 * tb + 2 * H});

  struct Box { double x0, x1, y0, y1; };
  const std::vector<Box> bricks = {
      {th / 2, L + th / 2, tb / 2, tb / 2 + H},
      {0.0, L / 2, 1.5 * tb + H, 1.5 * tb + 2 * H},
      {L / 2 + th, L + th, 1.5 * tb + H, 1.5 * tb + 2 * H},
  };
  for (std::size_t j = 0; j < layout.ny(); ++j) {
    for (std::size_t i = 0; i < layout.nx(); ++i) {
      const double cx = 0.5 * (layout.xs[i] + layout.xs[i + 1]);
      const double cy = 0.5 * (layout.ys[j] + layout.ys[j + 1]);
      const bool in_brick = std::any_of(bricks.begin(), bricks.end(), [&](const Box& b) {
        return cx > b.x0 && cx < b.x1 && cy > b.y0 && cy < b.y1;
      });
      layout.cells.push_back(in_brick ? Phase::brick : Phase::mortar);
    }
  }
  return layout;
}

Mesh generate_puc(const PucSpec& spec) {
  return mesh_from_layout(puc_layout(spec), spec.target_size, true);
}

double puc_mortar_fraction(const PucSpec& s) {
  const double L = s.brick_length, H = s.brick_height;
  return 1.0 - (L * H) / ((L + s.head_joint) * (H + s.bed_joint));
}

std::vector<std::string> validate(const Mesh& mesh) {
  std::vector<std::string> report;
  const int n = static_cast<int>(mesh.nodes.size());
  auto in_range = [n](int i) { return i >= 0 && i < n; };

  if (mesh.node_phase.size() != mesh.nodes.size())
    report.push_back("node_phase has " + std::to_string(mesh.node_phase.size()) +
                     " entries for " + std::to_string(n) + " nodes");

  std::set<std::pair<int, int>> brick_edges, mortar_edges;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (!std::all_of(tri.nodes.begin(), tri.nodes.end(), in_range)) {
      report.push_back("triangle " + std::to_string(t) + " references a missing node");
      continue;
    }
    const double a = signed_area(mesh, tri);
    if (!(a > 0.0)) {
      std::ostringstream os;
      os << "triangle " << t << " has non-positive signed area " << a;
      report.push_back(os.str());
    }
    auto& edges = tri.phase == Phase::brick ? brick_edges : mortar_edges;
    for (int k = 0; k < 3; ++k) {
      int u = tri.nodes[k], v = tri.nodes[(k + 1) % 3];
      edges.insert({std::min(u, v), std::max(u, v)});
    }
  }

  for (std::size_t s = 0; s < mesh.interfaces.size(); ++s) {
    const auto& seg = mesh.interfaces[s];
    bool ok = true;
    for (int k = 0; k < 2; ++k) ok = ok && in_range(seg.side1[k]) && in_range(seg.side2[k]);
    if (!ok) {
      report.push_back("interface " + std::to_string(s) + " references a missing node");
      continue;
    }
    for (int k = 0; k < 2; ++k) {
      const Vec2& a = mesh.nodes[seg.side1[k]];
      const Vec2& b = mesh.nodes[seg.side2[k]];
      const double d = std::hypot(a.x - b.x, a.y - b.y);
      if (!(d < 1e-12)) {
        std::ostringstream os;
        os << "interface " << s << " node pair " << k << " is not coincident (distance " << d
           << " m)";
        report.push_back(os.str());
      }
    }
    auto key = [](int u, int v) { return std::make_pair(std::min(u, v), std::max(u, v)); };
    if (!brick_edges.count(key(seg.side1[0], seg.side1[1])))
      report.push_back("interface " + std::to_string(s) +
                       " side 1 is not an edge of a brick triangle");
    if (!mortar_edges.count(key(seg.side2[0], seg.side2[1])))
      report.push_back("interface " + std::to_string(s) +
                       " side 2 is not an edge of a mortar triangle");
  }

  for (std::size_t e = 0; e < mesh.boundary.size(); ++e) {
    const auto& be = mesh.boundary[e];
    if (!in_range(be.nodes[0]) || !in_range(be.nodes[1]))
      report.push_back("boundary edge " + std::to_string(e) + " references a missing node");
  }

  const Vec2 period = mesh.period();
  for (std::size_t p = 0; p < mesh.periodic.size(); ++p) {
    const auto& pr = mesh.periodic[p];
    if (!in_range(pr.master) || !in_range(pr.slave)) {
      report.push_back("periodic pair " + std::to_string(p) + " references a missing node");
      continue;
    }
    const Vec2& m = mesh.nodes[pr.master];
    const Vec2& s = mesh.nodes[pr.slave];
    const double dx = s.x - m.x, dy = s.y - m.y;
    const double ex = pr.axis == 0 ? dx - period.x : dx;
    const double ey = pr.axis == 1 ? dy - period.y : dy;
    if (std::abs(ex) > 1e-10 || std::abs(ey) > 1e-10) {
      std::ostringstream os;
      os << "periodic pair " << p << " (master " << pr.master << ", slave " << pr.slave
         << ", axis " << pr.axis << ") coordinate mismatch dx=" << ex << " dy=" << ey << " m";
      report.push_back(os.str());
    }
    if (pr.master < static_cast<int>(mesh.node_phase.size()) &&
        pr.slave < static_cast<int>(mesh.node_phase.size()) &&
        mesh.node_phase[pr.master] != mesh.node_phase[pr.slave])
      report.push_back("periodic pair " + std::to_string(p) + " joins different phases");
  }
  return report;
}

Mesh rotate_quarter_turn(const Mesh& mesh) {
  Mesh r = mesh;
  const double H = mesh.upper.y;
  for (auto& p : r.nodes) {
    const Vec2 old = p;
    p = {H - old.y, old.x - mesh.lower.x};
  }
  r.lower = {H - mesh.upper.y, 0.0};
  r.upper = {H - mesh.lower.y, mesh.upper.x - mesh.lower.x};
  auto rot = [](Vec2 v) { return Vec2{-v.y, v.x}; };
  for (auto& s : r.interfaces) s.normal = rot(s.normal);
  for (auto& b : r.boundary) {
    b.normal = rot(b.normal);
    switch (b.marker) {
      case BoundaryMarker::left: b.marker = BoundaryMarker::bottom; break;
      case BoundaryMarker::right: b.marker = BoundaryMarker::top; break;
      case BoundaryMarker::bottom: b.marker = BoundaryMarker::right; break;
      case BoundaryMarker::top: b.marker = BoundaryMarker::left; break;
    }
  }
  for (auto& pr : r.periodic) {
    if (pr.axis == 0) {
      pr.axis = 1;
    } else {
      pr.axis = 0;
      std::swap(pr.master, pr.slave);
    }
  }
  return r;
}

std::vector<int> corner_nodes(const Mesh& mesh) {
  std::vector<int> out;
  const double tol = 1e-12 * std::max(1.0, std::abs(mesh.upper.x) + std::abs(mesh.upper.y));
  for (int i = 0; i < static_cast<int>(mesh.nodes.size()); ++i) {
    const Vec2& p = mesh.nodes[i];
    const bool on_x = std::abs(p.x - mesh.lower.x) < tol || std::abs(p.x - mesh.upper.x) < tol;
    const bool on_y = std::abs(p.y - mesh.lower.y) < tol || std::abs(p.y - mesh.upper.y) < tol;
    if (on_x && on_y) out.push_back(i);
  }
  return out;
}

std::vector<int> boundary_nodes(const Mesh& mesh, BoundaryMarker marker) {
  std::set<int> s;
  for (const auto& e : mesh.boundary)
    if (e.marker == marker) s.insert(e.nodes.begin(), e.nodes.end());
  return {s.begin(), s.end()};
}

}  // namespace hygro
