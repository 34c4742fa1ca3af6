#pragma once

// Structured triangulations of axis-aligned brick/mortar layouts with
// zero-thickness interface segments along every brick-mortar line.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace hygro {

enum class Phase : std::uint8_t { brick = 0, mortar = 1 };

enum class BoundaryMarker : std::uint8_t { left = 0, right = 1, bottom = 2, top = 3 };

const char* to_string(Phase p);
const char* to_string(BoundaryMarker m);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }

struct Triangle {
  std::array<int, 3> nodes{};
  Phase phase = Phase::brick;
};

/// Four-node zero-thickness element. side1 lies in the brick, side2 in the mortar;
/// side1[k] and side2[k] are geometrically coincident.
struct InterfaceSegment {
  std::array<int, 2> side1{};
  std::array<int, 2> side2{};
  int interface_id = 0;
  Vec2 normal;  // unit normal pointing from side 1 (brick) into side 2 (mortar)
};

struct BoundaryEdge {
  std::array<int, 2> nodes{};
  BoundaryMarker marker = BoundaryMarker::left;
  Vec2 normal;  // outward unit normal
};

/// Slave node equals master node translated by one cell period along `axis`.
struct PeriodicPair {
  int master = 0;
  int slave = 0;
  int axis = 0;  // 0: x, 1: y
};

struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<Phase> node_phase;  // phase of the material copy each node belongs to
  std::vector<Triangle> triangles;
  std::vector<InterfaceSegment> interfaces;
  std::vector<BoundaryEdge> boundary;
  std::vector<PeriodicPair> periodic;
  Vec2 lower;   // bounding box
  Vec2 upper;

  std::size_t node_count() const { return nodes.size(); }
  Vec2 period() const { return {upper.x - lower.x, upper.y - lower.y}; }
  double area() const;
  double phase_area(Phase p) const;
  bool has_phase(Phase p) const;
};

double signed_area(const Mesh& mesh, const Triangle& t);

/// Axis-aligned rectangular layout: grid lines xs, ys and one phase per cell
/// (row-major, cell (i, j) at index j * (xs.size() - 1) + i).
struct RectLayout {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<Phase> cells;

  std::size_t nx() const { return xs.empty() ? 0 : xs.size() - 1; }
  std::size_t ny() const { return ys.empty() ? 0 : ys.size() - 1; }
  Phase at(std::size_t i, std::size_t j) const { return cells[j * nx() + i]; }
};

/// Triangulates `layout`, splitting each interval into ceil(length / target_size)
/// equal parts. Nodes on brick-mortar lines are duplicated (one copy per phase) and
/// joined by interface segments. With `periodic` set, opposite boundary nodes are
/// paired; the call throws MeshError when the faces do not match.
Mesh mesh_from_layout(const RectLayout& layout, double target_size, bool periodic);

struct WallLayer {
  Phase phase = Phase::brick;
  double thickness = 0.0;  // m, along x (through the wall)
};

/// Wall sample cross-section. x runs from the interior face (left) to the exterior
/// face (right); courses are stacked along y and separated by mortar bed joints.
struct WallSpec {
  std::vector<WallLayer> layers;
  int courses = 1;
  double course_height = 0.0;  // m
  double bed_joint = 0.0;      // m, 0 disables bed joints
  double target_size = 0.0;    // m

  /// Default block: brick | head joint | brick through the thickness, two courses.
  static WallSpec laboratory_block();
};

Mesh generate_wall_sample(const WallSpec& spec);

enum class Bond { running };

struct PucSpec {
  double brick_length = 0.29;  // m
  double brick_height = 0.065; // m
  double bed_joint = 0.012;    // m
  double head_joint = 0.012;   // m
  double target_size = 0.01;   // m
  Bond bond = Bond::running;
};

/// Running-bond periodic unit cell: two courses, second course shifted by half a brick.
/// Width = brick_length + head_joint, height = 2 (brick_height + bed_joint).
RectLayout puc_layout(const PucSpec& spec);
Mesh generate_puc(const PucSpec& spec);

/// Analytic mortar area fraction of the running-bond cell.
double puc_mortar_fraction(const PucSpec& spec);

/// Returns one line per violated invariant; an empty report means the mesh is valid.
std::vector<std::string> validate(const Mesh& mesh);

/// Rotates the mesh by +90 degrees about the origin and shifts it back into the
/// positive quadrant. Markers, normals and periodic pairs are carried along.
Mesh rotate_quarter_turn(const Mesh& mesh);

/// Nodes that sit on a corner of the bounding box.
std::vector<int> corner_nodes(const Mesh& mesh);

/// Nodes with at least one boundary edge carrying `marker`.
std::vector<int> boundary_nodes(const Mesh& mesh, BoundaryMarker marker);

}  // namespace hygro
