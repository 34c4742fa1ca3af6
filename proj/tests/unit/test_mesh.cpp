#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "hygro/errors.hpp"
#include "hygro/mesh.hpp"
#include "hygro/mesh_io.hpp"

using namespace hygro;

TEST_CASE("laboratory block is a valid mesh with interface segments") {
  const Mesh m = generate_wall_sample(WallSpec::laboratory_block());
  CHECK(validate(m).empty());
  CHECK(m.interfaces.size() > 0);
  CHECK(m.has_phase(Phase::brick));
  CHECK(m.has_phase(Phase::mortar));
  CHECK(m.area() == doctest::Approx((0.14 + 0.015 + 0.14) * (2 * 0.065 + 0.015)).epsilon(1e-12));
  for (const auto& s : m.interfaces)
    for (int k = 0; k < 2; ++k) {
      CHECK(m.nodes[s.side1[k]] == m.nodes[s.side2[k]]);
      CHECK(m.node_phase[s.side1[k]] == Phase::brick);
      CHECK(m.node_phase[s.side2[k]] == Phase::mortar);
    }
}

TEST_CASE("refinement by two roughly quadruples the triangle count") {
  PucSpec s;
  s.target_size = 0.01;
  const auto coarse = generate_puc(s).triangles.size();
  s.target_size = 0.005;
  const auto fine = generate_puc(s).triangles.size();
  const double ratio = static_cast<double>(fine) / coarse;
  CHECK(ratio > 3.2);
  CHECK(ratio < 4.8);
}

TEST_CASE("running-bond cell: mortar fraction and periodic pairing") {
  const PucSpec spec;
  const Mesh m = generate_puc(spec);
  CHECK(validate(m).empty());
  CHECK(m.phase_area(Phase::mortar) / m.area() ==
        doctest::Approx(puc_mortar_fraction(spec)).epsilon(0.01));
  // Analytic area fraction of the layout.
  const double w = spec.brick_length + spec.head_joint;
  const double h = 2.0 * (spec.brick_height + spec.bed_joint);
  const double brick = 2.0 * spec.brick_length * spec.brick_height;
  CHECK(puc_mortar_fraction(spec) == doctest::Approx(1.0 - brick / (w * h)).epsilon(1e-12));

  // Each slave is the exact translate of its master.
  const Vec2 p = m.period();
  std::map<int, int> slave_count;
  for (const auto& pp : m.periodic) {
    const Vec2 a = m.nodes[pp.master], b = m.nodes[pp.slave];
    if (pp.axis == 0) {
      CHECK(b.x - a.x == doctest::Approx(p.x).epsilon(1e-12));
      CHECK(b.y == doctest::Approx(a.y).epsilon(1e-12));
    } else {
      CHECK(b.y - a.y == doctest::Approx(p.y).epsilon(1e-12));
      CHECK(b.x == doctest::Approx(a.x).epsilon(1e-12));
    }
    ++slave_count[pp.slave];
  }
  const auto corners = corner_nodes(m);
  for (const auto& [node, n] : slave_count) {
    const bool corner = std::find(corners.begin(), corners.end(), node) != corners.end();
    if (!corner) CHECK(n == 1);
  }
}

TEST_CASE("a perturbed periodic partner is reported with its coordinates") {
  Mesh m = generate_puc(PucSpec{});
  REQUIRE(validate(m).empty());
  const int slave = m.periodic.front().slave;
  m.nodes[slave].y += 1e-6;
  const auto report = validate(m);
  REQUIRE_FALSE(report.empty());
  bool named = false;
  for (const auto& r : report) named = named || r.find("periodic") != std::string::npos;
  CHECK(named);
}

TEST_CASE("mesh generation errors") {
  WallSpec s = WallSpec::laboratory_block();
  s.layers.clear();
  CHECK_THROWS_AS(generate_wall_sample(s), MeshError);
  s = WallSpec::laboratory_block();
  s.target_size = 0.0;
  CHECK_THROWS_AS(generate_wall_sample(s), MeshError);
  s = WallSpec::laboratory_block();
  s.layers[1].thickness = -0.01;
  CHECK_THROWS_WITH_AS(generate_wall_sample(s), doctest::Contains("layers[1]"), MeshError);
}

TEST_CASE("quarter-turn rotation keeps the mesh valid") {
  const Mesh m = generate_puc(PucSpec{});
  const Mesh r = rotate_quarter_turn(m);
  CHECK(validate(r).empty());
  CHECK(r.area() == doctest::Approx(m.area()).epsilon(1e-12));
  CHECK(r.period().x == doctest::Approx(m.period().y).epsilon(1e-12));
  CHECK(r.periodic.size() == m.periodic.size());
}

TEST_CASE("text mesh format round-trips bit-exactly") {
  const Mesh m = generate_puc(PucSpec{});
  std::stringstream ss;
  write_mesh(ss, m);
  const Mesh back = read_mesh(ss);
  CHECK(mesh_hash(back) == mesh_hash(m));
  REQUIRE(back.node_count() == m.node_count());
  for (std::size_t n = 0; n < m.node_count(); ++n) CHECK(back.nodes[n] == m.nodes[n]);
  CHECK(back.interfaces.size() == m.interfaces.size());
  CHECK(back.periodic.size() == m.periodic.size());
  // Same spec twice gives the same bytes.
  std::stringstream a, b;
  write_mesh(a, generate_puc(PucSpec{}));
  write_mesh(b, generate_puc(PucSpec{}));
  CHECK(a.str() == b.str());
}

TEST_CASE("malformed mesh files are rejected") {
  std::stringstream bad("HYGRO_MESH\nschema_version 99\n");
  CHECK_THROWS(read_mesh(bad));
  std::stringstream truncated("HYGRO_MESH\nschema_version 1\nBOX 0 0 1 1\nNODES 3\n0 0 0 brick\n");
  CHECK_THROWS(read_mesh(truncated));
}
