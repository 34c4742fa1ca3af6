#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hygro/errors.hpp"
#include "hygro/experiment.hpp"
#include "hygro/fem.hpp"

using namespace hygro;

namespace {

Mesh bar(double l1, double l2, double height, double h) {
  RectLayout layout;
  layout.xs = {0.0, l1, l1 + l2};
  layout.ys = {0.0, height};
  layout.cells = {Phase::brick, Phase::mortar};
  return mesh_from_layout(layout, h, false);
}

ConstantPhase conductor(double k) {
  ConstantPhase c;
  c.k = {{{k, 0.0}, {0.0, 1e-3}}};
  return c;
}

// Steady temperature with fixed faces and phi frozen.
NodalState solve_bar(const Mesh& m, MaterialSet mats, double tl, double tr) {
  Problem p;
  p.mesh = &m;
  p.materials = std::move(mats);
  p.frozen = {false, true};
  p.boundary_loads.push_back({BoundaryMarker::left, Field::theta, [=](double) { return tl; }});
  p.boundary_loads.push_back({BoundaryMarker::right, Field::theta, [=](double) { return tr; }});
  const CoupledSystem sys(p);
  NodalState s = NodalState::uniform(m.node_count(), 0.0, 0.5);
  sys.apply_constraints(s, 0.0);
  newton_solve(sys, s, {1e-13, 20, {}});
  return s;
}

}  // namespace

TEST_CASE("unit right triangle gives the classical conduction stiffness") {
  ConstantPhase c;
  c.k = {{{1.0, 0.0}, {0.0, 1.0}}};
  const std::array<PointState, 3> st{{{0.0, 0.5}, {0.0, 0.5}, {0.0, 0.5}}};
  const auto e = element_tangent({Vec2{0, 0}, Vec2{1, 0}, Vec2{0, 1}}, st, c, PhysicalConstants{},
                                 Coupling::decoupled);
  const double K[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(e.secant(i, j) == doctest::Approx(K[i][j]).epsilon(1e-15));
      CHECK(e.secant(i, 3 + j) == 0.0);
    }
  CHECK(e.area == doctest::Approx(0.5));
}

TEST_CASE("element Jacobian matches finite differences of the residual") {
  const std::array<Vec2, 3> v{Vec2{0.0, 0.0}, Vec2{0.04, 0.005}, Vec2{0.01, 0.03}};
  std::array<PointState, 3> st{{{18.0, 0.55}, {22.0, 0.72}, {15.0, 0.61}}};
  const PhaseModel model = KunzelPhase{identified_brick()};
  const PhysicalConstants c;
  const auto e = element_tangent(v, st, model, c, Coupling::full);
  for (int col = 0; col < 6; ++col) {
    const int f = col / 3, n = col % 3;
    const double h = f == 0 ? 1e-5 : 1e-7;
    auto plus = st, minus = st;
    (f == 0 ? plus[n].theta : plus[n].phi) += h;
    (f == 0 ? minus[n].theta : minus[n].phi) -= h;
    const auto rp = element_tangent(v, plus, model, c, Coupling::full).residual;
    const auto rm = element_tangent(v, minus, model, c, Coupling::full).residual;
    const Eigen::Matrix<double, 6, 1> fdcol = (rp - rm) / (2.0 * h);
    for (int row = 0; row < 6; ++row)
      CHECK(e.jacobian(row, col) ==
            doctest::Approx(fdcol(row)).epsilon(1e-6).scale(e.jacobian.col(col).cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("interface element: antisymmetry, secant identity and tangent") {
  const std::array<Vec2, 2> seg{Vec2{0.1, 0.0}, Vec2{0.1, 0.02}};
  const std::array<PointState, 4> st{{{20.0, 0.5}, {21.0, 0.55}, {19.5, 0.6}, {20.2, 0.52}}};
  const InterfaceParams ip;
  const PhysicalConstants c;
  const auto ie = interface_tangent(seg, st, ip, c);
  // Whatever leaves side 1 enters side 2.
  CHECK(ie.residual.segment<2>(0).sum() + ie.residual.segment<2>(2).sum() ==
        doctest::Approx(0.0).scale(ie.residual.segment<4>(0).cwiseAbs().sum()));
  CHECK(ie.residual.segment<2>(4).sum() + ie.residual.segment<2>(6).sum() ==
        doctest::Approx(0.0).scale(ie.residual.segment<4>(4).cwiseAbs().sum()));

  Eigen::Matrix<double, 8, 1> u;
  for (int k = 0; k < 4; ++k) {
    u(k) = st[k].theta;
    u(4 + k) = st[k].phi;
  }
  const Eigen::Matrix<double, 8, 1> su = ie.secant * u;
  for (int r = 0; r < 8; ++r)
    CHECK(su(r) == doctest::Approx(ie.residual(r)).epsilon(1e-9).scale(ie.residual.cwiseAbs().maxCoeff()));

  for (int col = 0; col < 8; ++col) {
    const int f = col / 4, n = col % 4;
    const double h = f == 0 ? 1e-5 : 1e-7;
    auto plus = st, minus = st;
    (f == 0 ? plus[n].theta : plus[n].phi) += h;
    (f == 0 ? minus[n].theta : minus[n].phi) -= h;
    const auto fdcol = ((interface_tangent(seg, plus, ip, c).residual -
                         interface_tangent(seg, minus, ip, c).residual) /
                        (2.0 * h))
                           .eval();
    for (int r = 0; r < 8; ++r)
      CHECK(ie.jacobian(r, col) ==
            doctest::Approx(fdcol(r)).epsilon(1e-6).scale(fdcol.cwiseAbs().maxCoeff() + 1e-300));
  }

  auto dry = st;
  dry[2].phi = 0.0;
  dry[3].phi = 0.0;
  CHECK_THROWS_AS(interface_tangent(seg, dry, ip, c), StepRejected);
}

TEST_CASE("global Jacobian matches finite differences, time term included") {
  const Mesh m = generate_wall_sample([] {
    WallSpec s = WallSpec::laboratory_block();
    s.target_size = 0.04;
    return s;
  }());
  Problem p;
  p.mesh = &m;
  const CoupledSystem sys(p);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  NodalState prev = NodalState::uniform(m.node_count(), 15.0, 0.6);
  NodalState s = prev;
  for (std::size_t n = 0; n < m.node_count(); ++n) {
    s.theta[n] += 3.0 * U(rng);
    s.phi[n] += 0.1 * U(rng);
  }
  const TimeTerm tt{&prev, 600.0};
  const FullAssembly a = sys.assemble_full(s, &tt);
  const Eigen::MatrixXd J(a.jacobian);
  const std::size_t N = m.node_count();
  for (std::size_t col : {std::size_t{0}, N / 3, N - 1, N + 2, N + N / 2, 2 * N - 1}) {
    const bool th = col < N;
    const std::size_t n = th ? col : col - N;
    const double h = th ? 1e-5 : 1e-7;
    NodalState sp = s, sm = s;
    (th ? sp.theta : sp.phi)[n] += h;
    (th ? sm.theta : sm.phi)[n] -= h;
    const Eigen::VectorXd fdcol =
        (sys.assemble_full(sp, &tt).residual - sys.assemble_full(sm, &tt).residual) / (2.0 * h);
    const double scale = fdcol.cwiseAbs().maxCoeff();
    CHECK((J.col(col) - fdcol).cwiseAbs().maxCoeff() <= 1e-6 * scale);
  }
}

TEST_CASE("assembly does not depend on the triangle order") {
  Mesh m = generate_wall_sample(WallSpec::laboratory_block());
  NodalState s = NodalState::uniform(m.node_count(), 10.0, 0.7);
  for (std::size_t n = 0; n < m.node_count(); ++n) s.theta[n] += 30.0 * m.nodes[n].x;
  Problem p;
  p.mesh = &m;
  const FullAssembly a = CoupledSystem(p).assemble_full(s);
  Mesh shuffled = m;
  std::mt19937_64 rng(11);
  std::shuffle(shuffled.triangles.begin(), shuffled.triangles.end(), rng);
  std::shuffle(shuffled.interfaces.begin(), shuffled.interfaces.end(), rng);
  Problem q = p;
  q.mesh = &shuffled;
  const FullAssembly b = CoupledSystem(q).assemble_full(s);
  const Eigen::MatrixXd d = Eigen::MatrixXd(a.jacobian) - Eigen::MatrixXd(b.jacobian);
  CHECK(d.cwiseAbs().maxCoeff() <= 1e-12 * Eigen::MatrixXd(a.jacobian).cwiseAbs().maxCoeff());
  CHECK((a.residual - b.residual).cwiseAbs().maxCoeff() <= 1e-12 * a.residual.cwiseAbs().maxCoeff());
}

TEST_CASE("two-material bar: series resistance flux and contact jump") {
  const Mesh m = bar(0.05, 0.05, 0.01, 0.0025);
  MaterialSet mats;
  mats.brick = conductor(0.25);
  mats.mortar = conductor(0.45);
  mats.interface.alpha_int = 1e5;
  const NodalState s = solve_bar(m, mats, 24.5, -9.5);
  Problem p;
  p.mesh = &m;
  p.materials = mats;
  p.frozen = {false, true};
  const CoupledSystem sys(p);
  const double q = sys.boundary_flux(s, BoundaryMarker::left)[0] / 0.01;
  const double oracle = 34.0 / (0.05 / 0.25 + 1.0 / 1e5 + 0.05 / 0.45);
  CHECK(q == doctest::Approx(oracle).epsilon(1e-8));
  for (const auto& seg : m.interfaces)
    CHECK(s.theta[seg.side1[0]] - s.theta[seg.side2[0]] == doctest::Approx(oracle / 1e5).epsilon(1e-6));
}

TEST_CASE("stiff contact converges to the tied solution") {
  const Mesh m = bar(0.05, 0.05, 0.01, 0.0025);
  MaterialSet mats;
  mats.brick = conductor(0.25);
  mats.mortar = conductor(0.45);
  mats.interface.perfect = true;
  const NodalState tied = solve_bar(m, mats, 24.5, -9.5);
  double prev = 1e300;
  for (double a : {1e4, 1e6, 1e8, 1e10, 1e12}) {
    mats.interface.perfect = false;
    mats.interface.alpha_int = a;
    const NodalState s = solve_bar(m, mats, 24.5, -9.5);
    double d = 0.0;
    for (std::size_t n = 0; n < m.node_count(); ++n)
      d = std::max(d, std::abs(s.theta[n] - tied.theta[n]));
    CHECK(d < prev);
    prev = d;
  }
  CHECK(prev / 34.0 <= 1e-6);
}

TEST_CASE("steady coupled solve conserves energy and moisture") {
  WallSpec ws = WallSpec::laboratory_block();
  const Mesh m = generate_wall_sample(ws);
  Problem p = experiment_problem(m, ClimateSeries::constant(86400.0, 24.5, 0.6, -9.5, 0.8),
                                 MaterialSet{});
  const CoupledSystem sys(p);
  NodalState s = NodalState::uniform(m.node_count(), 8.0, 0.7);
  sys.apply_constraints(s, 0.0);
  newton_solve(sys, s, {1e-12, 30, {}});
  const auto l = sys.boundary_flux(s, BoundaryMarker::left);
  const auto r = sys.boundary_flux(s, BoundaryMarker::right);
  const auto a = sys.assemble_full(s);
  for (int f = 0; f < 2; ++f) {
    CHECK(std::abs(l[f]) > 0.0);
    CHECK(std::abs(l[f] + r[f]) <= 1e-9 * a.gross[f]);
  }
}

TEST_CASE("transient conduction matches the Fourier series at mid-depth") {
  // Slab [0, 1] initially at 0 with both faces stepped to 1; kappa = 1.
  RectLayout layout;
  layout.xs = {0.0, 1.0};
  layout.ys = {0.0, 0.05};
  layout.cells = {Phase::brick};
  const Mesh m = mesh_from_layout(layout, 1.0 / 64.0, false);
  ConstantPhase c;
  c.k = {{{1.0, 0.0}, {0.0, 1.0}}};
  c.c_theta = 1.0;
  Problem p;
  p.mesh = &m;
  p.materials.brick = c;
  p.materials.mortar = c;
  p.frozen = {false, true};
  for (auto mk : {BoundaryMarker::left, BoundaryMarker::right})
    p.boundary_loads.push_back({mk, Field::theta, [](double) { return 1.0; }});
  const CoupledSystem sys(p);
  NodalState s = NodalState::uniform(m.node_count(), 0.0, 0.5);
  sys.apply_constraints(s, 0.0);
  const double t_end = 0.05, dt = t_end / 400.0;
  for (int k = 0; k < 400; ++k) s = step_transient(sys, s, dt, {1e-12, 10, {}});
  double series = 0.0;
  for (int n = 0; n < 50; ++n) {
    const double k = 2 * n + 1;
    series += (n % 2 ? -1.0 : 1.0) / k * std::exp(-k * k * M_PI * M_PI * t_end);
  }
  const double oracle = 1.0 - 4.0 / M_PI * series;
  double mid = 0.0;
  int count = 0;
  for (std::size_t n = 0; n < m.node_count(); ++n)
    if (std::abs(m.nodes[n].x - 0.5) < 1e-12) {
      mid += s.theta[n];
      ++count;
    }
  REQUIRE(count > 0);
  CHECK(mid / count == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("Newton failure reports the residual history") {
  const Mesh m = bar(0.05, 0.05, 0.01, 0.005);
  Problem p;
  p.mesh = &m;
  p.boundary_loads.push_back({BoundaryMarker::left, Field::theta, [](double) { return 30.0; }});
  p.boundary_loads.push_back({BoundaryMarker::right, Field::phi, [](double) { return 0.9; }});
  const CoupledSystem sys(p);
  NodalState s = NodalState::uniform(m.node_count(), 0.0, 0.3);
  sys.apply_constraints(s, 0.0);
  try {
    newton_solve(sys, s, {1e-14, 1, {}});
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual_history().size() >= 2);
  }
}

TEST_CASE("phi clamping") {
  NodalState s = NodalState::uniform(4, 20.0, 0.5);
  s.phi[1] = -0.2;
  s.phi[3] = 1.3;
  CHECK(clamp_phi(s) == 2);
  CHECK(s.phi[1] == kPhiMin);
  CHECK(s.phi[3] == kPhiMax);
  CHECK(s.phi[0] == 0.5);
}
