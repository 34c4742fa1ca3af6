#include "hygro/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hygro/errors.hpp"

namespace hygro {

NodalState NodalState::uniform(std::size_t nodes, double theta, double phi, double time) {
  NodalState s;
  s.theta.assign(nodes, theta);
  s.phi.assign(nodes, phi);
  s.time = time;
  return s;
}

void MaterialSet::validate() const {
  for (const PhaseModel* m : {&brick, &mortar})
    if (const auto* k = std::get_if<KunzelPhase>(m)) k->params.validate();
  interface.validate();
  constants.validate();
}

int clamp_phi(NodalState& state) {
  int events = 0;
  for (double& p : state.phi) {
    if (p < kPhiMin) {
      p = kPhiMin;
      ++events;
    } else if (p > kPhiMax) {
      p = kPhiMax;
      ++events;
    }
  }
  return events;
}

namespace {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector8 = Eigen::Matrix<double, 8, 1>;
using Matrix8 = Eigen::Matrix<double, 8, 8>;

struct ElementInput {
  double area = 0.0;
  std::array<double, 3> dx{}, dy{};
  double theta_c = 0.0, phi_c = 0.0;
  std::array<std::array<double, 2>, 2> grad{};  // grad[field][dir]
  // sum_j |dN_j/dx_dir| |u_j|: roundoff scale of grad; zero disables the row scale.
  std::array<std::array<double, 2>, 2> grad_scale{};
};

// Continuum element: residual, consistent Jacobian and (optionally) the secant matrix.
void continuum_element(const ElementInput& in, const PhaseModel& model,
                       const PhysicalConstants& c, Coupling coupling, Vector6& r, Matrix6& J,
                       Matrix6* secant, Eigen::Matrix2d* k_out, Vector6* scale = nullptr) {
  using D = Dual<2>;
  const auto resp =
      evaluate_phase(model, D::variable(in.theta_c, 0), D::variable(in.phi_c, 1), c, coupling);

  double flux[2][2];  // k grad u, per field and direction
  for (int a = 0; a < 2; ++a)
    for (int d = 0; d < 2; ++d)
      flux[a][d] = resp.k[a][0].v * in.grad[0][d] + resp.k[a][1].v * in.grad[1][d];

  double bb[3][3];
  double bg[3][2];  // B_i . grad u_b
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) bb[i][j] = in.dx[i] * in.dx[j] + in.dy[i] * in.dy[j];
    for (int b = 0; b < 2; ++b) bg[i][b] = in.dx[i] * in.grad[b][0] + in.dy[i] * in.grad[b][1];
  }

  for (int a = 0; a < 2; ++a) {
    for (int i = 0; i < 3; ++i) {
      r(a * 3 + i) = in.area * (in.dx[i] * flux[a][0] + in.dy[i] * flux[a][1]);
      for (int cf = 0; cf < 2; ++cf) {
        double dk = 0.0;
        for (int b = 0; b < 2; ++b) dk += resp.k[a][b].d[cf] * bg[i][b];
        for (int j = 0; j < 3; ++j) {
          const double sec = in.area * resp.k[a][cf].v * bb[i][j];
          J(a * 3 + i, cf * 3 + j) = sec + in.area * dk / 3.0;
          if (secant) (*secant)(a * 3 + i, cf * 3 + j) = sec;
        }
      }
    }
  }
  if (k_out)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) (*k_out)(a, b) = resp.k[a][b].v;
  if (scale)
    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < 3; ++i) {
        double v = 0.0;
        for (int b = 0; b < 2; ++b)
          v += std::abs(resp.k[a][b].v) * (std::abs(in.dx[i]) * in.grad_scale[b][0] +
                                           std::abs(in.dy[i]) * in.grad_scale[b][1]);
        (*scale)(a * 3 + i) = in.area * v;
      }
}

ElementInput element_input(double area, const std::array<double, 3>& dx,
                           const std::array<double, 3>& dy,
                           const std::array<PointState, 3>& states) {
  ElementInput in;
  in.area = area;
  in.dx = dx;
  in.dy = dy;
  for (int i = 0; i < 3; ++i) {
    in.theta_c += states[i].theta / 3.0;
    in.phi_c += states[i].phi / 3.0;
  }
  for (int d = 0; d < 2; ++d) {
    const auto& g = d == 0 ? dx : dy;
    in.grad[0][d] = g[0] * states[0].theta + g[1] * states[1].theta + g[2] * states[2].theta;
    in.grad[1][d] = g[0] * states[0].phi + g[1] * states[1].phi + g[2] * states[2].phi;
  }
  return in;
}

constexpr double kGauss = 0.57735026918962576451;  // 1 / sqrt(3)

// Interface element with 2-point Gauss integration along the segment.
void interface_element(double length, const std::array<PointState, 4>& st,
                       const InterfaceParams& ip, const PhysicalConstants& c, Vector8& r,
                       Matrix8& J, Matrix8* secant, Vector8* scale = nullptr) {
  using D = Dual<4>;
  r.setZero();
  J.setZero();
  if (secant) secant->setZero();
  if (scale) scale->setZero();
  const double w = 0.5 * length;
  const double kelvin = c.water_density * c.gas_constant / c.molar_mass_water;
  for (const double s : {-kGauss, kGauss}) {
    const double N[4] = {0.5 * (1 - s), 0.5 * (1 + s), 0.5 * (1 - s), 0.5 * (1 + s)};
    const double sign[4] = {1.0, 1.0, -1.0, -1.0};
    const double th1 = N[0] * st[0].theta + N[1] * st[1].theta;
    const double ph1 = N[0] * st[0].phi + N[1] * st[1].phi;
    const double th2 = N[2] * st[2].theta + N[3] * st[3].theta;
    const double ph2 = N[2] * st[2].phi + N[3] * st[3].phi;
    if (!(ph1 > 0.0) || !(ph2 > 0.0)) {
      std::ostringstream os;
      os << "interface relative humidity " << std::min(ph1, ph2)
         << " <= 0: Kelvin derivative is singular";
      throw StepRejected(os.str());
    }
    const D t1 = D::variable(th1, 0), p1 = D::variable(ph1, 1);
    const D t2 = D::variable(th2, 2), p2 = D::variable(ph2, 3);
    // Outflow from side 1 (heat, liquid water).
    const D q = ip.alpha_int * (t1 - t2);
    const D m = ip.beta_int * (closure::capillary_pressure(t2, p2, c) -
                               closure::capillary_pressure(t1, p1, c));

    // Secant coefficients: m = a_theta (th1 - th2) + a_phi (ph1 - ph2), exactly.
    const double dphi = ph2 - ph1;
    const double slope = std::abs(dphi) > 1e-12 * ph1 ? std::log1p(dphi / ph1) / dphi
                                                      : (1.0 - 0.5 * dphi / ph1) / ph1;
    const double a_phi = ip.beta_int * kelvin * (th1 + kKelvinOffset) * slope;
    const double a_theta = ip.beta_int * kelvin * std::log(ph2);

    // Size of the cancelling halves of each flux; the jump rows cannot be resolved
    // below this.
    const double q_scale = ip.alpha_int * (std::abs(th1) + std::abs(th2));
    const double m_scale = ip.beta_int * kelvin * (th1 + th2 + 2.0 * kKelvinOffset) *
                           (1.0 + std::abs(std::log(ph1)) + std::abs(std::log(ph2)));
    for (int L = 0; L < 4; ++L) {
      const double wl = sign[L] * w * N[L];
      r(L) += wl * q.v;
      r(4 + L) += wl * m.v;
      if (scale) {
        (*scale)(L) += w * N[L] * q_scale;
        (*scale)(4 + L) += w * N[L] * m_scale;
      }
      for (int M = 0; M < 4; ++M) {
        const int side = M < 2 ? 0 : 1;
        const double nm = N[M];
        J(L, M) += wl * q.d[side * 2 + 0] * nm;
        J(L, 4 + M) += wl * q.d[side * 2 + 1] * nm;
        J(4 + L, M) += wl * m.d[side * 2 + 0] * nm;
        J(4 + L, 4 + M) += wl * m.d[side * 2 + 1] * nm;
        if (secant) {
          const double sgn = side == 0 ? 1.0 : -1.0;
          (*secant)(L, M) += wl * sgn * ip.alpha_int * nm;
          (*secant)(4 + L, M) += wl * sgn * a_theta * nm;
          (*secant)(4 + L, 4 + M) += wl * sgn * a_phi * nm;
        }
      }
    }
  }
}

}  // namespace

ElementContribution element_tangent(const std::array<Vec2, 3>& v,
                                    const std::array<PointState, 3>& states,
                                    const PhaseModel& model, const PhysicalConstants& constants,
                                    Coupling coupling) {
  const double twice = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y);
  if (!(std::abs(twice) > 0.0)) throw SolverError("zero-area triangle in element_tangent");
  const std::array<double, 3> dx{(v[1].y - v[2].y) / twice, (v[2].y - v[0].y) / twice,
                                 (v[0].y - v[1].y) / twice};
  const std::array<double, 3> dy{(v[2].x - v[1].x) / twice, (v[0].x - v[2].x) / twice,
                                 (v[1].x - v[0].x) / twice};
  ElementContribution out;
  out.area = 0.5 * twice;
  const ElementInput in = element_input(out.area, dx, dy, states);
  continuum_element(in, model, constants, coupling, out.residual, out.jacobian, &out.secant,
                    &out.k);
  return out;
}

InterfaceContribution interface_tangent(const std::array<Vec2, 2>& segment,
                                        const std::array<PointState, 4>& states,
                                        const InterfaceParams& ip,
                                        const PhysicalConstants& constants) {
  if (ip.perfect)
    throw ParameterError("interface_tangent called for a perfect-contact interface");
  InterfaceContribution out;
  const double len = std::hypot(segment[1].x - segment[0].x, segment[1].y - segment[0].y);
  interface_element(len, states, ip, constants, out.residual, out.jacobian, &out.secant);
  return out;
}

Eigen::SparseMatrix<double> CoupledTangent::block(Field row, Field col) const {
  const int r0 = row == Field::theta ? 0 : n_theta;
  const int c0 = col == Field::theta ? 0 : n_theta;
  const int nr = row == Field::theta ? n_theta : n_phi;
  const int nc = col == Field::theta ? n_theta : n_phi;
  return K.block(r0, c0, nr, nc);
}

// ---------------------------------------------------------------------------

CoupledSystem::CoupledSystem(Problem problem) : problem_(std::move(problem)) {
  if (!problem_.mesh) throw ConfigError("problem has no mesh");
  problem_.materials.validate();
  const Mesh& mesh = *problem_.mesh;

  const std::size_t ne = mesh.triangles.size();
  std::array<std::vector<double>, 3> x, y;
  for (int k = 0; k < 3; ++k) {
    x[k].resize(ne);
    y[k].resize(ne);
  }
  for (std::size_t e = 0; e < ne; ++e)
    for (int k = 0; k < 3; ++k) {
      const Vec2& p = mesh.nodes[mesh.triangles[e].nodes[k]];
      x[k][e] = p.x;
      y[k][e] = p.y;
    }
  geometry_ = kernels::compute_geometry({x[0], x[1], x[2]}, {y[0], y[1], y[2]});
  for (std::size_t e = 0; e < ne; ++e)
    if (!(geometry_.area[e] > 0.0)) {
      std::ostringstream os;
      os << "triangle " << e << " has non-positive area " << geometry_.area[e];
      throw SolverError(os.str());
    }

  all_ties_ = problem_.ties;
  if (problem_.materials.interface.perfect)
    for (const auto& s : mesh.interfaces)
      for (int k = 0; k < 2; ++k) all_ties_.push_back({s.side1[k], s.side2[k], {0.0, 0.0}});
  dofs_ = DofMap(mesh.node_count(), all_ties_, fixed_flags());

  // Equations joined by imperfect interface segments form groups; the smallest
  // equation of each group is its representative.
  jump_rep_.resize(static_cast<std::size_t>(dofs_.size()));
  std::iota(jump_rep_.begin(), jump_rep_.end(), 0);
  if (!problem_.materials.interface.perfect) {
    std::function<int(int)> find = [&](int e) {
      while (jump_rep_[e] != e) e = jump_rep_[e] = jump_rep_[jump_rep_[e]];
      return e;
    };
    for (const auto& s : mesh.interfaces)
      for (int k = 0; k < 2; ++k)
        for (int f = 0; f < 2; ++f) {
          const int a = dofs_.equation(s.side1[k], static_cast<Field>(f));
          const int b = dofs_.equation(s.side2[k], static_cast<Field>(f));
          if (a < 0 || b < 0) continue;
          const int ra = find(a), rb = find(b);
          if (ra != rb) jump_rep_[std::max(ra, rb)] = std::min(ra, rb);
        }
    for (int e = 0; e < dofs_.size(); ++e) jump_rep_[e] = find(e);
  }
}

std::array<std::vector<char>, 2> CoupledSystem::fixed_flags() const {
  const Mesh& mesh = *problem_.mesh;
  std::array<std::vector<char>, 2> fixed;
  for (int f = 0; f < 2; ++f) fixed[f].assign(mesh.node_count(), problem_.frozen[f] ? 1 : 0);
  for (const auto& load : problem_.boundary_loads)
    for (int n : boundary_nodes(mesh, load.marker)) fixed[static_cast<int>(load.field)][n] = 1;
  for (const auto& fx : problem_.fixed) {
    if (fx.node < 0 || fx.node >= static_cast<int>(mesh.node_count()))
      throw ConfigError("fixed node index " + std::to_string(fx.node) + " out of range");
    fixed[static_cast<int>(fx.field)][fx.node] = 1;
  }
  return fixed;
}

void CoupledSystem::apply_constraints(NodalState& state, double t) const {
  const Mesh& mesh = *problem_.mesh;
  const std::size_t nn = mesh.node_count();
  if (state.size() != nn || state.phi.size() != nn) {
    std::ostringstream os;
    os << "state has " << state.size() << " nodes, mesh has " << nn;
    throw ConfigError(os.str());
  }
  for (int f = 0; f < 2; ++f) {
    if (problem_.frozen[f]) continue;
    const Field field = static_cast<Field>(f);
    auto& u = state.field(field);
    std::vector<double> root_value(nn, std::nan(""));
    auto fix = [&](int n, double v) {
      const int r = dofs_.root(n);
      if (std::isnan(root_value[r])) root_value[r] = v - dofs_.offset(n)[f];
    };
    for (const auto& load : problem_.boundary_loads) {
      if (load.field != field) continue;
      const double v = load.value(t);
      for (int n : boundary_nodes(mesh, load.marker)) fix(n, v);
    }
    for (const auto& fx : problem_.fixed)
      if (fx.field == field) fix(fx.node, fx.value);
    for (std::size_t n = 0; n < nn; ++n) {
      const int r = dofs_.root(static_cast<int>(n));
      const double base = std::isnan(root_value[r]) ? u[r] : root_value[r];
      u[n] = base + dofs_.offset(static_cast<int>(n))[f];
    }
  }
}

namespace {

// Sinks receive contributions at the (node, field) level. Interface terms carry the
// partner node (the coincident copy on the other side) so the reduced sink can drop
// the pairs that cancel exactly in a group's summed balance.
struct FullSink {
  std::size_t nodes;
  Eigen::VectorXd r;
  Eigen::VectorXd abs;
  std::vector<Eigen::Triplet<double>> trip;
  explicit FullSink(std::size_t n) : nodes(n), r(Eigen::VectorXd::Zero(2 * n)), abs(Eigen::VectorXd::Zero(2 * n)) {}
  int index(int node, int field) const { return field * static_cast<int>(nodes) + node; }
  void residual(int node, int field, double v) {
    r(index(node, field)) += v;
    abs(index(node, field)) += std::abs(v);
  }
  void jacobian(int node, int field, int col_node, int col_field, double v) {
    trip.emplace_back(index(node, field), index(col_node, col_field), v);
  }
  void scale(int node, int field, double v) { abs(index(node, field)) += v; }
  void interface_residual(int node, int, int field, double v) { residual(node, field, v); }
  void interface_jacobian(int node, int, int field, int col_node, int col_field, double v) {
    jacobian(node, field, col_node, col_field, v);
  }
  void interface_scale(int node, int, int field, double v) { scale(node, field, v); }
};

// Reduced sink in the jump basis: for every group of equations joined by interface
// segments, the representative row holds the summed balance of the group and every
// other member row holds its own balance; unknowns are the representative value and
// the member offsets from it. See CoupledSystem::jump_rep_.
struct ReducedSink {
  const DofMap& dofs;
  const std::vector<int>& rep;
  Eigen::VectorXd r;
  Eigen::VectorXd abs;  // roundoff scale per reduced row
  std::vector<Eigen::Triplet<double>> trip;
  ReducedSink(const DofMap& d, const std::vector<int>& rep_of)
      : dofs(d), rep(rep_of), r(Eigen::VectorXd::Zero(d.size())), abs(Eigen::VectorXd::Zero(d.size())) {}

  int eq(int node, int field) const { return dofs.equation(node, static_cast<Field>(field)); }

  template <class Fn>
  void rows(int e, Fn&& fn) const {
    fn(e);
    if (rep[e] != e) fn(rep[e]);
  }
  // Rows receiving an interface term of `node` whose coincident copy is `partner`.
  template <class Fn>
  void interface_rows(int e, int partner_eq, Fn&& fn) const {
    if (partner_eq == e) return;             // both copies share the unknown
    if (rep[e] != e) fn(e);                  // member row: own balance
    if (partner_eq < 0) fn(rep[e]);          // partner fixed: no cancellation in the sum
  }
  void add_entry(int row, int c, double v) {
    trip.emplace_back(row, c, v);
    if (rep[c] != c) trip.emplace_back(row, rep[c], v);
  }

  void residual(int node, int field, double v) {
    const int e = eq(node, field);
    if (e < 0) return;
    rows(e, [&](int row) {
      r(row) += v;
      abs(row) += std::abs(v);
    });
  }
  void scale(int node, int field, double v) {
    const int e = eq(node, field);
    if (e >= 0) rows(e, [&](int row) { abs(row) += v; });
  }
  void jacobian(int node, int field, int col_node, int col_field, double v) {
    const int e = eq(node, field), c = eq(col_node, col_field);
    if (e < 0 || c < 0) return;
    rows(e, [&](int row) { add_entry(row, c, v); });
  }
  void interface_residual(int node, int partner, int field, double v) {
    const int e = eq(node, field);
    if (e < 0) return;
    interface_rows(e, eq(partner, field), [&](int row) {
      r(row) += v;
      abs(row) += std::abs(v);
    });
  }
  void interface_scale(int node, int partner, int field, double v) {
    const int e = eq(node, field);
    if (e >= 0) interface_rows(e, eq(partner, field), [&](int row) { abs(row) += v; });
  }
  void interface_jacobian(int node, int partner, int field, int col_node, int col_field,
                          double v) {
    const int e = eq(node, field), c = eq(col_node, col_field);
    if (e < 0 || c < 0) return;
    interface_rows(e, eq(partner, field), [&](int row) { add_entry(row, c, v); });
  }
};

std::array<double, 2> field_norms(const Eigen::VectorXd& abs, Eigen::Index split) {
  return {abs.head(split).norm(), abs.tail(abs.size() - split).norm()};
}

}  // namespace

template <class Sink>
void CoupledSystem::assemble_into(const NodalState& state, const TimeTerm* time,
                                  Sink& sink) const {
  const Mesh& mesh = *problem_.mesh;
  const MaterialSet& mat = problem_.materials;
  const std::size_t ne = mesh.triangles.size();
  const auto& K = kernels::active();

  // Gather vertex values (SoA) and run the batched gradient/centroid kernels.
  std::array<std::vector<double>, 3> th, ph;
  for (int k = 0; k < 3; ++k) {
    th[k].resize(ne);
    ph[k].resize(ne);
  }
  for (std::size_t e = 0; e < ne; ++e)
    for (int k = 0; k < 3; ++k) {
      const int n = mesh.triangles[e].nodes[k];
      th[k][e] = state.theta[n];
      ph[k][e] = state.phi[n];
    }
  std::vector<double> gtx(ne), gty(ne), gpx(ne), gpy(ne), tc(ne), pc(ne);
  K.gradient(geometry_.dx(), geometry_.dy(), {th[0], th[1], th[2]}, gtx, gty);
  K.gradient(geometry_.dx(), geometry_.dy(), {ph[0], ph[1], ph[2]}, gpx, gpy);
  K.centroid({th[0], th[1], th[2]}, tc);
  K.centroid({ph[0], ph[1], ph[2]}, pc);

  Vector6 r;
  Matrix6 J;
  // Roundoff scale per element row: flux term plus both halves of the time term.
  Vector6 time_scale;
  for (std::size_t e = 0; e < ne; ++e) {
    const Triangle& tri = mesh.triangles[e];
    const PhaseModel& model = mat.phase(tri.phase);
    time_scale.setZero();
    ElementInput in;
    in.area = geometry_.area[e];
    for (int k = 0; k < 3; ++k) {
      in.dx[k] = geometry_.dndx[k][e];
      in.dy[k] = geometry_.dndy[k][e];
    }
    in.theta_c = tc[e];
    in.phi_c = pc[e];
    in.grad = {{{gtx[e], gty[e]}, {gpx[e], gpy[e]}}};
    for (int k = 0; k < 3; ++k) {
      const double ax = std::abs(in.dx[k]), ay = std::abs(in.dy[k]);
      in.grad_scale[0][0] += ax * std::abs(th[k][e]);
      in.grad_scale[0][1] += ay * std::abs(th[k][e]);
      in.grad_scale[1][0] += ax * std::abs(ph[k][e]);
      in.grad_scale[1][1] += ay * std::abs(ph[k][e]);
    }
    continuum_element(in, model, mat.constants, mat.coupling, r, J, nullptr, nullptr,
                      &time_scale);

    if (time) {
      const double m = in.area / 3.0;
      for (int i = 0; i < 3; ++i) {
        const int n = tri.nodes[i];
        using D = Dual<2>;
        const auto cap = evaluate_capacity(model, D::variable(state.phi[n], 1), mat.constants);
        const double du[2] = {state.theta[n] - time->previous->theta[n],
                              state.phi[n] - time->previous->phi[n]};
        for (int a = 0; a < 2; ++a) {
          r(a * 3 + i) += m * cap[a].v * du[a] / time->dt;
          const double u_new = a == 0 ? state.theta[n] : state.phi[n];
          const double u_old = a == 0 ? time->previous->theta[n] : time->previous->phi[n];
          time_scale(a * 3 + i) += m * std::abs(cap[a].v) * (std::abs(u_new) + std::abs(u_old)) / time->dt;
          J(a * 3 + i, a * 3 + i) += m * cap[a].v / time->dt;
          for (int cf = 0; cf < 2; ++cf)
            J(a * 3 + i, cf * 3 + i) += m * cap[a].d[cf] * du[a] / time->dt;
        }
      }
    }
    if (problem_.source) {
      std::array<std::array<double, 2>, 3> fm;  // source at edge midpoints (k, k+1)
      for (int k = 0; k < 3; ++k) {
        const Vec2& a = mesh.nodes[tri.nodes[k]];
        const Vec2& b = mesh.nodes[tri.nodes[(k + 1) % 3]];
        fm[k] = problem_.source({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
      }
      for (int i = 0; i < 3; ++i)
        for (int a = 0; a < 2; ++a) {
          // N_i = 1/2 on the two edges touching vertex i, 0 on the opposite one.
          const double fi = 0.5 * (fm[i][a] + fm[(i + 2) % 3][a]);
          r(a * 3 + i) -= in.area / 3.0 * fi;
        }
    }

    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < 3; ++i) {
        sink.residual(tri.nodes[i], a, r(a * 3 + i));
        sink.scale(tri.nodes[i], a, time_scale(a * 3 + i));
        for (int cf = 0; cf < 2; ++cf)
          for (int j = 0; j < 3; ++j)
            sink.jacobian(tri.nodes[i], a, tri.nodes[j], cf, J(a * 3 + i, cf * 3 + j));
      }
  }

  if (!mat.interface.perfect) {
    Vector8 ri, si;
    Matrix8 Ji;
    for (const auto& seg : mesh.interfaces) {
      const std::array<int, 4> nodes{seg.side1[0], seg.side1[1], seg.side2[0], seg.side2[1]};
      std::array<PointState, 4> st;
      for (int L = 0; L < 4; ++L) st[L] = {state.theta[nodes[L]], state.phi[nodes[L]]};
      const Vec2& a = mesh.nodes[nodes[0]];
      const Vec2& b = mesh.nodes[nodes[1]];
      interface_element(std::hypot(b.x - a.x, b.y - a.y), st, mat.interface, mat.constants, ri,
                        Ji, nullptr, &si);
      for (int f = 0; f < 2; ++f)
        for (int L = 0; L < 4; ++L) {
          const int partner = nodes[(L + 2) % 4];
          sink.interface_residual(nodes[L], partner, f, ri(f * 4 + L));
          sink.interface_scale(nodes[L], partner, f, si(f * 4 + L));
          for (int g = 0; g < 2; ++g)
            for (int M = 0; M < 4; ++M)
              sink.interface_jacobian(nodes[L], partner, f, nodes[M], g, Ji(f * 4 + L, g * 4 + M));
        }
    }
  }
}

Assembly CoupledSystem::assemble(const NodalState& state, const TimeTerm* time) const {
  ReducedSink sink(dofs_, jump_rep_);
  assemble_into(state, time, sink);
  Assembly out;
  out.residual = std::move(sink.r);
  out.jacobian.resize(dofs_.size(), dofs_.size());
  out.jacobian.setFromTriplets(sink.trip.begin(), sink.trip.end());
  out.gross = field_norms(sink.abs, dofs_.count(Field::theta));
  out.row_scale = std::move(sink.abs);
  return out;
}

FullAssembly CoupledSystem::assemble_full(const NodalState& state, const TimeTerm* time) const {
  FullSink sink(mesh().node_count());
  assemble_into(state, time, sink);
  FullAssembly out;
  out.residual = std::move(sink.r);
  const auto n = static_cast<Eigen::Index>(2 * mesh().node_count());
  out.jacobian.resize(n, n);
  out.jacobian.setFromTriplets(sink.trip.begin(), sink.trip.end());
  out.gross = field_norms(sink.abs, static_cast<Eigen::Index>(mesh().node_count()));
  return out;
}

CoupledTangent CoupledSystem::secant_tangent(const NodalState& state) const {
  const Mesh& mesh = *problem_.mesh;
  const MaterialSet& mat = problem_.materials;
  CoupledTangent T;
  T.n_theta = dofs_.count(Field::theta);
  T.n_phi = dofs_.count(Field::phi);
  const int n = dofs_.size();
  T.c_theta = Eigen::VectorXd::Zero(T.n_theta);
  T.c_phi = Eigen::VectorXd::Zero(T.n_phi);
  T.L = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, n);
  T.R = Eigen::Matrix<double, Eigen::Dynamic, 4>::Zero(n, 4);
  T.Km.setZero();
  T.volume = 0.0;
  for (double a : geometry_.area) T.volume += a;
  const double inv_vol = 1.0 / T.volume;

  std::vector<Eigen::Triplet<double>> trip;
  Vector6 r;
  Matrix6 J, S;
  Eigen::Matrix2d k;
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const Triangle& tri = mesh.triangles[e];
    std::array<PointState, 3> st;
    for (int i = 0; i < 3; ++i) st[i] = {state.theta[tri.nodes[i]], state.phi[tri.nodes[i]]};
    std::array<double, 3> dx, dy;
    for (int i = 0; i < 3; ++i) {
      dx[i] = geometry_.dndx[i][e];
      dy[i] = geometry_.dndy[i][e];
    }
    const ElementInput in = element_input(geometry_.area[e], dx, dy, st);
    const PhaseModel& model = mat.phase(tri.phase);
    continuum_element(in, model, mat.constants, mat.coupling, r, J, &S, &k);

    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int d = 0; d < 2; ++d) T.Km(2 * a + d, 2 * b + d) += in.area * k(a, b) * inv_vol;

    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < 3; ++i) {
        const int row = dofs_.equation(tri.nodes[i], static_cast<Field>(a));
        if (row < 0) continue;
        for (int cf = 0; cf < 2; ++cf)
          for (int j = 0; j < 3; ++j) {
            const int col = dofs_.equation(tri.nodes[j], static_cast<Field>(cf));
            if (col >= 0) trip.emplace_back(row, col, S(a * 3 + i, cf * 3 + j) * inv_vol);
          }
        // L((b, d), (i, a)) = <k_{b a} dN_i/dx_d>
        for (int b = 0; b < 2; ++b) {
          T.L(2 * b + 0, row) += in.area * k(b, a) * dx[i] * inv_vol;
          T.L(2 * b + 1, row) += in.area * k(b, a) * dy[i] * inv_vol;
          T.R(row, 2 * b + 0) += in.area * k(a, b) * dx[i] * inv_vol;
          T.R(row, 2 * b + 1) += in.area * k(a, b) * dy[i] * inv_vol;
        }
      }

    const double m = in.area / 3.0;
    for (int i = 0; i < 3; ++i) {
      const int node = tri.nodes[i];
      const auto cap = evaluate_capacity(model, state.phi[node], mat.constants);
      const int et = dofs_.equation(node, Field::theta);
      const int ep = dofs_.equation(node, Field::phi);
      if (et >= 0) T.c_theta(et) += m * cap[0];
      if (ep >= 0) T.c_phi(ep - T.n_theta) += m * cap[1];
    }
  }

  if (!mat.interface.perfect) {
    Vector8 ri;
    Matrix8 Ji, Si;
    for (const auto& seg : mesh.interfaces) {
      const std::array<int, 4> nodes{seg.side1[0], seg.side1[1], seg.side2[0], seg.side2[1]};
      std::array<PointState, 4> st;
      for (int L = 0; L < 4; ++L) st[L] = {state.theta[nodes[L]], state.phi[nodes[L]]};
      const Vec2& a = mesh.nodes[nodes[0]];
      const Vec2& b = mesh.nodes[nodes[1]];
      interface_element(std::hypot(b.x - a.x, b.y - a.y), st, mat.interface, mat.constants, ri,
                        Ji, &Si);
      for (int f = 0; f < 2; ++f)
        for (int L = 0; L < 4; ++L) {
          const int row = dofs_.equation(nodes[L], static_cast<Field>(f));
          if (row < 0) continue;
          for (int g = 0; g < 2; ++g)
            for (int M = 0; M < 4; ++M) {
              const int col = dofs_.equation(nodes[M], static_cast<Field>(g));
              if (col >= 0) trip.emplace_back(row, col, Si(f * 4 + L, g * 4 + M) * inv_vol);
            }
        }
    }
  }
  T.K.resize(n, n);
  T.K.setFromTriplets(trip.begin(), trip.end());
  return T;
}

void CoupledSystem::update(NodalState& state, const Eigen::VectorXd& delta) const {
  for (std::size_t n = 0; n < state.size(); ++n) {
    const int et = dofs_.equation(static_cast<int>(n), Field::theta);
    const int ep = dofs_.equation(static_cast<int>(n), Field::phi);
    if (et >= 0) state.theta[n] += delta(et) + (jump_rep_[et] != et ? delta(jump_rep_[et]) : 0.0);
    if (ep >= 0) state.phi[n] += delta(ep) + (jump_rep_[ep] != ep ? delta(jump_rep_[ep]) : 0.0);
  }
}

std::array<double, 2> CoupledSystem::boundary_flux(const NodalState& state,
                                                   BoundaryMarker marker) const {
  const FullAssembly fa = assemble_full(state);
  const auto nn = static_cast<Eigen::Index>(mesh().node_count());
  std::array<double, 2> out{0.0, 0.0};
  for (int n : boundary_nodes(mesh(), marker)) {
    out[0] += fa.residual(n);
    out[1] += fa.residual(nn + n);
  }
  return out;
}

Eigen::Vector4d CoupledSystem::average_flux(const NodalState& state) const {
  const Mesh& mesh = *problem_.mesh;
  const MaterialSet& mat = problem_.materials;
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  double volume = 0.0;
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const Triangle& tri = mesh.triangles[e];
    std::array<PointState, 3> st;
    for (int i = 0; i < 3; ++i) st[i] = {state.theta[tri.nodes[i]], state.phi[tri.nodes[i]]};
    std::array<double, 3> dx, dy;
    for (int i = 0; i < 3; ++i) {
      dx[i] = geometry_.dndx[i][e];
      dy[i] = geometry_.dndy[i][e];
    }
    const ElementInput in = element_input(geometry_.area[e], dx, dy, st);
    const auto resp = evaluate_phase(mat.phase(tri.phase), in.theta_c, in.phi_c, mat.constants,
                                     mat.coupling);
    for (int a = 0; a < 2; ++a)
      for (int d = 0; d < 2; ++d)
        acc(2 * a + d) -= in.area * (resp.k[a][0] * in.grad[0][d] + resp.k[a][1] * in.grad[1][d]);
    volume += in.area;
  }
  return acc / volume;
}

Eigen::Vector4d CoupledSystem::average_gradient(const NodalState& state, bool include_jumps) const {
  const Mesh& mesh = *problem_.mesh;
  const auto& K = kernels::active();
  const std::size_t ne = mesh.triangles.size();
  std::array<std::vector<double>, 3> th, ph;
  for (int k = 0; k < 3; ++k) {
    th[k].resize(ne);
    ph[k].resize(ne);
  }
  for (std::size_t e = 0; e < ne; ++e)
    for (int k = 0; k < 3; ++k) {
      th[k][e] = state.theta[mesh.triangles[e].nodes[k]];
      ph[k][e] = state.phi[mesh.triangles[e].nodes[k]];
    }
  std::vector<double> gx(ne), gy(ne);
  Eigen::Vector4d out;
  double volume = 0.0;
  for (double a : geometry_.area) volume += a;
  K.gradient(geometry_.dx(), geometry_.dy(), {th[0], th[1], th[2]}, gx, gy);
  out(0) = K.weighted_sum(geometry_.area, gx);
  out(1) = K.weighted_sum(geometry_.area, gy);
  K.gradient(geometry_.dx(), geometry_.dy(), {ph[0], ph[1], ph[2]}, gx, gy);
  out(2) = K.weighted_sum(geometry_.area, gx);
  out(3) = K.weighted_sum(geometry_.area, gy);
  if (include_jumps) {
    for (const auto& seg : mesh.interfaces) {
      const Vec2& a = mesh.nodes[seg.side1[0]];
      const Vec2& b = mesh.nodes[seg.side1[1]];
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      for (int f = 0; f < 2; ++f) {
        const auto& u = state.field(static_cast<Field>(f));
        const double jump = 0.5 * ((u[seg.side2[0]] - u[seg.side1[0]]) +
                                   (u[seg.side2[1]] - u[seg.side1[1]]));
        out(2 * f + 0) += len * jump * seg.normal.x;
        out(2 * f + 1) += len * jump * seg.normal.y;
      }
    }
  }
  return out / volume;
}

// ---------------------------------------------------------------------------

SparseSolver::SparseSolver(const Eigen::SparseMatrix<double>& A) {
  row_scale_ = Eigen::VectorXd::Zero(A.rows());
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
      row_scale_(it.row()) = std::max(row_scale_(it.row()), std::abs(it.value()));
  for (Eigen::Index i = 0; i < row_scale_.size(); ++i) {
    if (!(row_scale_(i) > 0.0) || !std::isfinite(row_scale_(i))) {
      std::ostringstream os;
      os << "sparse LU: row " << i << " of the system matrix is empty or non-finite";
      throw SolverError(os.str());
    }
    row_scale_(i) = 1.0 / row_scale_(i);
  }
  Eigen::SparseMatrix<double> scaled = row_scale_.asDiagonal() * A;
  scaled.makeCompressed();
  lu_.analyzePattern(scaled);
  lu_.factorize(scaled);
  if (lu_.info() != Eigen::Success)
    throw SolverError("sparse LU factorization failed: " + lu_.lastErrorMessage());
}

Eigen::MatrixXd SparseSolver::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd scaled = row_scale_.asDiagonal() * rhs;
  Eigen::MatrixXd x = const_cast<decltype(lu_)&>(lu_).solve(scaled);
  return x;
}

NewtonReport newton_solve(const CoupledSystem& system, NodalState& state,
                          const NewtonOptions& options, const TimeTerm* time) {
  NewtonReport rep;
  const int nt = system.dofs().count(Field::theta);
  const int n = system.dofs().size();
  rep.clamp_events += clamp_phi(state);
  if (n == 0) {
    rep.converged = true;
    return rep;
  }

  // Residual norms per field after discounting each row's roundoff floor; a row
  // whose residual is below its floor counts as satisfied.
  auto norms = [&](const Assembly& as) -> std::array<double, 2> {
    std::array<double, 2> sq{0.0, 0.0};
    for (int i = 0; i < n; ++i) {
      const double excess = std::max(0.0, std::abs(as.residual(i)) - 1e-12 * as.row_scale(i));
      if (std::isnan(as.residual(i))) return {std::nan(""), std::nan("")};
      sq[i < nt ? 0 : 1] += excess * excess;
    }
    return {std::sqrt(sq[0]), std::sqrt(sq[1])};
  };
  Assembly as = system.assemble(state, time);
  std::array<double, 2> rn = norms(as);
  const std::array<double, 2> r0 = rn;
  auto merit = [&](const std::array<double, 2>& r) {
    double m = 0.0;
    for (int f = 0; f < 2; ++f)
      if (r0[f] > 0.0) m += (r[f] / r0[f]) * (r[f] / r0[f]);
    return std::sqrt(m);
  };

  for (int it = 0;; ++it) {
    if (!std::isfinite(rn[0]) || !std::isfinite(rn[1]))
      throw StepRejected("non-finite residual in Newton iteration " + std::to_string(it),
                         rep.residual_history);
    bool done = true;
    for (int f = 0; f < 2; ++f)
      done = done && (rn[f] == 0.0 || (it > 0 && rn[f] <= options.tol * r0[f]));
    const double m0 = merit(rn);
    rep.residual_history.push_back(m0);
    if (options.observer)
      options.observer({it, rn[0], rn[1], state.time, time ? time->dt : 0.0, rep.clamp_events});
    if (done) {
      rep.converged = true;
      rep.iterations = it;
      return rep;
    }
    if (it >= options.max_iter) {
      std::ostringstream os;
      os << "Newton did not converge in " << options.max_iter << " iterations (residual theta "
         << rn[0] << ", phi " << rn[1] << ")";
      throw SolverError(os.str(), rep.residual_history);
    }
    SparseSolver solver(as.jacobian);
    const Eigen::VectorXd delta = solver.solve(-as.residual);
    if (!delta.allFinite())
      throw StepRejected("non-finite Newton increment", rep.residual_history);

    // Backtracking on the scaled residual; the full step is taken whenever it helps,
    // so quadratic convergence near the solution is untouched.
    double tau = 1.0;
    for (int k = 0;; ++k) {
      NodalState trial = state;
      system.update(trial, tau * delta);
      const int clamped = clamp_phi(trial);
      std::optional<Assembly> ta;
      try {
        ta = system.assemble(trial, time);
      } catch (const DomainError&) {
      } catch (const StepRejected&) {
      }
      const std::array<double, 2> tr =
          ta ? norms(*ta) : std::array<double, 2>{std::nan(""), std::nan("")};
      const bool finite = std::isfinite(tr[0]) && std::isfinite(tr[1]);
      if ((finite && merit(tr) < (1.0 - 1e-4 * tau) * m0) || (finite && k >= 8)) {
        state = std::move(trial);
        as = std::move(*ta);
        rn = tr;
        rep.clamp_events += clamped;
        break;
      }
      if (k >= 8)
        throw StepRejected("line search found no admissible step in Newton iteration " +
                               std::to_string(it),
                           rep.residual_history);
      tau *= 0.5;
    }
  }
}

namespace {

NodalState attempt_step(const CoupledSystem& system, const NodalState& state_n, double dt,
                        const NewtonOptions& options, StepReport& report, int depth) {
  NodalState s = state_n;
  s.time = state_n.time + dt;
  system.apply_constraints(s, s.time);
  const TimeTerm tt{&state_n, dt};
  try {
    const NewtonReport nr = newton_solve(system, s, options, &tt);
    report.substeps += 1;
    report.max_newton_iterations = std::max(report.max_newton_iterations, nr.iterations);
    report.clamp_events += nr.clamp_events;
    return s;
  } catch (const SolverError& err) {
    if (depth >= 5) {
      std::ostringstream os;
      os << "time step failed after 5 halvings (dt = " << dt << " s at t = " << state_n.time
         << " s): " << err.what();
      throw SolverError(os.str(), err.residual_history());
    }
    report.halvings += 1;
    const NodalState half = attempt_step(system, state_n, 0.5 * dt, options, report, depth + 1);
    return attempt_step(system, half, 0.5 * dt, options, report, depth + 1);
  }
}

}  // namespace

NodalState step_transient(const CoupledSystem& system, const NodalState& state_n, double dt,
                          const NewtonOptions& options, StepReport* report) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  StepReport local;
  NodalState out = attempt_step(system, state_n, dt, options, local, 0);
  if (report) *report = local;
  return out;
}

}  // namespace hygro
