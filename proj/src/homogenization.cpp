#include "hygro/homogenization.hpp"

#include <cmath>
#include <sstream>

#include "hygro/errors.hpp"
#include "hygro/parallel.hpp"

namespace hygro {

const char* to_string(FluctuationBc bc) {
  return bc == FluctuationBc::dirichlet ? "dirichlet" : "periodic";
}

FluctuationBc parse_fluctuation_bc(const std::string& s) {
  if (s == "dirichlet") return FluctuationBc::dirichlet;
  if (s == "periodic") return FluctuationBc::periodic;
  throw ConfigError("unknown boundary condition kind '" + s + "' (expected dirichlet|periodic)");
}

void MacroLoadCase::validate(const Mesh& mesh) const {
  auto fail = [](const std::string& what, double v) {
    std::ostringstream os;
    os << "load case: " << what << " (got " << v << ")";
    throw ConfigError(os.str());
  };
  if (!(Phi0 > 0.0 && Phi0 <= 1.0)) fail("Phi0 must lie in (0, 1]", Phi0);
  if (!std::isfinite(Theta0)) fail("Theta0 must be finite", Theta0);
  for (double g : {grad_theta.x, grad_theta.y, grad_phi.x, grad_phi.y})
    if (!std::isfinite(g)) fail("gradients must be finite", g);
  const Vec2 p = reference(mesh);
  const double tol = 1e-12 * std::max(mesh.period().x, mesh.period().y);
  if (p.x < mesh.lower.x - tol || p.x > mesh.upper.x + tol) fail("x0.x outside the cell", p.x);
  if (p.y < mesh.lower.y - tol || p.y > mesh.upper.y + tol) fail("x0.y outside the cell", p.y);
  // Affine background extremes sit at the cell corners.
  for (double x : {mesh.lower.x, mesh.upper.x})
    for (double y : {mesh.lower.y, mesh.upper.y}) {
      const double phi = Phi0 + grad_phi.x * (x - p.x) + grad_phi.y * (y - p.y);
      if (!(phi > 0.0 && phi <= 1.0)) {
        std::ostringstream os;
        os << "load case: background phi leaves (0, 1] at cell corner (" << x << ", " << y
           << "): Phi0 and grad_phi are incompatible with the cell size (got " << phi << ")";
        throw ConfigError(os.str());
      }
    }
  if (bc == FluctuationBc::periodic && mesh.periodic.empty())
    throw ConfigError("periodic fluctuation conditions requested on a mesh without periodic pairs");
}

Vec2 MacroLoadCase::reference(const Mesh& mesh) const {
  if (x0) return *x0;
  return {0.5 * (mesh.lower.x + mesh.upper.x), 0.5 * (mesh.lower.y + mesh.upper.y)};
}

Eigen::Vector4d MacroLoadCase::gradient() const {
  return {grad_theta.x, grad_theta.y, grad_phi.x, grad_phi.y};
}

NodalState background_state(const Mesh& mesh, const MacroLoadCase& lc) {
  const Vec2 x0 = lc.reference(mesh);
  NodalState s = NodalState::uniform(mesh.node_count(), lc.Theta0, lc.Phi0);
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    const double dx = mesh.nodes[n].x - x0.x, dy = mesh.nodes[n].y - x0.y;
    s.theta[n] += lc.grad_theta.x * dx + lc.grad_theta.y * dy;
    s.phi[n] += lc.grad_phi.x * dx + lc.grad_phi.y * dy;
  }
  return s;
}

Problem macro_problem(const Mesh& mesh, const MaterialSet& materials, const MacroLoadCase& lc,
                      const HomogenizationOptions& options) {
  lc.validate(mesh);
  Problem p;
  p.mesh = &mesh;
  p.materials = materials;
  p.frozen = {false, options.thermal_only};
  const NodalState bg = background_state(mesh, lc);

  auto pin = [&](int n) {
    p.fixed.push_back({n, Field::theta, bg.theta[n]});
    if (!options.thermal_only) p.fixed.push_back({n, Field::phi, bg.phi[n]});
  };
  if (lc.bc == FluctuationBc::dirichlet) {
    std::vector<char> seen(mesh.node_count(), 0);
    for (const auto& e : mesh.boundary)
      for (int n : e.nodes)
        if (!seen[n]) {
          seen[n] = 1;
          pin(n);
        }
  } else {
    for (const auto& pp : mesh.periodic) {
      const double dx = mesh.nodes[pp.slave].x - mesh.nodes[pp.master].x;
      const double dy = mesh.nodes[pp.slave].y - mesh.nodes[pp.master].y;
      p.ties.push_back({pp.master, pp.slave,
                        {lc.grad_theta.x * dx + lc.grad_theta.y * dy,
                         lc.grad_phi.x * dx + lc.grad_phi.y * dy}});
    }
    for (int n : corner_nodes(mesh)) pin(n);
  }
  return p;
}

FluctuationSolution solve_fluctuations(const Mesh& mesh, const MacroLoadCase& lc,
                                       const MaterialSet& materials,
                                       const HomogenizationOptions& options) {
  const CoupledSystem system(macro_problem(mesh, materials, lc, options));
  const NodalState bg = background_state(mesh, lc);
  FluctuationSolution sol;
  sol.total = bg;
  system.apply_constraints(sol.total, 0.0);
  sol.newton = newton_solve(system, sol.total, options.newton);
  sol.fluctuation = sol.total;
  for (std::size_t n = 0; n < mesh.node_count(); ++n) {
    sol.fluctuation.theta[n] -= bg.theta[n];
    sol.fluctuation.phi[n] -= bg.phi[n];
  }
  sol.mean_fluctuation_gradient = system.average_gradient(sol.fluctuation, true);
  return sol;
}

double hill_mandel_residual(const Eigen::Vector4d& average_flux,
                            const Eigen::Vector4d& condensed_flux) {
  double worst = 0.0;
  for (int f = 0; f < 2; ++f) {
    const Eigen::Vector2d a = average_flux.segment<2>(2 * f);
    const Eigen::Vector2d c = condensed_flux.segment<2>(2 * f);
    const double scale = std::max(a.norm(), c.norm());
    if (scale == 0.0) continue;
    worst = std::max(worst, (a - c).norm() / scale);
  }
  return worst;
}

MacroConductivity condense(const Mesh& mesh, const MacroLoadCase& lc,
                           const MaterialSet& materials, const FluctuationSolution& solution,
                           const HomogenizationOptions& options) {
  const CoupledSystem system(macro_problem(mesh, materials, lc, options));
  const CoupledTangent T = system.secant_tangent(solution.total);

  MacroConductivity out;
  out.local = T.Km;
  out.macro = T.Km;
  if (T.K.rows() > 0) {
    const SparseSolver solver(T.K);
    const Eigen::MatrixXd X = solver.solve(T.R);
    if (!X.allFinite())
      throw SolverError("singular fluctuation operator: check pinning and boundary conditions");
    out.macro -= T.L * X;
  }
  out.gradient = lc.gradient();
  out.average_flux = system.average_flux(solution.total);
  out.condensed_flux = -out.macro * out.gradient;
  out.hill_mandel_residual = hill_mandel_residual(out.average_flux, out.condensed_flux);
  out.mean_fluctuation_gradient = solution.mean_fluctuation_gradient;
  out.newton = solution.newton;
  out.load = lc;
  return out;
}

MacroConductivity homogenize(const Mesh& mesh, const MacroLoadCase& lc,
                             const MaterialSet& materials, const HomogenizationOptions& options) {
  const FluctuationSolution sol = solve_fluctuations(mesh, lc, materials, options);
  return condense(mesh, lc, materials, sol, options);
}

std::vector<SweepRow> sweep(const Mesh& mesh, const std::vector<MacroLoadCase>& cases,
                            const std::vector<InterfaceParams>& interfaces,
                            const MaterialSet& materials, const HomogenizationOptions& options,
                            int jobs) {
  if (cases.empty()) throw ConfigError("sweep: no load cases");
  if (interfaces.empty()) throw ConfigError("sweep: no interface parameter sets");
  std::vector<SweepRow> rows(cases.size() * interfaces.size());
  for (std::size_t c = 0; c < cases.size(); ++c)
    for (std::size_t i = 0; i < interfaces.size(); ++i) {
      SweepRow& r = rows[c * interfaces.size() + i];
      r.case_index = c;
      r.interface_index = i;
      r.load = cases[c];
      r.interface = interfaces[i];
    }
  parallel_for(rows.size(), jobs, [&](std::size_t k) {
    SweepRow& r = rows[k];
    try {
      MaterialSet m = materials;
      m.interface = r.interface;
      r.result = homogenize(mesh, r.load, m, options);
    } catch (const std::exception& e) {
      r.status = e.what();
    }
  });
  return rows;
}

Mesh generate_laminate(double brick_width, double mortar_width, double height,
                       double target_size) {
  RectLayout layout;
  layout.xs = {0.0, 0.5 * mortar_width, 0.5 * mortar_width + brick_width,
               mortar_width + brick_width};
  layout.ys = {0.0, height};
  layout.cells = {Phase::mortar, Phase::brick, Phase::mortar};
  return mesh_from_layout(layout, target_size, true);
}

}  // namespace hygro
