#pragma once

// Coupled heat and moisture finite-element system on linear triangles with
// zero-thickness interface elements.
//
// Unknowns are nodal temperature theta (C) and relative humidity phi. The residual
// is the discrete out-of-balance flux
//
//   R_i = sum_e |e| B_i^T k(u_e) grad u_e + interface terms + capacity terms - sources
//
// where k is the 2x2 field-coupling transport tensor at the element centroid.

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "hygro/dofmap.hpp"
#include "hygro/kernels.hpp"
#include "hygro/material.hpp"
#include "hygro/mesh.hpp"

namespace hygro {

inline constexpr double kPhiMin = 1.0e-6;
inline constexpr double kPhiMax = 1.0;

struct NodalState {
  std::vector<double> theta;
  std::vector<double> phi;
  double time = 0.0;

  static NodalState uniform(std::size_t nodes, double theta, double phi, double time = 0.0);
  std::size_t size() const { return theta.size(); }
  std::vector<double>& field(Field f) { return f == Field::theta ? theta : phi; }
  const std::vector<double>& field(Field f) const { return f == Field::theta ? theta : phi; }
};

struct MaterialSet {
  PhaseModel brick = KunzelPhase{identified_brick()};
  PhaseModel mortar = KunzelPhase{identified_mortar()};
  InterfaceParams interface;
  PhysicalConstants constants;
  Coupling coupling = Coupling::full;

  const PhaseModel& phase(Phase p) const { return p == Phase::brick ? brick : mortar; }
  void validate() const;
};

/// Time-dependent essential condition on every node carrying `marker`.
struct BoundaryLoad {
  BoundaryMarker marker = BoundaryMarker::left;
  Field field = Field::theta;
  std::function<double(double)> value;
};

struct NodeFix {
  int node = 0;
  Field field = Field::theta;
  double value = 0.0;
};

using SourceFunction = std::function<std::array<double, 2>(const Vec2&)>;

struct Problem {
  const Mesh* mesh = nullptr;
  MaterialSet materials;
  std::vector<BoundaryLoad> boundary_loads;
  std::vector<NodeFix> fixed;
  /// Extra equality constraints (periodicity). Perfect-contact ties across interface
  /// segments are added automatically when materials.interface.perfect is set.
  std::vector<Tie> ties;
  /// A frozen field keeps every nodal value it has on entry.
  std::array<bool, 2> frozen{false, false};
  /// Volumetric sources for the energy (W m^-3) and moisture (kg m^-3 s^-1) balances.
  SourceFunction source;
};

/// Backward-Euler time term: capacities at the new state times (u - u_prev) / dt.
struct TimeTerm {
  const NodalState* previous = nullptr;
  double dt = 0.0;
};

/// Element-level contribution; local DOF order is field * 3 + vertex.
struct ElementContribution {
  Eigen::Matrix<double, 6, 1> residual;
  Eigen::Matrix<double, 6, 6> jacobian;  // consistent, including d k / d u
  Eigen::Matrix<double, 6, 6> secant;    // |e| B^T k B with k frozen
  Eigen::Matrix2d k;                     // transport tensor at the centroid
  double area = 0.0;
};

/// Consistent element matrices for one triangle. Throws SolverError for a
/// zero-area triangle.
ElementContribution element_tangent(const std::array<Vec2, 3>& vertices,
                                    const std::array<PointState, 3>& states,
                                    const PhaseModel& model, const PhysicalConstants& constants,
                                    Coupling coupling);

/// Interface element; local node order [side1 a, side1 b, side2 a, side2 b], local DOF
/// index field * 4 + node.
struct InterfaceContribution {
  Eigen::Matrix<double, 8, 1> residual;
  Eigen::Matrix<double, 8, 8> jacobian;
  Eigen::Matrix<double, 8, 8> secant;  // exact linear representation in the side jumps
};

/// Throws StepRejected when phi <= 0 on either side (singular Kelvin derivative).
InterfaceContribution interface_tangent(const std::array<Vec2, 2>& segment,
                                        const std::array<PointState, 4>& states,
                                        const InterfaceParams& ip,
                                        const PhysicalConstants& constants);

/// Reduced Newton system in the jump basis. Equations joined by imperfect interface
/// segments form groups; a group's representative row is the summed balance of all its
/// members (interface fluxes cancel there exactly and are never added), and each other
/// member row is that member's own balance. The matching unknowns are the
/// representative value and each member's offset from it, so a stiff interface only
/// enters the offset rows.
struct Assembly {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> jacobian;
  std::array<double, 2> gross{0.0, 0.0};  // norm of absolute element contributions per field
  Eigen::VectorXd row_scale;  // sum of absolute contributions per row (roundoff scale)
};

/// Unreduced residual and Jacobian, DOF index = field * nodes + node.
struct FullAssembly {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> jacobian;
  std::array<double, 2> gross{0.0, 0.0};
};

/// Secant operator blocks evaluated at a converged state, volume averaged over the
/// mesh, in the reduced (constrained) unknowns. Gradient components are ordered
/// (theta,x), (theta,y), (phi,x), (phi,y).
///
/// With u = affine background (gradient G) + fluctuation u*, the secant balance reads
/// K u* + R G = 0 and the averaged flux is <q> = -(K^m G + L u*).
struct CoupledTangent {
  Eigen::SparseMatrix<double> K;
  int n_theta = 0;
  int n_phi = 0;
  Eigen::VectorXd c_theta;  // lumped dH/dtheta per theta equation
  Eigen::VectorXd c_phi;    // lumped dw/dphi per phi equation
  Eigen::Matrix<double, 4, Eigen::Dynamic> L;  // flux per unit fluctuation
  Eigen::Matrix<double, Eigen::Dynamic, 4> R;  // residual per unit macroscopic gradient
  Eigen::Matrix4d Km;
  double volume = 0.0;

  Eigen::SparseMatrix<double> block(Field row, Field col) const;
};

struct IterationRecord {
  int iteration = 0;
  double residual_theta = 0.0;
  double residual_phi = 0.0;
  double time = 0.0;
  double dt = 0.0;
  int clamp_events = 0;
};

struct NewtonOptions {
  double tol = 1.0e-8;
  int max_iter = 25;
  std::function<void(const IterationRecord&)> observer;
};

struct NewtonReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // combined scaled norm per evaluation
  int clamp_events = 0;
};

struct StepReport {
  int substeps = 0;
  int halvings = 0;
  int max_newton_iterations = 0;
  int clamp_events = 0;
};

class CoupledSystem {
 public:
  explicit CoupledSystem(Problem problem);

  const Problem& problem() const { return problem_; }
  const Mesh& mesh() const { return *problem_.mesh; }
  const DofMap& dofs() const { return dofs_; }
  const kernels::TriangleGeometry& geometry() const { return geometry_; }

  /// Writes essential values at time t and propagates ties so the state is admissible.
  void apply_constraints(NodalState& state, double t) const;

  Assembly assemble(const NodalState& state, const TimeTerm* time = nullptr) const;
  FullAssembly assemble_full(const NodalState& state, const TimeTerm* time = nullptr) const;
  CoupledTangent secant_tangent(const NodalState& state) const;

  /// Adds a reduced increment (jump basis, see Assembly) to the state; tied nodes move
  /// with their class.
  void update(NodalState& state, const Eigen::VectorXd& delta) const;

  /// Sum of the unconstrained residual over the nodes on `marker`, per field. At a
  /// converged steady state this is the net flux entering the domain through that
  /// boundary (per unit depth).
  std::array<double, 2> boundary_flux(const NodalState& state, BoundaryMarker marker) const;

  /// Volume-averaged transport flux -<k grad u> per field over the continuum.
  Eigen::Vector4d average_flux(const NodalState& state) const;

  /// Volume average of grad u (continuum part) and the jump correction from interfaces.
  Eigen::Vector4d average_gradient(const NodalState& state, bool include_jumps) const;

 private:
  std::array<std::vector<char>, 2> fixed_flags() const;
  template <class Sink>
  void assemble_into(const NodalState& state, const TimeTerm* time, Sink& sink) const;

  Problem problem_;
  DofMap dofs_;
  std::vector<Tie> all_ties_;
  std::vector<int> jump_rep_;  // representative equation of each equation's group
  kernels::TriangleGeometry geometry_;
};

/// Newton-Raphson on the reduced system. The state must satisfy the constraints
/// (see CoupledSystem::apply_constraints). Throws SolverError with the residual history
/// when it does not converge within max_iter; StepRejected on non-finite residuals.
NewtonReport newton_solve(const CoupledSystem& system, NodalState& state,
                          const NewtonOptions& options = {}, const TimeTerm* time = nullptr);

/// One fully implicit backward-Euler step from state_n to state_n.time + dt, with
/// essential values evaluated at the new time. A failed Newton solve is retried on two
/// half steps, up to five nested halvings.
NodalState step_transient(const CoupledSystem& system, const NodalState& state_n, double dt,
                          const NewtonOptions& options = {}, StepReport* report = nullptr);

/// Clamps phi into [kPhiMin, kPhiMax]; returns the number of clamped nodes.
int clamp_phi(NodalState& state);

/// Sparse LU with row equilibration. Throws SolverError on breakdown.
class SparseSolver {
 public:
  explicit SparseSolver(const Eigen::SparseMatrix<double>& A);
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

 private:
  Eigen::VectorXd row_scale_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace hygro
