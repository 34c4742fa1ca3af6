#pragma once

// First-order homogenization of a periodic unit cell. The micro fields are split
// into an affine background driven by the macroscopic state and a fluctuation,
//
//   theta(x) = Theta0 + gradTheta . (x - x0) + theta*(x)
//   phi(x)   = Phi0   + gradPhi   . (x - x0) + phi*(x),
//
// the steady fluctuation problem is solved on the cell, and the fluctuation
// unknowns are condensed out of the secant operator:
//
//   K^M = K^m - L K^-1 R.
//
// All 4-vectors and 4x4 matrices use the gradient ordering
// (theta,x), (theta,y), (phi,x), (phi,y).

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hygro/fem.hpp"
#include "hygro/mesh.hpp"

namespace hygro {

enum class FluctuationBc { dirichlet, periodic };

const char* to_string(FluctuationBc bc);
FluctuationBc parse_fluctuation_bc(const std::string& s);

struct MacroLoadCase {
  double Theta0 = 20.0;            // C
  double Phi0 = 0.5;               // -
  Vec2 grad_theta;                 // K m^-1
  Vec2 grad_phi;                   // m^-1
  std::optional<Vec2> x0;          // reference point; cell centre when empty
  FluctuationBc bc = FluctuationBc::dirichlet;

  /// Throws ConfigError naming the offending field; this includes a background phi
  /// that leaves (0, 1] somewhere in the cell.
  void validate(const Mesh& mesh) const;
  Vec2 reference(const Mesh& mesh) const;
  Eigen::Vector4d gradient() const;
};

struct HomogenizationOptions {
  NewtonOptions newton{1.0e-12, 25, {}};
  /// Freeze phi at the background field: the thermal sub-problem. Combine with
  /// Coupling::decoupled for a purely conductive cell.
  bool thermal_only = false;
};

/// Background (affine) fields evaluated at the nodes.
NodalState background_state(const Mesh& mesh, const MacroLoadCase& lc);

/// The constrained steady problem for the total field u = background + fluctuation:
/// Dirichlet fixes u = background on every boundary node; periodic ties opposite
/// nodes with the background increment across the cell and pins the corners.
/// Throws ConfigError for periodic conditions on a mesh without periodic pairs.
Problem macro_problem(const Mesh& mesh, const MaterialSet& materials, const MacroLoadCase& lc,
                      const HomogenizationOptions& options = {});

struct FluctuationSolution {
  NodalState total;
  NodalState fluctuation;
  NewtonReport newton;
  /// Volume average of the fluctuation gradient, jump terms included.
  Eigen::Vector4d mean_fluctuation_gradient = Eigen::Vector4d::Zero();
};

FluctuationSolution solve_fluctuations(const Mesh& mesh, const MacroLoadCase& lc,
                                       const MaterialSet& materials,
                                       const HomogenizationOptions& options = {});

struct MacroConductivity {
  Eigen::Matrix4d macro = Eigen::Matrix4d::Zero();  // K^M
  Eigen::Matrix4d local = Eigen::Matrix4d::Zero();  // K^m, plain volume averages
  Eigen::Vector4d gradient = Eigen::Vector4d::Zero();
  Eigen::Vector4d average_flux = Eigen::Vector4d::Zero();    // <q> from the solved fields
  Eigen::Vector4d condensed_flux = Eigen::Vector4d::Zero();  // -K^M G
  double hill_mandel_residual = 0.0;  // max over fields of the relative flux mismatch
  Eigen::Vector4d mean_fluctuation_gradient = Eigen::Vector4d::Zero();
  NewtonReport newton;
  MacroLoadCase load;

  Eigen::Matrix2d block(Field row, Field col) const {
    return macro.block<2, 2>(2 * static_cast<int>(row), 2 * static_cast<int>(col));
  }
  Eigen::Matrix2d local_block(Field row, Field col) const {
    return local.block<2, 2>(2 * static_cast<int>(row), 2 * static_cast<int>(col));
  }
};

/// Condenses the secant operator at a converged fluctuation state. Throws SolverError
/// when the inner block is singular.
MacroConductivity condense(const Mesh& mesh, const MacroLoadCase& lc,
                           const MaterialSet& materials, const FluctuationSolution& solution,
                           const HomogenizationOptions& options = {});

/// solve_fluctuations followed by condense.
MacroConductivity homogenize(const Mesh& mesh, const MacroLoadCase& lc,
                             const MaterialSet& materials,
                             const HomogenizationOptions& options = {});

/// Relative mismatch max_f |<q>_f - (-K^M G)_f| / max(|<q>_f|, |K^M G|_f).
double hill_mandel_residual(const Eigen::Vector4d& average_flux,
                            const Eigen::Vector4d& condensed_flux);

struct SweepRow {
  std::size_t case_index = 0;
  std::size_t interface_index = 0;
  MacroLoadCase load;
  InterfaceParams interface;
  std::optional<MacroConductivity> result;
  std::string status = "ok";  // "ok" or the failure message
};

/// One row per (load case x interface set), ordered case-major. Cases run on up to
/// `jobs` threads; a failing case is recorded in its row and the sweep continues.
std::vector<SweepRow> sweep(const Mesh& mesh, const std::vector<MacroLoadCase>& cases,
                            const std::vector<InterfaceParams>& interfaces,
                            const MaterialSet& materials,
                            const HomogenizationOptions& options = {}, int jobs = 1);

/// Symmetric laminate cell for verification: mortar (t/2) | brick (w) | mortar (t/2)
/// along x, single material row along y, periodic pairs on all faces.
Mesh generate_laminate(double brick_width, double mortar_width, double height,
                       double target_size);

}  // namespace hygro
