#pragma once

// Constitutive closures of the Kuenzel heat-and-moisture model and the
// imperfect-contact interface laws. Temperatures are in degrees Celsius unless
// a name says otherwise; relative humidity phi is dimensionless.

#include <array>
#include <string>
#include <variant>

#include "hygro/dual.hpp"
#include "hygro/errors.hpp"

namespace hygro {

inline constexpr double kKelvinOffset = 273.15;
inline constexpr double kMinTheta = -40.0;
inline constexpr double kMaxTheta = 80.0;

struct PhysicalConstants {
  double gas_constant = 8.314;         // J mol^-1 K^-1
  double molar_mass_water = 0.018;     // kg mol^-1
  double water_density = 1000.0;       // kg m^-3
  double evaporation_enthalpy = 2.5e6; // J kg^-1
  double water_heat_capacity = 4190.0; // J kg^-1 K^-1
  double ambient_pressure = 101325.0;  // Pa

  void validate() const;
};

/// Per-phase parameters of the Kuenzel model.
struct MaterialParams {
  double lambda0 = 0.0;  // dry thermal conductivity, W m^-1 K^-1
  double b_tcs = 0.0;    // thermal conductivity supplement, -
  double mu = 1.0;       // vapour diffusion resistance factor, -
  double w_f = 0.0;      // free water saturation, kg m^-3
  double w80 = 0.0;      // water content at phi = 0.8, kg m^-3
  double A = 0.0;        // water absorption coefficient, kg m^-2 s^-0.5
  double rho_s = 0.0;    // dry bulk density, kg m^-3
  double c_s = 0.0;      // dry specific heat capacity, J kg^-1 K^-1

  /// Throws ParameterError naming the first violated invariant.
  void validate() const;

  /// Retention shape factor b from the w80 anchor.
  double retention_shape() const;
};

struct InterfaceParams {
  double alpha_int = 1.0e5;   // W m^-2 K^-1
  double beta_int = 5.25e-9;  // kg m^-2 s^-1 Pa^-1
  bool perfect = false;

  void validate() const;
};

/// Brick and mortar parameters identified from the two wall-sample experiments.
MaterialParams identified_brick();
MaterialParams identified_mortar();

struct SaturationPressure {
  double p;       // Pa
  double dp_dtheta;  // Pa K^-1
};

/// Magnus-type saturation vapour pressure with separate branches above and below 0 C.
/// Throws DomainError outside [-40, 80] C.
SaturationPressure saturation_pressure(double theta);

struct Retention {
  double w;        // kg m^-3
  double dw_dphi;  // kg m^-3
};

Retention retention(double phi, const MaterialParams& p);
double liquid_conductivity(double phi, const MaterialParams& p);
double liquid_diffusivity(double phi, const MaterialParams& p);
double vapor_permeability(double theta, const MaterialParams& p,
                          const PhysicalConstants& c = {});
double thermal_conductivity(double phi, const MaterialParams& p);
double heat_capacity(double theta, double phi, const MaterialParams& p,
                     const PhysicalConstants& c = {});

/// Kelvin relation. Temperature in kelvin. Throws DomainError for phi <= 0.
double capillary_pressure(double temperature_kelvin, double phi,
                          const PhysicalConstants& c = {});

struct PointState {
  double theta;  // C
  double phi;    // -
};

struct InterfaceFlux {
  double q;  // W m^-2, positive from side 1 into side 2
  double g;  // kg m^-2 s^-1, liquid water; positive when water moves from side 2 into side 1
};

/// Interface heat and liquid-water fluxes. Vapour flux across the interface is zero.
/// Throws ParameterError when the interface is flagged as perfect contact.
InterfaceFlux interface_fluxes(const PointState& side1, const PointState& side2,
                               const InterfaceParams& ip, const PhysicalConstants& c = {});

// ---------------------------------------------------------------------------
// Generic closures (double or Dual<N>), used by the assembly to obtain exact
// tangents. The double overloads above are thin wrappers around these.

namespace closure {

template <class T>
T saturation_pressure(const T& theta) {
  using std::exp;
  if (theta >= 0.0) return 611.0 * exp(17.08 * theta / (234.18 + theta));
  return 611.0 * exp(22.44 * theta / (272.44 + theta));
}

template <class T>
T water_content(const T& phi, const MaterialParams& p) {
  const double b = p.retention_shape();
  return p.w_f * (b - 1.0) * phi / (b - phi);
}

template <class T>
T moisture_capacity(const T& phi, const MaterialParams& p) {
  const double b = p.retention_shape();
  const T den = b - phi;
  return p.w_f * (b - 1.0) * b / (den * den);
}

template <class T>
T liquid_diffusivity(const T& phi, const MaterialParams& p) {
  using std::pow;
  const double scale = 3.8 * (p.A / p.w_f) * (p.A / p.w_f);
  return scale * pow(1000.0, water_content(phi, p) / p.w_f - 1.0);
}

template <class T>
T liquid_conductivity(const T& phi, const MaterialParams& p) {
  return liquid_diffusivity(phi, p) * moisture_capacity(phi, p);
}

template <class T>
T vapor_permeability(const T& theta, const MaterialParams& p, const PhysicalConstants& c) {
  using std::pow;
  return 2.0e-7 * pow(theta + kKelvinOffset, 0.81) / (c.ambient_pressure * p.mu);
}

template <class T>
T thermal_conductivity(const T& phi, const MaterialParams& p) {
  return p.lambda0 * (1.0 + p.b_tcs * water_content(phi, p) / p.rho_s);
}

template <class T>
T heat_capacity(const T& phi, const MaterialParams& p, const PhysicalConstants& c) {
  return p.rho_s * p.c_s + water_content(phi, p) * c.water_heat_capacity;
}

/// Kelvin capillary pressure with theta in Celsius.
template <class T>
T capillary_pressure(const T& theta, const T& phi, const PhysicalConstants& c) {
  using std::log;
  return -(c.water_density * c.gas_constant / c.molar_mass_water) * (theta + kKelvinOffset) *
         log(phi);
}

}  // namespace closure

// ---------------------------------------------------------------------------
// Phase models consumed by the finite-element assembly.

/// Selects which vapour-coupling terms enter the transport tensor.
enum class Coupling {
  full,       // all four Kuenzel blocks
  decoupled,  // k_tt = lambda, k_pp = D_phi + delta_p p_sat, no cross terms
};

/// Constant-coefficient phase, used for verification problems.
struct ConstantPhase {
  std::array<std::array<double, 2>, 2> k{{{1.0, 0.0}, {0.0, 1.0}}};
  double c_theta = 1.0;
  double c_phi = 1.0;
};

struct KunzelPhase {
  MaterialParams params;
};

using PhaseModel = std::variant<KunzelPhase, ConstantPhase>;

/// Transport tensor (field coupling) and lumped capacities at one state.
template <class T>
struct PhaseResponse {
  // k[a][b]: flux of field a driven by gradient of field b (a, b in {theta, phi}).
  std::array<std::array<T, 2>, 2> k;
  T c_theta;  // dH/dtheta, J m^-3 K^-1
  T c_phi;    // dw/dphi, kg m^-3
};

template <class T>
PhaseResponse<T> evaluate_phase(const PhaseModel& model, const T& theta, const T& phi,
                                const PhysicalConstants& c, Coupling coupling) {
  PhaseResponse<T> r;
  if (const auto* cp = std::get_if<ConstantPhase>(&model)) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) r.k[a][b] = T(cp->k[a][b]);
    r.c_theta = T(cp->c_theta);
    r.c_phi = T(cp->c_phi);
    return r;
  }
  const MaterialParams& p = std::get<KunzelPhase>(model).params;
  const T lambda = closure::thermal_conductivity(phi, p);
  const T d_phi = closure::liquid_conductivity(phi, p);
  const T delta_p = closure::vapor_permeability(theta, p, c);
  const T p_sat = closure::saturation_pressure(theta);
  if (coupling == Coupling::full) {
    // d p_sat / d theta carried analytically so the tangent stays exact.
    const T dp_sat = theta >= 0.0
                         ? p_sat * (17.08 * 234.18) / ((234.18 + theta) * (234.18 + theta))
                         : p_sat * (22.44 * 272.44) / ((272.44 + theta) * (272.44 + theta));
    const double hv = c.evaporation_enthalpy;
    r.k[0][0] = lambda + hv * delta_p * dp_sat * phi;
    r.k[0][1] = hv * delta_p * p_sat;
    r.k[1][0] = delta_p * dp_sat * phi;
    r.k[1][1] = d_phi + delta_p * p_sat;
  } else {
    r.k[0][0] = lambda;
    r.k[0][1] = T(0.0);
    r.k[1][0] = T(0.0);
    r.k[1][1] = d_phi + delta_p * p_sat;
  }
  r.c_theta = closure::heat_capacity(phi, p, c);
  r.c_phi = closure::moisture_capacity(phi, p);
  return r;
}

/// Capacities only (dH/dtheta, dw/dphi).
template <class T>
std::array<T, 2> evaluate_capacity(const PhaseModel& model, const T& phi,
                                   const PhysicalConstants& c) {
  if (const auto* cp = std::get_if<ConstantPhase>(&model)) return {T(cp->c_theta), T(cp->c_phi)};
  const MaterialParams& p = std::get<KunzelPhase>(model).params;
  return {closure::heat_capacity(phi, p, c), closure::moisture_capacity(phi, p)};
}

}  // namespace hygro
