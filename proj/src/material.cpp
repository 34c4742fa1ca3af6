#include "hygro/material.hpp"

#include <cmath>
#include <sstream>

namespace hygro {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " must be positive and finite (got " << value << ")";
    throw ParameterError(os.str());
  }
}

void check_theta(double theta) {
  if (!(theta >= kMinTheta && theta <= kMaxTheta)) {
    std::ostringstream os;
    os << "temperature " << theta << " C is outside the model range [" << kMinTheta << ", "
       << kMaxTheta << "] C";
    throw DomainError(os.str());
  }
}

}  // namespace

void PhysicalConstants::validate() const {
  require_positive(gas_constant, "gas_constant");
  require_positive(molar_mass_water, "molar_mass_water");
  require_positive(water_density, "water_density");
  require_positive(evaporation_enthalpy, "evaporation_enthalpy");
  require_positive(water_heat_capacity, "water_heat_capacity");
  require_positive(ambient_pressure, "ambient_pressure");
}

void MaterialParams::validate() const {
  require_positive(lambda0, "lambda0");
  if (!(b_tcs >= 0.0)) throw ParameterError("b_tcs must be non-negative");
  if (!(mu >= 1.0)) {
    std::ostringstream os;
    os << "mu must be >= 1 (got " << mu << ")";
    throw ParameterError(os.str());
  }
  require_positive(w_f, "w_f");
  require_positive(w80, "w80");
  if (!(w80 < w_f)) {
    std::ostringstream os;
    os << "w80 (" << w80 << ") must be below w_f (" << w_f << ")";
    throw ParameterError(os.str());
  }
  require_positive(A, "A");
  require_positive(rho_s, "rho_s");
  require_positive(c_s, "c_s");
  const double b = retention_shape();
  if (!(b > 1.0) || !std::isfinite(b)) {
    std::ostringstream os;
    os << "retention shape factor b = " << b << " must exceed 1 (w80 = " << w80
       << ", w_f = " << w_f << " give a non-monotone retention curve)";
    throw ParameterError(os.str());
  }
}

double MaterialParams::retention_shape() const {
  return 0.8 * (w80 - w_f) / (w80 - 0.8 * w_f);
}

void InterfaceParams::validate() const {
  if (perfect) return;
  require_positive(alpha_int, "alpha_int");
  require_positive(beta_int, "beta_int");
}

MaterialParams identified_brick() {
  MaterialParams p;
  p.lambda0 = 0.25;
  p.b_tcs = 10.0;
  p.mu = 16.80;
  p.w_f = 229.30;
  p.w80 = 141.68;
  p.A = 0.51;
  p.rho_s = 1690.0;  // not reported; literature-typical
  p.c_s = 840.0;     // not reported; literature-typical
  return p;
}

MaterialParams identified_mortar() {
  MaterialParams p;
  p.lambda0 = 0.45;
  p.b_tcs = 9.0;
  p.mu = 9.63;
  p.w_f = 160.0;
  p.w80 = 22.72;
  p.A = 0.82;
  p.rho_s = 1730.0;  // not reported; literature-typical
  p.c_s = 840.0;     // not reported; literature-typical
  return p;
}

SaturationPressure saturation_pressure(double theta) {
  check_theta(theta);
  const auto r = closure::saturation_pressure(Dual<1>::variable(theta, 0));
  return {r.v, r.d[0]};
}

Retention retention(double phi, const MaterialParams& p) {
  const double b = p.retention_shape();
  if (!(b > 1.0)) {
    std::ostringstream os;
    os << "retention shape factor b = " << b << " must exceed 1";
    throw ParameterError(os.str());
  }
  if (!(phi >= 0.0 && phi < b)) {
    std::ostringstream os;
    os << "relative humidity " << phi << " outside retention domain [0, " << b << ")";
    throw DomainError(os.str());
  }
  return {closure::water_content(phi, p), closure::moisture_capacity(phi, p)};
}

double liquid_diffusivity(double phi, const MaterialParams& p) {
  return closure::liquid_diffusivity(phi, p);
}

double liquid_conductivity(double phi, const MaterialParams& p) {
  p.validate();
  if (!(phi >= 0.0 && phi <= 1.0)) {
    std::ostringstream os;
    os << "relative humidity " << phi << " outside [0, 1]";
    throw DomainError(os.str());
  }
  return closure::liquid_conductivity(phi, p);
}

double vapor_permeability(double theta, const MaterialParams& p, const PhysicalConstants& c) {
  check_theta(theta);
  if (!(p.mu >= 1.0)) throw ParameterError("mu must be >= 1");
  return closure::vapor_permeability(theta, p, c);
}

double thermal_conductivity(double phi, const MaterialParams& p) {
  p.validate();
  return closure::thermal_conductivity(phi, p);
}

double heat_capacity(double theta, double phi, const MaterialParams& p,
                     const PhysicalConstants& c) {
  check_theta(theta);
  p.validate();
  return closure::heat_capacity(phi, p, c);
}

double capillary_pressure(double temperature_kelvin, double phi, const PhysicalConstants& c) {
  if (!(phi > 0.0)) {
    std::ostringstream os;
    os << "capillary pressure undefined for relative humidity " << phi << " (needs phi > 0)";
    throw DomainError(os.str());
  }
  if (!(temperature_kelvin > 0.0)) {
    std::ostringstream os;
    os << "absolute temperature must be positive (got " << temperature_kelvin << " K)";
    throw DomainError(os.str());
  }
  return -(c.water_density * c.gas_constant / c.molar_mass_water) * temperature_kelvin *
         std::log(phi);
}

InterfaceFlux interface_fluxes(const PointState& side1, const PointState& side2,
                               const InterfaceParams& ip, const PhysicalConstants& c) {
  if (ip.perfect) {
    throw ParameterError(
        "interface_fluxes is undefined for perfect contact; continuity is enforced by "
        "constraints");
  }
  const double pc1 = capillary_pressure(side1.theta + kKelvinOffset, side1.phi, c);
  const double pc2 = capillary_pressure(side2.theta + kKelvinOffset, side2.phi, c);
  return {-ip.alpha_int * (side2.theta - side1.theta), -ip.beta_int * (pc2 - pc1)};
}

}  // namespace hygro
