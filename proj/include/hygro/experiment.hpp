#pragma once

// Transient simulation of a wall sample between two climate chambers. The interior
// climate is imposed on the left face, the exterior climate on the right face; top
// and bottom are adiabatic and impermeable.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hygro/fem.hpp"
#include "hygro/mesh.hpp"

namespace hygro {

struct ClimateSample {
  double t = 0.0;          // s
  double theta_int = 0.0;  // C
  double phi_int = 0.0;
  double theta_ext = 0.0;  // C
  double phi_ext = 0.0;
};

inline constexpr double kClimateGapLimit = 24.0 * 3600.0;  // s

/// Climate record with linear interpolation between samples.
class ClimateSeries {
 public:
  ClimateSeries() = default;
  /// Throws ConfigError on non-increasing time stamps or phi outside (0, 1].
  explicit ClimateSeries(std::vector<ClimateSample> samples);

  /// Hourly samples spanning [0, duration] with constant values.
  static ClimateSeries constant(double duration, double theta_int, double phi_int,
                                double theta_ext, double phi_ext);

  const std::vector<ClimateSample>& samples() const { return samples_; }
  double start() const { return samples_.front().t; }
  double end() const { return samples_.back().t; }

  /// Interpolated sample; throws ConfigError outside [start, end].
  ClimateSample at(double t) const;

  /// Intervals between consecutive samples longer than `limit` (start times).
  std::vector<std::pair<double, double>> gaps(double limit = kClimateGapLimit) const;

  /// Throws ConfigError when [t0, t1] is not covered or contains a gap.
  void require_coverage(double t0, double t1, double limit = kClimateGapLimit) const;

 private:
  std::vector<ClimateSample> samples_;
};

/// Sensor accuracy bands (temperature depends on the sign of the reading).
struct SensorAccuracy {
  double theta_above_zero = 0.1;  // K
  double theta_below_zero = 0.4;  // K
  double phi = 0.02;

  double theta_band(double theta) const { return theta >= 0.0 ? theta_above_zero : theta_below_zero; }
};

struct Probe {
  std::string name;
  Vec2 position;
  Phase phase = Phase::brick;  // which material copy to read on an interface line
};

/// Two probes straddling one interface; jumps are mortar minus brick.
struct JumpPair {
  std::string name;
  std::string brick_probe;
  std::string mortar_probe;
};

struct SensorLayout {
  std::vector<Probe> probes;
  std::vector<JumpPair> pairs;
  SensorAccuracy accuracy;

  int find(const std::string& name) const;  // -1 when absent
  /// Throws ConfigError for duplicate names, probes outside their phase, unknown pair
  /// members, or pairs that do not straddle a common interface segment.
  void validate(const Mesh& mesh) const;
};

/// One brick/mortar probe pair per vertical interface line of a wall sample, on the
/// segment nearest to a quarter of the sample height. The probes sit `offset` metres
/// off the line along its normal (0 reads the two nodal copies on the line).
SensorLayout default_sensor_layout(const Mesh& mesh, double offset);

struct ExperimentSpec {
  double duration = 0.0;           // s
  double dt = 600.0;               // s
  double output_interval = 3600.0; // s
  std::optional<PointState> initial;  // uniform initial state; first interior sample when empty
  NewtonOptions newton;
};

/// Sampled sensor readings; theta[p][k] is probe p at times[k].
struct Traces {
  std::vector<double> times;
  std::vector<std::string> probes;
  std::vector<std::vector<double>> theta;
  std::vector<std::vector<double>> phi;

  int find(const std::string& name) const;
};

struct JumpSeries {
  std::string pair;
  std::vector<double> times;
  std::vector<double> dtheta;  // K, mortar minus brick
  std::vector<double> dphi;
  std::vector<double> dpc;     // Pa, NaN where a reading has phi <= 0
  double max_abs_dtheta = 0.0;
  double max_abs_dphi = 0.0;
  bool theta_exceeds_band = false;
  bool phi_exceeds_band = false;
};

struct ExperimentResult {
  Traces traces;
  std::vector<JumpSeries> jumps;
  NodalState final_state;
  int steps = 0;
  int halvings = 0;
  int max_newton_iterations = 0;
  int clamp_events = 0;
};

/// Builds the boundary-value problem: climate-driven essential values on the left
/// (interior) and right (exterior) faces.
Problem experiment_problem(const Mesh& mesh, const ClimateSeries& climate,
                           const MaterialSet& materials);

ExperimentResult run_experiment(const Mesh& mesh, const ClimateSeries& climate,
                                const SensorLayout& layout, const MaterialSet& materials,
                                const ExperimentSpec& spec);

/// Signed jumps per pair. Throws ConfigError when a pair member is missing.
std::vector<JumpSeries> extract_jumps(const Traces& traces, const SensorLayout& layout,
                                      const PhysicalConstants& constants = {});

struct CapillarySeries {
  std::vector<double> pc;            // Pa; NaN at skipped samples
  std::vector<std::size_t> skipped;  // indices with phi <= 0
};

/// Kelvin back-calculation per sample with theta in Celsius.
CapillarySeries back_calculate_pc(const std::vector<double>& theta,
                                  const std::vector<double>& phi,
                                  const PhysicalConstants& constants = {});

/// Constant chamber set points of the two laboratory experiments.
ClimateSeries experiment1_climate(double duration);
ClimateSeries experiment2_climate(double duration);

// CSV schemas:
//   climate: t_s, theta_int_C, phi_int, theta_ext_C, phi_ext
//   traces:  t_s, probe_name, theta_C, phi        (long format, time-major)
//   jumps:   t_s, pair_name, dtheta_K, dphi, dpc_Pa
using CsvMeta = std::vector<std::pair<std::string, std::string>>;

ClimateSeries read_climate_csv(const std::string& path);
void write_climate_csv(std::ostream& os, const ClimateSeries& climate, const CsvMeta& meta = {});
Traces read_traces_csv(const std::string& path);
void write_traces_csv(std::ostream& os, const Traces& traces, const CsvMeta& meta = {});
void write_jumps_csv(std::ostream& os, const std::vector<JumpSeries>& jumps,
                     const CsvMeta& meta = {});

}  // namespace hygro
