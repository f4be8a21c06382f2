#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpm/spline.hpp"

namespace qpm {

/// Tabulated effective index of one guided mode, wavelengths in um.
struct ModeTable {
  std::vector<double> wavelength_um;
  std::vector<double> index;
};

/// Effective-index tables per optical mode, interpolated with natural cubic
/// splines. Immutable after construction; never extrapolates.
class DispersionModel {
 public:
  explicit DispersionModel(const std::map<std::string, ModeTable>& modes);

  double effective_index(std::string_view mode, double wavelength_um) const;

  /// n_g = n - lambda dn/dlambda from the spline's analytic derivative.
  /// Requires the wavelength to lie strictly inside the table span.
  double group_index(std::string_view mode, double wavelength_um) const;

  /// Propagation constant k = 2 pi n / lambda in rad/um.
  double wavenumber(std::string_view mode, double wavelength_um) const;

  /// Inverse group velocity n_g / c in s/um.
  double inverse_group_velocity(std::string_view mode, double wavelength_um) const;

  bool has_mode(std::string_view mode) const;
  std::vector<std::string> mode_labels() const;
  const NaturalCubicSpline& spline(std::string_view mode) const;

 private:
  std::map<std::string, NaturalCubicSpline, std::less<>> splines_;
};

struct ModeWavelength {
  std::string mode;
  double wavelength_nm = 0.0;
};

/// Three-wave SPDC process: pump -> signal + idler, all at their centre
/// wavelengths. The poling period stays empty until solved.
struct ProcessSpec {
  ModeWavelength pump;
  ModeWavelength signal;
  ModeWavelength idler;
  std::optional<double> poling_period_um;

  double pump_omega() const;
  double signal_omega() const;
  double idler_omega() const;
};

/// Builds a process whose idler wavelength follows from energy conservation.
ProcessSpec make_process(const DispersionModel& model, ModeWavelength pump,
                         ModeWavelength signal, std::string idler_mode);

/// Checks energy conservation (1e-6 relative) and that every mode exists.
void validate_process(const DispersionModel& model, const ProcessSpec& spec);

/// Which mismatch to evaluate. `baseband` subtracts the grating vector 2 pi / Lambda
/// and is the argument for demodulated domain sequences; `full` is
/// k_p - k_s - k_i and is the argument for physical sequences.
enum class Mismatch { baseband, full };

/// Exact phase mismatch in rad/um for angular frequencies in rad/s.
double phase_mismatch(const DispersionModel& model, const ProcessSpec& spec,
                      double omega_s, double omega_i,
                      Mismatch kind = Mismatch::baseband);

/// First-order expansion of the mismatch about the centre frequencies.
double linearized_mismatch(const DispersionModel& model, const ProcessSpec& spec,
                           double omega_s, double omega_i,
                           Mismatch kind = Mismatch::baseband);

/// First-order type-0 QPM period 2 pi / (k_p - k_s - k_i) in um.
/// Throws InfeasibleError when the denominator is not positive.
double poling_period(const DispersionModel& model, const ProcessSpec& spec);

/// Returns a copy of `spec` with its period solved.
ProcessSpec with_solved_period(const DispersionModel& model, ProcessSpec spec);

struct GroupIndices {
  double pump = 0.0;
  double signal = 0.0;
  double idler = 0.0;
};

GroupIndices group_indices(const DispersionModel& model, const ProcessSpec& spec);

enum class GvmBoundary { none, signal_equals_pump, idler_equals_pump, all_equal };

struct GvmReport {
  /// (1/v_s - 1/v_p) / (1/v_p - 1/v_i); +inf when the pump matches the idler.
  double ratio = 0.0;
  bool satisfied = false;
  GvmBoundary boundary = GvmBoundary::none;
  GroupIndices group_index;
};

/// Group-velocity-matching diagnostic: satisfied when the pump's inverse
/// group velocity lies between the signal's and the idler's (ratio >= 0),
/// boundary equalities included.
GvmReport gvm_check(const DispersionModel& model, const ProcessSpec& spec);

/// Orientation of the phase-matching ridge in the (w_s, w_i) plane, degrees in
/// (-90, 90]. Throws InfeasibleError when all group velocities coincide.
double pmf_angle(const DispersionModel& model, const ProcessSpec& spec);

}  // namespace qpm
