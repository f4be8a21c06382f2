#include "qpm/dispersion.hpp"

#include <cmath>
#include <limits>

#include "qpm/error.hpp"
#include "qpm/units.hpp"

namespace qpm {

namespace {

// Group indices closer than this (relative) are treated as equal.
constexpr double kEqualityTolerance = 1e-12;

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= kEqualityTolerance * std::max(std::abs(a), std::abs(b));
}

double um(double nm) { return nm / units::kNmPerUm; }

// Inverse-group-velocity differences shared by gvm_check and pmf_angle.
struct VelocityTerms {
  double pump_minus_signal;  // 1/v_p - 1/v_s
  double pump_minus_idler;   // 1/v_p - 1/v_i
  bool signal_eq_pump;
  bool idler_eq_pump;
  GroupIndices ng;
};

VelocityTerms velocity_terms(const DispersionModel& model, const ProcessSpec& spec) {
  VelocityTerms t{};
  t.ng = group_indices(model, spec);
  t.pump_minus_signal = (t.ng.pump - t.ng.signal) / units::kSpeedOfLight;
  t.pump_minus_idler = (t.ng.pump - t.ng.idler) / units::kSpeedOfLight;
  t.signal_eq_pump = nearly_equal(t.ng.pump, t.ng.signal);
  t.idler_eq_pump = nearly_equal(t.ng.pump, t.ng.idler);
  return t;
}

}  // namespace

DispersionModel::DispersionModel(const std::map<std::string, ModeTable>& modes) {
  if (modes.empty()) throw InputError("dispersion model has no modes");
  for (const auto& [label, table] : modes) {
    if (table.wavelength_um.size() < 4)
      throw InputError("mode '" + label + "' needs at least 4 table points");
    for (double n : table.index) {
      if (!std::isfinite(n) || n <= 0.0)
        throw InputError("mode '" + label + "' has a non-positive or non-finite index");
    }
    try {
      splines_.emplace(label, NaturalCubicSpline(table.wavelength_um, table.index));
    } catch (const InputError& e) {
      throw InputError("mode '" + label + "': " + e.what());
    }
  }
}

const NaturalCubicSpline& DispersionModel::spline(std::string_view mode) const {
  auto it = splines_.find(mode);
  if (it == splines_.end())
    throw InputError("unknown mode label '" + std::string(mode) + "'");
  return it->second;
}

bool DispersionModel::has_mode(std::string_view mode) const {
  return splines_.find(mode) != splines_.end();
}

std::vector<std::string> DispersionModel::mode_labels() const {
  std::vector<std::string> out;
  for (const auto& [label, _] : splines_) out.push_back(label);
  return out;
}

double DispersionModel::effective_index(std::string_view mode, double wavelength_um) const {
  const auto& s = spline(mode);
  if (!s.contains(wavelength_um)) {
    throw InputError("wavelength " + std::to_string(wavelength_um) +
                     " um outside the table span of mode '" + std::string(mode) + "'");
  }
  return s.value(wavelength_um);
}

double DispersionModel::group_index(std::string_view mode, double wavelength_um) const {
  const auto& s = spline(mode);
  if (!(wavelength_um > s.front() && wavelength_um < s.back())) {
    throw InputError("group index of mode '" + std::string(mode) + "' requested at " +
                     std::to_string(wavelength_um) + " um, not strictly inside the table span");
  }
  return s.value(wavelength_um) - wavelength_um * s.derivative(wavelength_um);
}

double DispersionModel::wavenumber(std::string_view mode, double wavelength_um) const {
  return units::kTwoPi * effective_index(mode, wavelength_um) / wavelength_um;
}

double DispersionModel::inverse_group_velocity(std::string_view mode,
                                               double wavelength_um) const {
  return group_index(mode, wavelength_um) / units::kSpeedOfLight;
}

double ProcessSpec::pump_omega() const { return units::omega_from_nm(pump.wavelength_nm); }
double ProcessSpec::signal_omega() const { return units::omega_from_nm(signal.wavelength_nm); }
double ProcessSpec::idler_omega() const { return units::omega_from_nm(idler.wavelength_nm); }

ProcessSpec make_process(const DispersionModel& model, ModeWavelength pump,
                         ModeWavelength signal, std::string idler_mode) {
  if (!(pump.wavelength_nm > 0.0) || !(signal.wavelength_nm > pump.wavelength_nm))
    throw InputError("signal wavelength must exceed the pump wavelength");
  const double idler_nm = 1.0 / (1.0 / pump.wavelength_nm - 1.0 / signal.wavelength_nm);
  ProcessSpec spec{std::move(pump), std::move(signal), {std::move(idler_mode), idler_nm}, {}};
  validate_process(model, spec);
  return spec;
}

void validate_process(const DispersionModel& model, const ProcessSpec& spec) {
  for (const auto* m : {&spec.pump, &spec.signal, &spec.idler}) {
    if (!model.has_mode(m->mode))
      throw InputError("unknown mode label '" + m->mode + "'");
    if (!(m->wavelength_nm > 0.0) || !std::isfinite(m->wavelength_nm))
      throw InputError("centre wavelengths must be positive");
  }
  const double lhs = 1.0 / spec.pump.wavelength_nm;
  const double rhs = 1.0 / spec.signal.wavelength_nm + 1.0 / spec.idler.wavelength_nm;
  if (std::abs(lhs - rhs) > 1e-6 * lhs)
    throw InputError("centre wavelengths violate energy conservation");
  if (spec.poling_period_um && !(*spec.poling_period_um > 0.0))
    throw InputError("poling period must be positive");
}

double phase_mismatch(const DispersionModel& model, const ProcessSpec& spec,
                      double omega_s, double omega_i, Mismatch kind) {
  const double omega_p = omega_s + omega_i;
  const double dk = model.wavenumber(spec.pump.mode, units::um_from_omega(omega_p)) -
                    model.wavenumber(spec.signal.mode, units::um_from_omega(omega_s)) -
                    model.wavenumber(spec.idler.mode, units::um_from_omega(omega_i));
  if (kind == Mismatch::full) return dk;
  if (!spec.poling_period_um) throw InputError("poling period has not been solved");
  return dk - units::kTwoPi / *spec.poling_period_um;
}

double linearized_mismatch(const DispersionModel& model, const ProcessSpec& spec,
                           double omega_s, double omega_i, Mismatch kind) {
  const double ws0 = spec.signal_omega();
  const double wi0 = spec.idler_omega();
  const double dk0 = phase_mismatch(model, spec, ws0, wi0, kind);
  const double inv_vp = model.inverse_group_velocity(spec.pump.mode, um(spec.pump.wavelength_nm));
  const double inv_vs =
      model.inverse_group_velocity(spec.signal.mode, um(spec.signal.wavelength_nm));
  const double inv_vi = model.inverse_group_velocity(spec.idler.mode, um(spec.idler.wavelength_nm));
  return dk0 + (inv_vp - inv_vi) * (omega_i - wi0) + (inv_vp - inv_vs) * (omega_s - ws0);
}

double poling_period(const DispersionModel& model, const ProcessSpec& spec) {
  validate_process(model, spec);
  const double kp = model.wavenumber(spec.pump.mode, um(spec.pump.wavelength_nm));
  const double ks = model.wavenumber(spec.signal.mode, um(spec.signal.wavelength_nm));
  const double ki = model.wavenumber(spec.idler.mode, um(spec.idler.wavelength_nm));
  const double dk = kp - ks - ki;
  if (!(dk > 1e-12 * kp)) {
    throw InfeasibleError("k_p - k_s - k_i is not positive; first-order type-0 QPM is impossible");
  }
  return units::kTwoPi / dk;
}

ProcessSpec with_solved_period(const DispersionModel& model, ProcessSpec spec) {
  spec.poling_period_um = poling_period(model, spec);
  return spec;
}

GroupIndices group_indices(const DispersionModel& model, const ProcessSpec& spec) {
  return {model.group_index(spec.pump.mode, um(spec.pump.wavelength_nm)),
          model.group_index(spec.signal.mode, um(spec.signal.wavelength_nm)),
          model.group_index(spec.idler.mode, um(spec.idler.wavelength_nm))};
}

GvmReport gvm_check(const DispersionModel& model, const ProcessSpec& spec) {
  const VelocityTerms t = velocity_terms(model, spec);
  GvmReport r;
  r.group_index = t.ng;
  if (t.signal_eq_pump && t.idler_eq_pump) {
    r.boundary = GvmBoundary::all_equal;
    r.ratio = std::numeric_limits<double>::quiet_NaN();
    r.satisfied = true;
  } else if (t.idler_eq_pump) {
    r.boundary = GvmBoundary::idler_equals_pump;
    r.ratio = std::numeric_limits<double>::infinity();
    r.satisfied = true;
  } else if (t.signal_eq_pump) {
    r.boundary = GvmBoundary::signal_equals_pump;
    r.ratio = 0.0;
    r.satisfied = true;
  } else {
    r.ratio = -t.pump_minus_signal / t.pump_minus_idler;
    r.satisfied = r.ratio >= 0.0;
  }
  return r;
}

double pmf_angle(const DispersionModel& model, const ProcessSpec& spec) {
  const VelocityTerms t = velocity_terms(model, spec);
  if (t.signal_eq_pump && t.idler_eq_pump)
    throw InfeasibleError("all group velocities are equal; PMF orientation is undefined");
  if (t.idler_eq_pump) return 90.0;
  if (t.signal_eq_pump) return 0.0;
  return std::atan(-t.pump_minus_signal / t.pump_minus_idler) * 180.0 / units::kPi;
}

}  // namespace qpm
