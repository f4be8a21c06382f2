#include "qpm/reference_model.hpp"

#include <cmath>

namespace qpm {

namespace {

constexpr double kTe0Min = 0.70, kTe0Max = 1.75;
constexpr double kTe2Min = 1.40, kTe2Max = 1.85;

// TE0 group index: pump value at short wavelengths, signal value at long ones.
double te0_group_index(const ReferenceModelParameters& p, double lambda) {
  const double s = 0.5 * (1.0 - std::tanh((lambda - p.step_center_um) / p.step_width_um));
  return p.group_index_signal + (p.group_index_pump - p.group_index_signal) * s;
}

// n_g = -lambda^2 d(n/lambda)/dlambda, so n/lambda is the running integral of
// -n_g/lambda^2. Composite Simpson on each knot interval.
double simpson_segment(const ReferenceModelParameters& p, double a, double b) {
  constexpr int kPanels = 64;
  const double h = (b - a) / kPanels;
  auto f = [&](double x) { return te0_group_index(p, x) / (x * x); };
  double sum = f(a) + f(b);
  for (int i = 1; i < kPanels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

std::vector<double> knots(double lo, double hi, double step) {
  std::vector<double> out;
  const auto n = static_cast<int>(std::lround((hi - lo) / step));
  for (int i = 0; i <= n; ++i) out.push_back(lo + i * step);
  return out;
}

}  // namespace

std::map<std::string, ModeTable> reference_tables(const ReferenceModelParameters& p) {
  const double signal_um = p.signal_nm / 1e3;

  // TE0: integrate outward from the signal anchor (n/lambda known there).
  ModeTable te0;
  te0.wavelength_um = knots(kTe0Min, kTe0Max, p.knot_spacing_um);
  const std::size_t n0 = te0.wavelength_um.size();
  std::vector<double> n_over_lambda(n0);
  std::size_t anchor = 0;
  for (std::size_t i = 0; i < n0; ++i) {
    if (std::abs(te0.wavelength_um[i] - signal_um) <
        std::abs(te0.wavelength_um[anchor] - signal_um))
      anchor = i;
  }
  const double anchor_um = te0.wavelength_um[anchor];
  n_over_lambda[anchor] = p.signal_effective_index / signal_um -
                          simpson_segment(p, signal_um, anchor_um);
  for (std::size_t i = anchor + 1; i < n0; ++i) {
    n_over_lambda[i] = n_over_lambda[i - 1] -
                       simpson_segment(p, te0.wavelength_um[i - 1], te0.wavelength_um[i]);
  }
  for (std::size_t i = anchor; i-- > 0;) {
    n_over_lambda[i] = n_over_lambda[i + 1] +
                       simpson_segment(p, te0.wavelength_um[i], te0.wavelength_um[i + 1]);
  }
  te0.index.resize(n0);
  for (std::size_t i = 0; i < n0; ++i) te0.index[i] = n_over_lambda[i] * te0.wavelength_um[i];

  // TE2: n = n_g + B lambda has constant group index n_g; B sets the period.
  const double pump_um = p.pump_nm / 1e3;
  const double idler_um = 1.0 / (1.0 / pump_um - 1.0 / signal_um);
  const auto te0_at = [&](double lambda) {
    // Same integral, evaluated directly at an arbitrary wavelength.
    return (p.signal_effective_index / signal_um - simpson_segment(p, signal_um, lambda)) *
           lambda;
  };
  const double kp_over_2pi = te0_at(pump_um) / pump_um;
  const double ks_over_2pi = p.signal_effective_index / signal_um;
  const double ki_over_2pi = kp_over_2pi - ks_over_2pi - 1.0 / p.poling_period_um;
  const double idler_index = ki_over_2pi * idler_um;
  const double slope = (idler_index - p.group_index_idler) / idler_um;

  ModeTable te2;
  te2.wavelength_um = knots(kTe2Min, kTe2Max, p.knot_spacing_um);
  for (double l : te2.wavelength_um) te2.index.push_back(p.group_index_idler + slope * l);

  return {{"TE0", std::move(te0)}, {"TE2", std::move(te2)}};
}

DispersionModel reference_model(const ReferenceModelParameters& p) {
  return DispersionModel(reference_tables(p));
}

ProcessSpec reference_process(const DispersionModel& model, const ReferenceModelParameters& p) {
  return with_solved_period(
      model, make_process(model, {"TE0", p.pump_nm}, {"TE0", p.signal_nm}, "TE2"));
}

}  // namespace qpm
