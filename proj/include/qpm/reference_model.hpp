#pragma once

#include "qpm/dispersion.hpp"

namespace qpm {

/// Synthetic two-mode dispersion model (labels "TE0" and "TE2") built to sit in
/// the symmetric group-velocity-matched regime: the TE0 group index at the pump
/// lies exactly midway between the TE0 signal and the TE2 idler values, so the
/// PMF ridge is oriented at 45 degrees. The TE0 group index changes between the
/// pump and signal bands through a narrow tanh step centred far from both, so
/// group-velocity dispersion inside the bands is negligible. Indices are
/// synthetic; they are not a mode solution of a real waveguide.
struct ReferenceModelParameters {
  double pump_nm = 785.0;
  double signal_nm = 1520.0;
  double group_index_signal = 2.28;
  double group_index_pump = 2.30;
  double group_index_idler = 2.32;
  double signal_effective_index = 1.90;
  double poling_period_um = 3.08;  // sets the TE2 phase index
  double step_center_um = 1.15;
  double step_width_um = 0.04;
  double knot_spacing_um = 0.005;
};

DispersionModel reference_model(const ReferenceModelParameters& p = {});

/// The raw tables behind reference_model(), e.g. for writing to disk.
std::map<std::string, ModeTable> reference_tables(const ReferenceModelParameters& p = {});

/// pump TE0 / signal TE0 / idler TE2 at the parameter wavelengths, period solved.
ProcessSpec reference_process(const DispersionModel& model,
                              const ReferenceModelParameters& p = {});

}  // namespace qpm
