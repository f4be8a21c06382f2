#pragma once

#include <numbers>

namespace qpm::units {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Speed of light in micrometres per second.
inline constexpr double kSpeedOfLight = 2.99792458e14;

inline constexpr double kNmPerUm = 1.0e3;

// Angular frequency [rad/s] <-> vacuum wavelength [um].
inline constexpr double omega_from_um(double wavelength_um) {
  return kTwoPi * kSpeedOfLight / wavelength_um;
}
inline constexpr double um_from_omega(double omega) {
  return kTwoPi * kSpeedOfLight / omega;
}
inline constexpr double omega_from_nm(double wavelength_nm) {
  return omega_from_um(wavelength_nm / kNmPerUm);
}
inline constexpr double nm_from_omega(double omega) {
  return um_from_omega(omega) * kNmPerUm;
}

/// Ordinary frequency in THz for an angular frequency in rad/s.
inline constexpr double thz_from_omega(double omega) {
  return omega / kTwoPi * 1.0e-12;
}

/// Converts an intensity FWHM in wavelength to angular frequency around
/// `center_nm` (first order: dw = 2 pi c dl / l^2).
inline constexpr double omega_width_from_nm(double center_nm, double width_nm) {
  const double center_um = center_nm / kNmPerUm;
  return kTwoPi * kSpeedOfLight * (width_nm / kNmPerUm) / (center_um * center_um);
}

/// FWHM / (2 sqrt(2 ln 2)), the standard deviation of a Gaussian.
inline constexpr double kFwhmToSigma = 0.42466090014400953;

}  // namespace qpm::units
