#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qpm/apodization.hpp"
#include "qpm/dispersion.hpp"

namespace qpm {

/// Transform-limited Gaussian pump; `fwhm_nm` is the intensity FWHM.
struct PumpEnvelope {
  double center_nm = 0.0;
  double fwhm_nm = 0.0;

  PumpEnvelope(double center_nm, double fwhm_nm);

  double center_omega() const;
  double fwhm_omega() const;
  /// Standard deviation of the intensity spectrum |alpha|^2 in rad/s.
  double sigma_omega() const;
};

/// alpha(w) = exp(-(w - w_p0)^2 / (4 sigma_w^2)).
double pump_envelope(const PumpEnvelope& pump, double omega);

/// Uniformly spaced angular-frequency axis [min, max] with `points` samples.
struct Axis {
  double min = 0.0;
  double max = 0.0;
  std::size_t points = 0;

  double step() const { return (max - min) / static_cast<double>(points - 1); }
  double at(std::size_t i) const { return min + step() * static_cast<double>(i); }
};

struct FrequencyGrid {
  Axis signal;
  Axis idler;

  FrequencyGrid(Axis signal, Axis idler);
  double cell_area() const { return signal.step() * idler.step(); }
};

/// Centred on (w_s0, w_i0), +-`half_width_sigmas` pump intensity standard
/// deviations along each axis.
FrequencyGrid default_grid(const ProcessSpec& spec, const PumpEnvelope& pump,
                           std::size_t points = 512, double half_width_sigmas = 4.0);

/// Complex JSA on a signal x idler grid with sum |f|^2 dws dwi = 1.
struct JointSpectrum {
  FrequencyGrid grid;
  Eigen::MatrixXcd amplitude;

  JointSpectrum(FrequencyGrid grid, Eigen::MatrixXcd amplitude);
  JointSpectrum transposed() const;
};

/// Rescales `f` so sum |f|^2 * cell_area = 1; throws on a zero or non-finite matrix.
void normalize_amplitude(Eigen::MatrixXcd& f, double cell_area);

struct JsaOptions {
  enum class MismatchModel { exact, linearized } mismatch = MismatchModel::exact;
  unsigned threads = 1;
};

/// f(ws, wi) = alpha(ws + wi) phi(dk(ws, wi)), normalized. Demodulated
/// sequences take the baseband mismatch; physical ones the full mismatch.
JointSpectrum compute_jsa(const DispersionModel& model, const ProcessSpec& spec,
                          const DomainSequence& seq, const PumpEnvelope& pump,
                          const FrequencyGrid& grid, const JsaOptions& options = {});

/// |f|^2 elementwise.
Eigen::MatrixXd jsi(const JointSpectrum& js);

struct Marginals {
  Eigen::VectorXd signal;  // integrates to 1 against the signal step
  Eigen::VectorXd idler;
};

Marginals marginals(const JointSpectrum& js);

struct SchmidtResult {
  std::vector<double> coefficients;  // lambda_n, descending, sum 1
  double purity = 0.0;
  double schmidt_number = 0.0;
  /// Optional mode functions: columns are orthonormal vectors over the grid.
  std::optional<Eigen::MatrixXcd> signal_modes;
  std::optional<Eigen::MatrixXcd> idler_modes;

  /// Sorts, normalizes and derives P and K. Entries must be nonnegative.
  static SchmidtResult from_coefficients(std::vector<double> lambdas);

  /// sum_n sqrt(lambda_n) u_n v_n^T; needs modes.
  Eigen::MatrixXcd reconstruct() const;
};

inline double purity_from_schmidt_number(double k) { return 1.0 / k; }
inline double schmidt_number_from_purity(double p) { return 1.0 / p; }

/// SVD of the amplitude matrix.
SchmidtResult schmidt(const JointSpectrum& js, bool keep_modes = false);

/// Schmidt analysis of sqrt(JSI) with zero phase, as from an intensity-only
/// measurement.
SchmidtResult schmidt_from_jsi(const Eigen::MatrixXd& intensity);

/// Purity from Tr(rho_s^2) / (Tr rho_s)^2 with rho_s = F F^H; no SVD involved.
double purity_from_reduced_density(const Eigen::MatrixXcd& f);

enum class Arm { signal, idler };

/// Zeroes the JSA outside [min_nm, max_nm] on one arm and renormalizes.
JointSpectrum spectral_window(const JointSpectrum& js, Arm arm, double min_nm, double max_nm);

/// Least-squares Gaussian a exp(-(x-mu)^2 / (2 s^2)) fit.
struct GaussianFit {
  double amplitude = 0.0;
  double mean = 0.0;
  double sigma = 0.0;
  double r_squared = 0.0;
};

GaussianFit fit_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Intensity-FWHM pump bandwidth that maximizes JSA purity for `seq`,
/// golden-section search in log bandwidth over [lo_nm, hi_nm].
double optimize_pump_bandwidth(const DispersionModel& model, const ProcessSpec& spec,
                               const DomainSequence& seq, double center_nm,
                               std::size_t grid_points = 128, double lo_nm = 0.2,
                               double hi_nm = 20.0, const JsaOptions& options = {});

struct SweepRow {
  double sigma_um = 0.0;
  double purity = 0.0;
  double brightness = 0.0;
  double pump_fwhm_nm = 0.0;
};

struct SweepOptions {
  std::size_t grid_points = 512;
  bool optimize_pump = false;  // re-match the pump for every sigma
  JsaOptions jsa;
};

/// synthesize_domains -> compute_jsa -> schmidt, plus brightness, per sigma.
std::vector<SweepRow> sweep_sigma(const DispersionModel& model, const ProcessSpec& spec,
                                  const PumpEnvelope& pump, double length_um,
                                  double domain_length_um, const std::vector<double>& sigmas_um,
                                  const SweepOptions& options = {});

struct WavelengthAxis {
  double min_nm = 0.0;
  double max_nm = 0.0;
  std::size_t points = 0;

  double at(std::size_t i) const {
    return min_nm + (max_nm - min_nm) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
};

/// |phi(dk(l1, l2))|^2 over signal-mode (rows) and idler-mode (columns)
/// wavelengths, the classical sum-frequency probe of the PMF.
struct SfgMap {
  WavelengthAxis signal;
  WavelengthAxis idler;
  Eigen::MatrixXd power;
};

SfgMap sfg_map(const DispersionModel& model, const ProcessSpec& spec, const DomainSequence& seq,
               const WavelengthAxis& signal, const WavelengthAxis& idler, unsigned threads = 1);

/// Least-squares slope d(l_idler)/d(l_signal) of the per-row maxima.
double ridge_slope(const SfgMap& map);

}  // namespace qpm
