#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "qpm/spectrum.hpp"

namespace qpm {

/// Fiber-dispersion spectrometer: one fiber spool and one detector per arm.
struct SpectrometerConfig {
  double fiber_length_km = 40.0;
  double dispersion_ps_per_nm_km = 17.0;
  double jitter_fwhm_ps = 100.0;  // 0 disables jitter
  double signal_reference_nm = 1520.0;
  double idler_reference_nm = 1620.0;
  double bin_width_ps = 10.0;
  double signal_transmission = 1.0;
  double idler_transmission = 1.0;

  /// Throws InputError unless lengths and D are positive, jitter >= 0,
  /// bin width <= jitter (when jitter > 0) and transmissions lie in (0, 1].
  void validate() const;
  double reference_nm(Arm arm) const {
    return arm == Arm::signal ? signal_reference_nm : idler_reference_nm;
  }
};

/// jitter / (D L), in nm.
double spectral_resolution(const SpectrometerConfig& cfg);

/// D L (lambda - lambda_ref), in ps.
double freq_to_time(double wavelength_nm, const SpectrometerConfig& cfg, Arm arm);

/// Inverse of freq_to_time.
double time_to_wavelength(double delay_ps, const SpectrometerConfig& cfg, Arm arm);

/// 2-D coincidence counts over (signal delay, idler delay) bins.
struct CoincidenceHistogram {
  double signal_origin_ps = 0.0;
  double idler_origin_ps = 0.0;
  double bin_width_ps = 0.0;
  std::size_t signal_bins = 0;
  std::size_t idler_bins = 0;
  std::vector<std::uint64_t> counts;  // row-major, signal index first
  std::uint64_t trials = 0;

  std::uint64_t& at(std::size_t s, std::size_t i) { return counts[s * idler_bins + i]; }
  std::uint64_t at(std::size_t s, std::size_t i) const { return counts[s * idler_bins + i]; }
  std::uint64_t total() const;
  double signal_bin_start(std::size_t s) const {
    return signal_origin_ps + bin_width_ps * static_cast<double>(s);
  }
  double idler_bin_start(std::size_t i) const {
    return idler_origin_ps + bin_width_ps * static_cast<double>(i);
  }
};

struct PhotonPair {
  double signal_nm;
  double idler_nm;
};

/// Monte-Carlo draw of `n` pairs from a discrete JSI on `grid`, uniformly
/// dithered inside the chosen cell in angular frequency. Samples are generated
/// in fixed-size chunks with per-chunk seeds, so the output depends only on
/// (jsi, grid, n, seed), never on `threads`.
std::vector<PhotonPair> sample_pairs(const Eigen::MatrixXd& jsi, const FrequencyGrid& grid,
                                     std::uint64_t n, std::uint64_t seed, unsigned threads = 1);

/// Simulated frequency-to-time measurement: sample pairs, map through each
/// fiber, add Gaussian detector jitter, apply per-arm transmission, bin.
CoincidenceHistogram acquire(const JointSpectrum& js, const SpectrometerConfig& cfg,
                             std::uint64_t n, std::uint64_t seed, unsigned threads = 1);

/// Maps histogram bins back to wavelength and distributes their counts onto
/// `target` cells by overlap length; normalized so sum * cell_area = 1.
Eigen::MatrixXd reconstruct_jsi(const CoincidenceHistogram& h, const SpectrometerConfig& cfg,
                                const FrequencyGrid& target);

/// ||a - b||_F / ||b||_F.
double relative_l2_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Unheralded g2(0) = 1 + P of one SPDC arm in the low-gain limit.
double g2_from_purity(double purity);

/// P = g2(0) / g2(inf) - 1.
double purity_from_g2(double g2_zero, double g2_infinity);

struct G2Options {
  std::uint64_t pulses = 1'000'000;
  double mean_photons = 0.01;  // mean pair number per pulse, mu
  std::uint64_t seed = 12345;
  double transmission = 1.0;   // arm transmission before the 50:50 split
  std::size_t batches = 100;
  unsigned threads = 1;
};

struct G2Estimate {
  /// Pair-counting estimator: same-pulse n_A n_B normalized by the product
  /// of mean counts. Unbiased for thermal statistics at any mu.
  double g2_zero = 0.0;
  double standard_error = 0.0;
  /// Threshold-detector estimator (clicks, not photon numbers), the raw
  /// quantity an HBT setup records. Saturation biases it low by O(mu).
  double g2_zero_clicks = 0.0;
  double clicks_standard_error = 0.0;
  /// Adjacent-pulse (uncorrelated) pair rate over the product of means.
  double g2_infinity = 0.0;
  std::uint64_t coincidences = 0;  // same-pulse click coincidences
  std::uint64_t pulses = 0;
};

/// HBT simulation on one arm. Each Schmidt mode emits a thermal photon
/// number with mean mu lambda_n per pulse; photons pass the transmission,
/// split 50:50, and are counted. Standard errors from a delete-one-batch
/// jackknife.
G2Estimate simulate_g2(const SchmidtResult& spectrum, const G2Options& options);

/// Schmidt spectrum of one arm after an ideal rectangular band-pass filter.
SchmidtResult filtered_schmidt(const JointSpectrum& js, Arm arm, double min_nm, double max_nm);

}  // namespace qpm
