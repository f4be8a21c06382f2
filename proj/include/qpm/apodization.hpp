#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace qpm {

/// Gaussian target for the cumulative nonlinear amplitude of an apodized grating.
struct ApodizationTarget {
  double length_um = 0.0;  // L
  double sigma_um = 0.0;   // Gaussian envelope standard deviation
  double scale = 0.0;      // C

  ApodizationTarget(double length_um, double sigma_um, double scale);
};

/// Target whose local duty (dA/dz) peaks at exactly 1 at z = L/2, i.e.
/// C = sigma sqrt(pi/2). A binary +-1 sequence can track any slope in [-1, 1].
ApodizationTarget gaussian_target(double length_um, double sigma_um);

/// exp(-sigma^2 dk^2 / 2).
double target_pmf(const ApodizationTarget& target, double dk);

/// C [erf(L / (2 sqrt2 sigma)) - erf((L - 2z) / (2 sqrt2 sigma))], z in [0, L].
double target_amplitude(const ApodizationTarget& target, double z_um);

enum class Frame { demodulated, physical };

std::string_view to_string(Frame frame);
Frame frame_from_string(std::string_view text);

/// Binary poling orientations g[j] = +-1, each domain `domain_length_um` long.
/// Demodulated sequences are expressed relative to the QPM carrier; physical
/// ones are the actual poled orientations.
class DomainSequence {
 public:
  DomainSequence(double domain_length_um, std::vector<std::int8_t> signs, Frame frame);

  double domain_length() const { return domain_length_; }
  std::size_t size() const { return signs_.size(); }
  double length() const { return domain_length_ * static_cast<double>(signs_.size()); }
  Frame frame() const { return frame_; }
  std::span<const std::int8_t> signs() const { return signs_; }
  int operator[](std::size_t j) const { return signs_[j]; }

  /// Number of positions where consecutive orientations differ.
  std::size_t domain_walls() const;

  friend bool operator==(const DomainSequence&, const DomainSequence&) = default;

 private:
  double domain_length_;
  std::vector<std::int8_t> signs_;
  Frame frame_;
};

/// All +1 sequence of round(L / Lc) domains.
DomainSequence uniform_sequence(double length_um, double domain_length_um,
                                Frame frame = Frame::demodulated);

/// Greedy cumulative-error tracking of the Gaussian target (demodulated frame).
/// Each g[j] minimises |A[j] - A_target(j Lc)|; ties keep the previous
/// orientation. The target is built over the realised length N Lc.
DomainSequence synthesize_domains(double length_um, double domain_length_um, double sigma_um);

/// Same greedy rule against an explicit target.
DomainSequence synthesize_domains(const ApodizationTarget& target, double domain_length_um);

/// Multiplies by the carrier (-1)^j (j counted from 0). Demodulated input only.
DomainSequence to_physical(const DomainSequence& seq);

/// Inverse of to_physical.
DomainSequence to_demodulated(const DomainSequence& seq);

/// Exact PMF sum over domains, in um:
///   (e^{i dk Lc} - 1) / (i dk) * sum_j g[j] e^{i dk (j-1) Lc}.
/// dk = 0 uses the analytic limit Lc * sum g.
std::complex<double> discrete_pmf(const DomainSequence& seq, double dk);

/// Cumulative amplitudes A[j] = Lc * sum_{m<=j} g[m], j = 1..N.
std::vector<double> cumulative_amplitude(const DomainSequence& seq);

/// max_j |A[j] - A_target(j Lc)|.
double tracking_error(const DomainSequence& seq, const ApodizationTarget& target);

struct PmfPeak {
  double dk = 0.0;
  double magnitude = 0.0;
};

/// Location and magnitude of the largest |phi| over one carrier period.
PmfPeak pmf_peak(const DomainSequence& seq);

/// |phi(dk_peak)| relative to a uniform grating of the same N and Lc, in [0, 1].
double brightness(const DomainSequence& seq);

struct GaussianFitQuality {
  double rms_error = 0.0;     // normalized |phi| vs exp(-sigma^2 dk^2/2), |dk| <= 3/sigma
  double worst_sidelobe = 0.0;  // max normalized |phi| over 4/sigma <= |dk| <= 20/sigma
};

/// Compares a demodulated sequence's normalized |phi| with the Gaussian target.
GaussianFitQuality gaussian_fit_quality(const DomainSequence& seq, double sigma_um,
                                        std::size_t samples = 2001);

}  // namespace qpm
