#include "qpm/apodization.hpp"

#include <algorithm>
#include <cmath>

#include "qpm/error.hpp"
#include "qpm/units.hpp"

namespace qpm {

namespace {

// sum_{j=0}^{N-1} g[j] e^{i theta j}. Four interleaved phasors break the
// multiply dependency; every block restarts them from an exact polar value.
std::complex<double> carrier_sum(std::span<const std::int8_t> g, double theta) {
  constexpr std::size_t kBlock = 512;
  const std::size_t n = g.size();
  double re = 0.0, im = 0.0;
  const std::complex<double> step4 = std::polar(1.0, 4.0 * theta);
  for (std::size_t start = 0; start < n; start += kBlock) {
    const std::size_t stop = std::min(n, start + kBlock);
    std::complex<double> p[4];
    for (int k = 0; k < 4; ++k) p[k] = std::polar(1.0, theta * static_cast<double>(start + k));
    double acc_re[4] = {0, 0, 0, 0}, acc_im[4] = {0, 0, 0, 0};
    std::size_t j = start;
    for (; j + 4 <= stop; j += 4) {
      for (int k = 0; k < 4; ++k) {
        const double s = g[j + k];
        acc_re[k] += s * p[k].real();
        acc_im[k] += s * p[k].imag();
        p[k] *= step4;
      }
    }
    for (int k = 0; j < stop; ++j, ++k) {
      acc_re[0] += g[j] * p[k].real();
      acc_im[0] += g[j] * p[k].imag();
    }
    re += (acc_re[0] + acc_re[1]) + (acc_re[2] + acc_re[3]);
    im += (acc_im[0] + acc_im[1]) + (acc_im[2] + acc_im[3]);
  }
  return {re, im};
}

// (e^{i dk Lc} - 1) / (i dk), written to stay accurate for small dk Lc.
std::complex<double> domain_factor(double dk, double lc) {
  if (dk == 0.0) return {lc, 0.0};
  const double half = 0.5 * dk * lc;
  const double s = std::sin(half);
  // e^{ix} - 1 = -2 sin^2(x/2) + i sin(x); divide by i dk.
  return {std::sin(dk * lc) / dk, 2.0 * s * s / dk};
}

double golden_max(const auto& f, double lo, double hi, int iterations = 60) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < iterations; ++it) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - kInvPhi * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + kInvPhi * (b - a); fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

ApodizationTarget::ApodizationTarget(double length, double sigma, double c)
    : length_um(length), sigma_um(sigma), scale(c) {
  if (!(length > 0.0) || !(sigma > 0.0) || !(c > 0.0) || !std::isfinite(length) ||
      !std::isfinite(sigma) || !std::isfinite(c))
    throw InputError("apodization target needs positive L, sigma and C");
}

ApodizationTarget gaussian_target(double length_um, double sigma_um) {
  return ApodizationTarget(length_um, sigma_um, sigma_um * std::sqrt(units::kPi / 2.0));
}

double target_pmf(const ApodizationTarget& target, double dk) {
  return std::exp(-0.5 * target.sigma_um * target.sigma_um * dk * dk);
}

double target_amplitude(const ApodizationTarget& t, double z_um) {
  if (!(z_um >= 0.0 && z_um <= t.length_um))
    throw InputError("target_amplitude: position outside [0, L]");
  const double w = 2.0 * std::sqrt(2.0) * t.sigma_um;
  return t.scale * (std::erf(t.length_um / w) - std::erf((t.length_um - 2.0 * z_um) / w));
}

std::string_view to_string(Frame frame) {
  return frame == Frame::demodulated ? "demodulated" : "physical";
}

Frame frame_from_string(std::string_view text) {
  if (text == "demodulated") return Frame::demodulated;
  if (text == "physical") return Frame::physical;
  throw InputError("unknown frame '" + std::string(text) + "'");
}

DomainSequence::DomainSequence(double domain_length_um, std::vector<std::int8_t> signs,
                               Frame frame)
    : domain_length_(domain_length_um), signs_(std::move(signs)), frame_(frame) {
  if (!(domain_length_ > 0.0) || !std::isfinite(domain_length_))
    throw InputError("domain length must be positive");
  if (signs_.empty()) throw InputError("domain sequence must contain at least one domain");
  for (auto s : signs_) {
    if (s != 1 && s != -1) throw InputError("domain orientations must be +1 or -1");
  }
}

std::size_t DomainSequence::domain_walls() const {
  std::size_t walls = 0;
  for (std::size_t j = 1; j < signs_.size(); ++j) walls += signs_[j] != signs_[j - 1];
  return walls;
}

namespace {

std::size_t domain_count(double length_um, double domain_length_um) {
  if (!(length_um > 0.0) || !(domain_length_um > 0.0) || !std::isfinite(length_um) ||
      !std::isfinite(domain_length_um))
    throw InputError("poled length and domain length must be positive");
  const double n = std::round(length_um / domain_length_um);
  if (n < 1.0) throw InputError("poled length is shorter than one domain");
  return static_cast<std::size_t>(n);
}

}  // namespace

DomainSequence uniform_sequence(double length_um, double domain_length_um, Frame frame) {
  std::vector<std::int8_t> g(domain_count(length_um, domain_length_um), 1);
  if (frame == Frame::physical) {
    for (std::size_t j = 1; j < g.size(); j += 2) g[j] = -1;
  }
  return DomainSequence(domain_length_um, std::move(g), frame);
}

DomainSequence synthesize_domains(double length_um, double domain_length_um, double sigma_um) {
  const std::size_t n = domain_count(length_um, domain_length_um);
  return synthesize_domains(
      gaussian_target(static_cast<double>(n) * domain_length_um, sigma_um), domain_length_um);
}

DomainSequence synthesize_domains(const ApodizationTarget& target, double domain_length_um) {
  const std::size_t n = domain_count(target.length_um, domain_length_um);
  std::vector<std::int8_t> g(n);
  double cumulative = 0.0;
  std::int8_t previous = 1;
  for (std::size_t j = 1; j <= n; ++j) {
    const double z = std::min(static_cast<double>(j) * domain_length_um, target.length_um);
    const double wanted = target_amplitude(target, z);
    const double err_up = std::abs(cumulative + domain_length_um - wanted);
    const double err_down = std::abs(cumulative - domain_length_um - wanted);
    std::int8_t s = previous;
    if (err_up < err_down) s = 1;
    else if (err_down < err_up) s = -1;
    g[j - 1] = s;
    cumulative += s * domain_length_um;
    previous = s;
  }
  return DomainSequence(domain_length_um, std::move(g), Frame::demodulated);
}

DomainSequence to_physical(const DomainSequence& seq) {
  if (seq.frame() != Frame::demodulated)
    throw InputError("to_physical expects a demodulated sequence");
  std::vector<std::int8_t> g(seq.signs().begin(), seq.signs().end());
  for (std::size_t j = 1; j < g.size(); j += 2) g[j] = static_cast<std::int8_t>(-g[j]);
  return DomainSequence(seq.domain_length(), std::move(g), Frame::physical);
}

DomainSequence to_demodulated(const DomainSequence& seq) {
  if (seq.frame() != Frame::physical)
    throw InputError("to_demodulated expects a physical sequence");
  std::vector<std::int8_t> g(seq.signs().begin(), seq.signs().end());
  for (std::size_t j = 1; j < g.size(); j += 2) g[j] = static_cast<std::int8_t>(-g[j]);
  return DomainSequence(seq.domain_length(), std::move(g), Frame::demodulated);
}

std::complex<double> discrete_pmf(const DomainSequence& seq, double dk) {
  const double lc = seq.domain_length();
  if (dk == 0.0) {
    double sum = 0.0;
    for (auto s : seq.signs()) sum += s;
    return {sum * lc, 0.0};
  }
  return domain_factor(dk, lc) * carrier_sum(seq.signs(), dk * lc);
}

std::vector<double> cumulative_amplitude(const DomainSequence& seq) {
  std::vector<double> a(seq.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < seq.size(); ++j) {
    acc += seq[j] * seq.domain_length();
    a[j] = acc;
  }
  return a;
}

double tracking_error(const DomainSequence& seq, const ApodizationTarget& target) {
  const auto a = cumulative_amplitude(seq);
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double z =
        std::min(static_cast<double>(j + 1) * seq.domain_length(), target.length_um);
    worst = std::max(worst, std::abs(a[j] - target_amplitude(target, z)));
  }
  return worst;
}

PmfPeak pmf_peak(const DomainSequence& seq) {
  const double lc = seq.domain_length();
  const double n = static_cast<double>(seq.size());
  // |phi(-dk)| = |phi(dk)| for real g, and the sum is 2 pi / Lc periodic, so
  // one period on the positive side holds the global maximum.
  const double step = units::kPi / (2.0 * n * lc);
  const auto samples = static_cast<std::size_t>(4.0 * n) + 1;
  auto mag = [&](double dk) { return std::abs(discrete_pmf(seq, dk)); };
  PmfPeak best{0.0, mag(0.0)};
  for (std::size_t m = 1; m < samples; ++m) {
    const double dk = static_cast<double>(m) * step;
    const double v = mag(dk);
    if (v > best.magnitude) best = {dk, v};
  }
  const double lo = std::max(0.0, best.dk - step);
  const double refined = golden_max(mag, lo, best.dk + step);
  if (const double v = mag(refined); v > best.magnitude) best = {refined, v};
  return best;
}

double brightness(const DomainSequence& seq) {
  const double reference = seq.length();  // |phi_uniform(0)| = N Lc
  return std::min(1.0, pmf_peak(seq).magnitude / reference);
}

GaussianFitQuality gaussian_fit_quality(const DomainSequence& seq, double sigma_um,
                                        std::size_t samples) {
  if (samples < 2) throw InputError("gaussian_fit_quality needs at least two samples");
  GaussianFitQuality q;
  const double peak = std::abs(discrete_pmf(seq, 0.0));
  if (peak == 0.0) throw InputError("sequence has zero PMF at dk = 0");
  const auto norm = [&](double dk) { return std::abs(discrete_pmf(seq, dk)) / peak; };
  double sum_sq = 0.0;
  for (std::size_t m = 0; m < samples; ++m) {
    const double dk = 3.0 / sigma_um * static_cast<double>(m) / static_cast<double>(samples - 1);
    const double d = norm(dk) - std::exp(-0.5 * sigma_um * sigma_um * dk * dk);
    sum_sq += d * d;
  }
  q.rms_error = std::sqrt(sum_sq / static_cast<double>(samples));
  for (std::size_t m = 0; m < samples; ++m) {
    const double dk = (4.0 + 16.0 * static_cast<double>(m) / static_cast<double>(samples - 1)) /
                      sigma_um;
    q.worst_sidelobe = std::max(q.worst_sidelobe, norm(dk));
  }
  return q;
}

}  // namespace qpm
