#include "qpm/measurement.hpp"

#include <algorithm>
#include <cmath>

#include "qpm/error.hpp"
#include "qpm/parallel.hpp"
#include "qpm/rng.hpp"
#include "qpm/units.hpp"

namespace qpm {

namespace {

constexpr std::uint64_t kChunk = 1u << 16;

double dispersion_product(const SpectrometerConfig& cfg) {
  return cfg.dispersion_ps_per_nm_km * cfg.fiber_length_km;  // ps / nm
}

// Cumulative weights of a flattened (row-major) JSI.
std::vector<double> cumulative_weights(const Eigen::MatrixXd& jsi) {
  const auto rows = static_cast<std::size_t>(jsi.rows());
  const auto cols = static_cast<std::size_t>(jsi.cols());
  std::vector<double> cdf(rows * cols);
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double w = jsi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("JSI entries must be finite and >= 0");
      acc += w;
      cdf[r * cols + c] = acc;
    }
  }
  if (!(acc > 0.0)) throw InputError("cannot sample from an all-zero JSI");
  return cdf;
}

// Draws one pair (angular frequencies) from the discrete distribution.
struct PairSampler {
  const std::vector<double>& cdf;
  const FrequencyGrid& grid;

  std::pair<double, double> operator()(RandomStream& rng) const {
    const double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    // Zero-weight cells share a cdf value with their predecessor and are never picked.
    if (it == cdf.end()) --it;
    const auto flat = static_cast<std::size_t>(it - cdf.begin());
    const std::size_t r = flat / grid.idler.points;
    const std::size_t c = flat % grid.idler.points;
    const double ws = grid.signal.at(r) + (rng.uniform() - 0.5) * grid.signal.step();
    const double wi = grid.idler.at(c) + (rng.uniform() - 0.5) * grid.idler.step();
    return {ws, wi};
  }
};

void check_grid_shape(const Eigen::MatrixXd& jsi, const FrequencyGrid& grid) {
  if (static_cast<std::size_t>(jsi.rows()) != grid.signal.points ||
      static_cast<std::size_t>(jsi.cols()) != grid.idler.points)
    throw InputError("JSI shape does not match its grid");
}

}  // namespace

void SpectrometerConfig::validate() const {
  if (!(fiber_length_km > 0.0) || !(dispersion_ps_per_nm_km > 0.0))
    throw InputError("fiber length and dispersion coefficient must be positive");
  if (!(jitter_fwhm_ps >= 0.0)) throw InputError("detector jitter must be nonnegative");
  if (!(bin_width_ps > 0.0)) throw InputError("histogram bin width must be positive");
  if (jitter_fwhm_ps > 0.0 && bin_width_ps > jitter_fwhm_ps)
    throw InputError("histogram bin width must not exceed the detector jitter");
  if (!(signal_reference_nm > 0.0) || !(idler_reference_nm > 0.0))
    throw InputError("reference wavelengths must be positive");
  for (double t : {signal_transmission, idler_transmission}) {
    if (!(t > 0.0 && t <= 1.0)) throw InputError("transmission must lie in (0, 1]");
  }
}

double spectral_resolution(const SpectrometerConfig& cfg) {
  return cfg.jitter_fwhm_ps / dispersion_product(cfg);
}

double freq_to_time(double wavelength_nm, const SpectrometerConfig& cfg, Arm arm) {
  return dispersion_product(cfg) * (wavelength_nm - cfg.reference_nm(arm));
}

double time_to_wavelength(double delay_ps, const SpectrometerConfig& cfg, Arm arm) {
  return cfg.reference_nm(arm) + delay_ps / dispersion_product(cfg);
}

std::uint64_t CoincidenceHistogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::vector<PhotonPair> sample_pairs(const Eigen::MatrixXd& jsi, const FrequencyGrid& grid,
                                     std::uint64_t n, std::uint64_t seed, unsigned threads) {
  if (n < 1) throw InputError("sample_pairs needs n >= 1");
  check_grid_shape(jsi, grid);
  const auto cdf = cumulative_weights(jsi);
  const PairSampler draw{cdf, grid};
  std::vector<PhotonPair> out(n);
  const std::uint64_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, threads, [&](std::size_t chunk) {
    RandomStream rng(mix_seed(seed, chunk));
    const std::uint64_t stop = std::min<std::uint64_t>(n, (chunk + 1) * kChunk);
    for (std::uint64_t k = chunk * kChunk; k < stop; ++k) {
      const auto [ws, wi] = draw(rng);
      out[k] = {units::nm_from_omega(ws), units::nm_from_omega(wi)};
    }
  });
  return out;
}

CoincidenceHistogram acquire(const JointSpectrum& js, const SpectrometerConfig& cfg,
                             std::uint64_t n, std::uint64_t seed, unsigned threads) {
  cfg.validate();
  if (n < 1) throw InputError("acquire needs n >= 1");
  const Eigen::MatrixXd intensity = jsi(js);
  const auto cdf = cumulative_weights(intensity);
  const FrequencyGrid& grid = js.grid;
  const PairSampler draw{cdf, grid};

  // Bin geometry covers the dithered grid plus 6 jitter standard deviations.
  const double jitter_sigma = cfg.jitter_fwhm_ps * units::kFwhmToSigma;
  const double margin = 6.0 * jitter_sigma + cfg.bin_width_ps;
  auto time_span = [&](const Axis& axis, Arm arm) {
    const double hi_nm = units::nm_from_omega(axis.min - 0.5 * axis.step());
    const double lo_nm = units::nm_from_omega(axis.max + 0.5 * axis.step());
    return std::pair{freq_to_time(lo_nm, cfg, arm) - margin,
                     freq_to_time(hi_nm, cfg, arm) + margin};
  };
  CoincidenceHistogram h;
  h.bin_width_ps = cfg.bin_width_ps;
  h.trials = n;
  const auto [s_lo, s_hi] = time_span(grid.signal, Arm::signal);
  const auto [i_lo, i_hi] = time_span(grid.idler, Arm::idler);
  h.signal_origin_ps = std::floor(s_lo / cfg.bin_width_ps) * cfg.bin_width_ps;
  h.idler_origin_ps = std::floor(i_lo / cfg.bin_width_ps) * cfg.bin_width_ps;
  h.signal_bins = static_cast<std::size_t>(std::ceil((s_hi - h.signal_origin_ps) / cfg.bin_width_ps));
  h.idler_bins = static_cast<std::size_t>(std::ceil((i_hi - h.idler_origin_ps) / cfg.bin_width_ps));
  h.counts.assign(h.signal_bins * h.idler_bins, 0);

  const std::uint64_t chunks = (n + kChunk - 1) / kChunk;
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, chunks);
  // Integer counts merge associatively, so per-worker partial histograms give
  // the same result for any worker count.
  std::vector<std::vector<std::uint64_t>> partial(workers);
  parallel_for(workers, static_cast<unsigned>(workers), [&](std::size_t w) {
    auto& local = partial[w];
    local.assign(h.counts.size(), 0);
    for (std::uint64_t chunk = w; chunk < chunks; chunk += workers) {
      RandomStream rng(mix_seed(seed, chunk));
      const std::uint64_t stop = std::min<std::uint64_t>(n, (chunk + 1) * kChunk);
      for (std::uint64_t k = chunk * kChunk; k < stop; ++k) {
        const auto [ws, wi] = draw(rng);
        bool detected = true;
        if (cfg.signal_transmission < 1.0) detected &= rng.uniform() < cfg.signal_transmission;
        if (cfg.idler_transmission < 1.0) detected &= rng.uniform() < cfg.idler_transmission;
        double ts = freq_to_time(units::nm_from_omega(ws), cfg, Arm::signal);
        double ti = freq_to_time(units::nm_from_omega(wi), cfg, Arm::idler);
        if (jitter_sigma > 0.0) {
          ts += jitter_sigma * rng.normal();
          ti += jitter_sigma * rng.normal();
        }
        if (!detected) continue;
        const double bs = std::floor((ts - h.signal_origin_ps) / cfg.bin_width_ps);
        const double bi = std::floor((ti - h.idler_origin_ps) / cfg.bin_width_ps);
        if (bs < 0 || bi < 0 || bs >= static_cast<double>(h.signal_bins) ||
            bi >= static_cast<double>(h.idler_bins))
          continue;
        ++local[static_cast<std::size_t>(bs) * h.idler_bins + static_cast<std::size_t>(bi)];
      }
    }
  });
  for (const auto& local : partial) {
    for (std::size_t k = 0; k < local.size(); ++k) h.counts[k] += local[k];
  }
  return h;
}

namespace {

struct Share {
  std::size_t cell;
  double fraction;
};

// For each histogram bin on one arm, the target cells its wavelength interval
// overlaps and the fraction of the bin that falls in each.
std::vector<std::vector<Share>> bin_shares(std::size_t bins, double origin_ps, double width_ps,
                                           const SpectrometerConfig& cfg, Arm arm,
                                           const Axis& axis) {
  std::vector<std::vector<Share>> out(bins);
  const double step = axis.step();
  const double lower_edge = axis.min - 0.5 * step;
  for (std::size_t b = 0; b < bins; ++b) {
    const double t0 = origin_ps + width_ps * static_cast<double>(b);
    const double l0 = time_to_wavelength(t0, cfg, arm);
    const double l1 = time_to_wavelength(t0 + width_ps, cfg, arm);
    const double w_hi = units::omega_from_nm(l0), w_lo = units::omega_from_nm(l1);
    const double first = std::floor((w_lo - lower_edge) / step);
    const double last = std::floor((w_hi - lower_edge) / step);
    for (double m = std::max(first, 0.0); m <= last && m < static_cast<double>(axis.points); ++m) {
      const auto cell = static_cast<std::size_t>(m);
      // Cell edges in wavelength; overlap measured in wavelength, where the
      // bin density is uniform.
      const double c_lo = units::nm_from_omega(lower_edge + step * (m + 1.0));
      const double c_hi = units::nm_from_omega(lower_edge + step * m);
      const double overlap = std::min(l1, c_hi) - std::max(l0, c_lo);
      if (overlap > 0.0) out[b].push_back({cell, overlap / (l1 - l0)});
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd reconstruct_jsi(const CoincidenceHistogram& h, const SpectrometerConfig& cfg,
                                const FrequencyGrid& target) {
  cfg.validate();
  if (h.counts.size() != h.signal_bins * h.idler_bins) throw InputError("malformed histogram");
  if (h.total() == 0) throw InputError("cannot reconstruct from an empty histogram");
  const auto s_shares =
      bin_shares(h.signal_bins, h.signal_origin_ps, h.bin_width_ps, cfg, Arm::signal, target.signal);
  const auto i_shares =
      bin_shares(h.idler_bins, h.idler_origin_ps, h.bin_width_ps, cfg, Arm::idler, target.idler);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(target.signal.points, target.idler.points);
  for (std::size_t s = 0; s < h.signal_bins; ++s) {
    if (s_shares[s].empty()) continue;
    for (std::size_t i = 0; i < h.idler_bins; ++i) {
      const std::uint64_t count = h.at(s, i);
      if (count == 0) continue;
      for (const Share& a : s_shares[s]) {
        for (const Share& b : i_shares[i]) {
          out(static_cast<Eigen::Index>(a.cell), static_cast<Eigen::Index>(b.cell)) +=
              static_cast<double>(count) * a.fraction * b.fraction;
        }
      }
    }
  }
  const double sum = out.sum();
  if (!(sum > 0.0)) throw InputError("no histogram counts fall inside the target grid");
  out /= sum * target.cell_area();
  return out;
}

double relative_l2_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("matrix shapes differ");
  return (a - b).norm() / b.norm();
}

SchmidtResult filtered_schmidt(const JointSpectrum& js, Arm arm, double min_nm, double max_nm) {
  return schmidt(spectral_window(js, arm, min_nm, max_nm));
}

}  // namespace qpm
