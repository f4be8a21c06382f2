#include "qpm/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "qpm/error.hpp"
#include "qpm/parallel.hpp"
#include "qpm/units.hpp"

namespace qpm {

PumpEnvelope::PumpEnvelope(double center, double fwhm) : center_nm(center), fwhm_nm(fwhm) {
  if (!(center > 0.0) || !(fwhm > 0.0) || !std::isfinite(center) || !std::isfinite(fwhm))
    throw InputError("pump centre wavelength and bandwidth must be positive");
}

double PumpEnvelope::center_omega() const { return units::omega_from_nm(center_nm); }
double PumpEnvelope::fwhm_omega() const { return units::omega_width_from_nm(center_nm, fwhm_nm); }
double PumpEnvelope::sigma_omega() const { return fwhm_omega() * units::kFwhmToSigma; }

double pump_envelope(const PumpEnvelope& pump, double omega) {
  const double d = omega - pump.center_omega();
  const double s = pump.sigma_omega();
  return std::exp(-d * d / (4.0 * s * s));
}

FrequencyGrid::FrequencyGrid(Axis s, Axis i) : signal(s), idler(i) {
  for (const Axis* a : {&signal, &idler}) {
    if (a->points < 16) throw InputError("frequency grid needs at least 16 points per axis");
    if (!(a->max > a->min) || !(a->min > 0.0))
      throw InputError("frequency grid axes need 0 < min < max");
  }
}

FrequencyGrid default_grid(const ProcessSpec& spec, const PumpEnvelope& pump, std::size_t points,
                           double half_width_sigmas) {
  const double half = half_width_sigmas * pump.sigma_omega();
  const double ws = spec.signal_omega();
  const double wi = spec.idler_omega();
  return FrequencyGrid({ws - half, ws + half, points}, {wi - half, wi + half, points});
}

JointSpectrum::JointSpectrum(FrequencyGrid g, Eigen::MatrixXcd a)
    : grid(g), amplitude(std::move(a)) {
  if (static_cast<std::size_t>(amplitude.rows()) != grid.signal.points ||
      static_cast<std::size_t>(amplitude.cols()) != grid.idler.points)
    throw InputError("JSA matrix shape does not match its grid");
  if (!amplitude.allFinite()) throw InputError("JSA contains non-finite entries");
}

JointSpectrum JointSpectrum::transposed() const {
  return JointSpectrum(FrequencyGrid(grid.idler, grid.signal), amplitude.transpose());
}

void normalize_amplitude(Eigen::MatrixXcd& f, double cell_area) {
  const double total = f.squaredNorm() * cell_area;
  if (!(total > 0.0) || !std::isfinite(total))
    throw InputError("cannot normalize a zero or non-finite amplitude");
  f /= std::sqrt(total);
}

JointSpectrum compute_jsa(const DispersionModel& model, const ProcessSpec& spec,
                          const DomainSequence& seq, const PumpEnvelope& pump,
                          const FrequencyGrid& grid, const JsaOptions& options) {
  const Mismatch kind = seq.frame() == Frame::demodulated ? Mismatch::baseband : Mismatch::full;
  const std::size_t ns = grid.signal.points, ni = grid.idler.points;
  Eigen::MatrixXcd f(ns, ni);

  if (options.mismatch == JsaOptions::MismatchModel::linearized) {
    // Affine in (ws, wi): evaluate the coefficients once.
    const double ws0 = spec.signal_omega(), wi0 = spec.idler_omega();
    const double dk0 = linearized_mismatch(model, spec, ws0, wi0, kind);
    const double cs = linearized_mismatch(model, spec, ws0 + 1.0, wi0, kind) - dk0;
    const double ci = linearized_mismatch(model, spec, ws0, wi0 + 1.0, kind) - dk0;
    parallel_for(ns, options.threads, [&](std::size_t r) {
      const double ws = grid.signal.at(r);
      for (std::size_t c = 0; c < ni; ++c) {
        const double wi = grid.idler.at(c);
        const double dk = dk0 + cs * (ws - ws0) + ci * (wi - wi0);
        f(r, c) = pump_envelope(pump, ws + wi) * discrete_pmf(seq, dk);
      }
    });
  } else {
    // k_s and k_i depend on one axis each; only k_p needs every point.
    std::vector<double> ks(ns), ki(ni);
    for (std::size_t r = 0; r < ns; ++r) {
      ks[r] = model.wavenumber(spec.signal.mode, units::um_from_omega(grid.signal.at(r)));
    }
    for (std::size_t c = 0; c < ni; ++c) {
      ki[c] = model.wavenumber(spec.idler.mode, units::um_from_omega(grid.idler.at(c)));
    }
    double grating = 0.0;
    if (kind == Mismatch::baseband) {
      if (!spec.poling_period_um) throw InputError("poling period has not been solved");
      grating = units::kTwoPi / *spec.poling_period_um;
    }
    const NaturalCubicSpline& pump_index = model.spline(spec.pump.mode);
    parallel_for(ns, options.threads, [&](std::size_t r) {
      const double ws = grid.signal.at(r);
      for (std::size_t c = 0; c < ni; ++c) {
        const double wp = ws + grid.idler.at(c);
        const double lp = units::um_from_omega(wp);
        if (!pump_index.contains(lp))
          throw InputError("pump wavelength on the grid falls outside the pump mode table");
        const double kp = units::kTwoPi * pump_index.value(lp) / lp;
        const double dk = kp - ks[r] - ki[c] - grating;
        f(r, c) = pump_envelope(pump, wp) * discrete_pmf(seq, dk);
      }
    });
  }
  normalize_amplitude(f, grid.cell_area());
  return JointSpectrum(grid, std::move(f));
}

Eigen::MatrixXd jsi(const JointSpectrum& js) { return js.amplitude.cwiseAbs2(); }

Marginals marginals(const JointSpectrum& js) {
  const Eigen::MatrixXd intensity = jsi(js);
  Marginals m;
  m.signal = intensity.rowwise().sum() * js.grid.idler.step();
  m.idler = intensity.colwise().sum().transpose() * js.grid.signal.step();
  return m;
}

JointSpectrum spectral_window(const JointSpectrum& js, Arm arm, double min_nm, double max_nm) {
  if (!(max_nm > min_nm)) throw InputError("spectral window needs max > min");
  Eigen::MatrixXcd f = js.amplitude;
  const Axis& axis = arm == Arm::signal ? js.grid.signal : js.grid.idler;
  for (std::size_t k = 0; k < axis.points; ++k) {
    const double nm = units::nm_from_omega(axis.at(k));
    if (nm >= min_nm && nm <= max_nm) continue;
    if (arm == Arm::signal) f.row(static_cast<Eigen::Index>(k)).setZero();
    else f.col(static_cast<Eigen::Index>(k)).setZero();
  }
  normalize_amplitude(f, js.grid.cell_area());
  return JointSpectrum(js.grid, std::move(f));
}

GaussianFit fit_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 4) throw InputError("fit_gaussian needs >= 4 points");
  // Moment estimates seed a Levenberg-Marquardt refinement.
  const double wsum = y.sum();
  if (!(wsum > 0.0)) throw InputError("fit_gaussian needs positive data");
  double mean = x.dot(y) / wsum;
  double var = (x.array() - mean).square().matrix().dot(y) / wsum;
  Eigen::Vector3d p(y.maxCoeff(), mean, std::sqrt(std::max(var, 1e-300)));

  auto residuals = [&](const Eigen::Vector3d& q) {
    Eigen::VectorXd r(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double u = (x[k] - q[1]) / q[2];
      r[k] = y[k] - q[0] * std::exp(-0.5 * u * u);
    }
    return r;
  };
  double lambda = 1e-3;
  Eigen::VectorXd r = residuals(p);
  for (int it = 0; it < 200; ++it) {
    Eigen::MatrixXd jac(x.size(), 3);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double u = (x[k] - p[1]) / p[2];
      const double e = std::exp(-0.5 * u * u);
      jac(k, 0) = e;
      jac(k, 1) = p[0] * e * u / p[2];
      jac(k, 2) = p[0] * e * u * u / p[2];
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * r;
    Eigen::Matrix3d damped = jtj;
    damped.diagonal() *= 1.0 + lambda;
    const Eigen::Vector3d delta = damped.ldlt().solve(jtr);
    const Eigen::Vector3d trial = p + delta;
    if (trial[2] <= 0.0) { lambda *= 10.0; continue; }
    const Eigen::VectorXd rt = residuals(trial);
    if (rt.squaredNorm() < r.squaredNorm()) {
      const double gain = r.squaredNorm() - rt.squaredNorm();
      p = trial;
      r = rt;
      lambda = std::max(lambda / 10.0, 1e-12);
      if (gain <= 1e-15 * r.squaredNorm()) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  const double ss_tot = (y.array() - y.mean()).square().sum();
  return {p[0], p[1], std::abs(p[2]), 1.0 - r.squaredNorm() / ss_tot};
}

double optimize_pump_bandwidth(const DispersionModel& model, const ProcessSpec& spec,
                               const DomainSequence& seq, double center_nm,
                               std::size_t grid_points, double lo_nm, double hi_nm,
                               const JsaOptions& options) {
  if (!(lo_nm > 0.0) || !(hi_nm > lo_nm)) throw InputError("invalid pump bandwidth bracket");
  auto purity_at = [&](double log_fwhm) {
    const PumpEnvelope pump(center_nm, std::exp(log_fwhm));
    const auto js = compute_jsa(model, spec, seq, pump, default_grid(spec, pump, grid_points),
                                options);
    return schmidt(js).purity;
  };
  // Coarse scan first: the purity curve is unimodal near its peak but the
  // bracket may be wide.
  constexpr int kScan = 13;
  const double a = std::log(lo_nm), b = std::log(hi_nm);
  int best = 0;
  double best_value = -1.0;
  for (int k = 0; k < kScan; ++k) {
    const double v = purity_at(a + (b - a) * k / (kScan - 1));
    if (v > best_value) { best_value = v; best = k; }
  }
  const double step = (b - a) / (kScan - 1);
  double lo = a + step * std::max(best - 1, 0), hi = a + step * std::min(best + 1, kScan - 1);
  constexpr double kInvPhi = 0.6180339887498949;
  double c = hi - kInvPhi * (hi - lo), d = lo + kInvPhi * (hi - lo);
  double fc = purity_at(c), fd = purity_at(d);
  for (int it = 0; it < 20; ++it) {
    if (fc > fd) {
      hi = d; d = c; fd = fc;
      c = hi - kInvPhi * (hi - lo); fc = purity_at(c);
    } else {
      lo = c; c = d; fc = fd;
      d = lo + kInvPhi * (hi - lo); fd = purity_at(d);
    }
  }
  return std::exp(0.5 * (lo + hi));
}

std::vector<SweepRow> sweep_sigma(const DispersionModel& model, const ProcessSpec& spec,
                                  const PumpEnvelope& pump, double length_um,
                                  double domain_length_um, const std::vector<double>& sigmas_um,
                                  const SweepOptions& options) {
  if (sigmas_um.empty()) throw InputError("sigma sweep needs at least one value");
  for (double s : sigmas_um) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("sigma values must be positive");
  }
  std::vector<SweepRow> rows;
  for (double sigma : sigmas_um) {
    const DomainSequence seq = synthesize_domains(length_um, domain_length_um, sigma);
    PumpEnvelope row_pump = pump;
    if (options.optimize_pump) {
      row_pump = PumpEnvelope(pump.center_nm,
                              optimize_pump_bandwidth(model, spec, seq, pump.center_nm, 128,
                                                      0.2, 20.0, options.jsa));
    }
    const auto js = compute_jsa(model, spec, seq, row_pump,
                                default_grid(spec, row_pump, options.grid_points), options.jsa);
    rows.push_back({sigma, schmidt(js).purity, brightness(seq), row_pump.fwhm_nm});
  }
  return rows;
}

SfgMap sfg_map(const DispersionModel& model, const ProcessSpec& spec, const DomainSequence& seq,
               const WavelengthAxis& signal, const WavelengthAxis& idler, unsigned threads) {
  if (signal.points < 2 || idler.points < 2 || !(signal.max_nm > signal.min_nm) ||
      !(idler.max_nm > idler.min_nm))
    throw InputError("SFG map axes need at least two points and max > min");
  const Mismatch kind = seq.frame() == Frame::demodulated ? Mismatch::baseband : Mismatch::full;
  SfgMap map{signal, idler, Eigen::MatrixXd(signal.points, idler.points)};
  parallel_for(signal.points, threads, [&](std::size_t r) {
    const double ws = units::omega_from_nm(signal.at(r));
    for (std::size_t c = 0; c < idler.points; ++c) {
      const double dk = phase_mismatch(model, spec, ws, units::omega_from_nm(idler.at(c)), kind);
      map.power(r, c) = std::norm(discrete_pmf(seq, dk));
    }
  });
  return map;
}

double ridge_slope(const SfgMap& map) {
  const double global = map.power.maxCoeff();
  std::vector<double> xs, ys;
  for (Eigen::Index r = 0; r < map.power.rows(); ++r) {
    Eigen::Index c = 0;
    const double peak = map.power.row(r).maxCoeff(&c);
    if (peak < 0.5 * global) continue;
    double offset = 0.0;
    if (c > 0 && c + 1 < map.power.cols()) {
      const double a = map.power(r, c - 1), b = map.power(r, c), d = map.power(r, c + 1);
      const double denom = a - 2.0 * b + d;
      if (denom != 0.0) offset = 0.5 * (a - d) / denom;
    }
    const double step = (map.idler.max_nm - map.idler.min_nm) / static_cast<double>(map.idler.points - 1);
    xs.push_back(map.signal.at(static_cast<std::size_t>(r)));
    ys.push_back(map.idler.at(static_cast<std::size_t>(c)) + offset * step);
  }
  if (xs.size() < 2) throw InputError("SFG map has no resolvable ridge");
  const auto n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k]; sy += ys[k]; sxx += xs[k] * xs[k]; sxy += xs[k] * ys[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace qpm
