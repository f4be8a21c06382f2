#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "qpm/apodization.hpp"
#include "qpm/error.hpp"
#include "qpm/reference_model.hpp"
#include "qpm/spectrum.hpp"
#include "qpm/units.hpp"
#include "support.hpp"

using namespace qpm;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

namespace {

constexpr double kLength = 9200.0;
constexpr double kLc = 1.54;

struct Reference {
  DispersionModel model = reference_model();
  ProcessSpec spec = reference_process(model);
};

const Reference& ref() {
  static const Reference r;
  return r;
}

const DomainSequence& gaussian_design() {
  static const DomainSequence seq = synthesize_domains(kLength, kLc, kLength / 5.0);
  return seq;
}

// Gaussian design with the 4.5 nm pump on the default grid.
const JointSpectrum& gaussian_jsa(std::size_t points) {
  static std::map<std::size_t, JointSpectrum> cache;
  auto it = cache.find(points);
  if (it == cache.end()) {
    const PumpEnvelope pump(785.0, 4.5);
    it = cache
             .emplace(points, compute_jsa(ref().model, ref().spec, gaussian_design(), pump,
                                          default_grid(ref().spec, pump, points)))
             .first;
  }
  return it->second;
}

FrequencyGrid toy_grid(std::size_t n) {
  return FrequencyGrid({1.20e15, 1.21e15, n}, {1.10e15, 1.11e15, n});
}

VectorXd gaussian_samples(const Axis& a, double mu, double s, int hermite = 0) {
  VectorXd v(static_cast<Eigen::Index>(a.points));
  for (std::size_t k = 0; k < a.points; ++k) {
    const double x = (a.at(k) - mu) / s;
    v[static_cast<Eigen::Index>(k)] = (hermite == 1 ? x : 1.0) * std::exp(-x * x / 2.0);
  }
  return v;
}

JointSpectrum from_matrix(const FrequencyGrid& g, MatrixXcd f) {
  normalize_amplitude(f, g.cell_area());
  return JointSpectrum(g, std::move(f));
}

double relative_frobenius(const MatrixXcd& a, const MatrixXcd& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace

TEST_CASE("pump envelope") {
  const PumpEnvelope pump(784.0, 4.5);
  const double expected = 2.0 * 3.141592653589793 * 2.99792458e14 * 4.5e-3 / (0.784 * 0.784);
  CHECK(pump.fwhm_omega() == doctest::Approx(expected).epsilon(1e-14));
  CHECK(pump.fwhm_omega() == doctest::Approx(1.380e13).epsilon(1e-3));
  CHECK(pump_envelope(pump, pump.center_omega()) == 1.0);
  for (double sign : {-1.0, 1.0}) {
    const double a = pump_envelope(pump, pump.center_omega() + sign * pump.fwhm_omega() / 2.0);
    CHECK(a * a == doctest::Approx(0.5).epsilon(1e-12));
  }
  CHECK_THROWS_AS(PumpEnvelope(784.0, 0.0), InputError);
  CHECK_THROWS_AS(PumpEnvelope(-1.0, 4.5), InputError);
}

TEST_CASE("frequency grid invariants") {
  CHECK_THROWS_AS(FrequencyGrid({1.0e15, 1.1e15, 15}, {1.0e15, 1.1e15, 16}), InputError);
  CHECK_THROWS_AS(FrequencyGrid({1.1e15, 1.0e15, 16}, {1.0e15, 1.1e15, 16}), InputError);
  const auto g = default_grid(ref().spec, PumpEnvelope(785.0, 4.5), 64, 4.0);
  CHECK(g.signal.at(0) + g.signal.at(63) == doctest::Approx(2.0 * ref().spec.signal_omega()));
  CHECK(g.idler.max - g.idler.min ==
        doctest::Approx(8.0 * PumpEnvelope(785.0, 4.5).sigma_omega()));
}

TEST_CASE("JSA of a uniform grating with linear dispersion") {
  // Constant indices make the mismatch exactly linear in the detunings, so
  // f = alpha(ws + wi) L sinc(dk L / 2) e^{i dk L / 2} in closed form.
  const double np = 2.3, ns = 2.2, ni = 2.1;
  const auto model = test::constant_model(np, ns, ni);
  const auto spec = with_solved_period(model, test::pump_signal_idler(model));
  const DomainSequence seq = uniform_sequence(800 * 2.0, 2.0);
  const PumpEnvelope pump(785.0, 2.0);
  const auto grid = default_grid(spec, pump, 64);
  const auto js = compute_jsa(model, spec, seq, pump, grid);

  const double c = units::kSpeedOfLight;
  const double length = seq.length();
  MatrixXcd oracle(64, 64);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t k = 0; k < 64; ++k) {
      const double ds = grid.signal.at(r) - spec.signal_omega();
      const double di = grid.idler.at(k) - spec.idler_omega();
      const double dk = ((np - ns) * ds + (np - ni) * di) / c;
      const double x = dk * length / 2.0;
      const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
      const double omega = ds + di;
      oracle(r, k) = std::exp(-omega * omega / (4.0 * std::pow(pump.sigma_omega(), 2))) * sinc *
                     std::polar(1.0, x);
    }
  }
  normalize_amplitude(oracle, grid.cell_area());
  CHECK(relative_frobenius(js.amplitude, oracle) < 1e-8);

  SUBCASE("linearized mismatch is exact for linear dispersion") {
    JsaOptions lin;
    lin.mismatch = JsaOptions::MismatchModel::linearized;
    CHECK(relative_frobenius(compute_jsa(model, spec, seq, pump, grid, lin).amplitude,
                             js.amplitude) < 1e-8);
  }
}

TEST_CASE("JSA normalization and JSI") {
  const auto& js = gaussian_jsa(128);
  const Eigen::MatrixXd i = jsi(js);
  CHECK(i.minCoeff() >= 0.0);
  CHECK(i.sum() * js.grid.cell_area() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(i == js.amplitude.cwiseAbs2());
  const auto m = marginals(js);
  CHECK(m.signal.sum() * js.grid.signal.step() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(m.idler.sum() * js.grid.idler.step() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("cw limit collapses onto the energy-conservation line") {
  const PumpEnvelope pump(785.0, 1e-4);
  const auto grid = default_grid(ref().spec, pump, 256, 40.0);
  const auto js = compute_jsa(ref().model, ref().spec, uniform_sequence(kLength, kLc), pump, grid);
  const Eigen::MatrixXd i = jsi(js);
  // Both axes share the step, so ws + wi lands on a lattice of anti-diagonals.
  REQUIRE(grid.signal.step() == doctest::Approx(grid.idler.step()).epsilon(1e-12));
  double mean = 0.0, second = 0.0, inside = 0.0;
  const double sigma = pump.sigma_omega();
  for (Eigen::Index r = 0; r < i.rows(); ++r) {
    for (Eigen::Index k = 0; k < i.cols(); ++k) {
      const double omega = grid.signal.at(r) + grid.idler.at(k) - pump.center_omega();
      const double w = i(r, k) * grid.cell_area();
      mean += w * omega;
      second += w * omega * omega;
      if (std::abs(omega) <= 3.0 * sigma) inside += w;
    }
  }
  const double width = std::sqrt(second - mean * mean);
  CHECK(inside > 0.99);
  CHECK(width == doctest::Approx(sigma).epsilon(0.05));
  CHECK(schmidt(js).schmidt_number > 10.0);
}

TEST_CASE("single domain follows the pump") {
  const PumpEnvelope pump(785.0, 4.5);
  const DomainSequence one(kLc, {1}, Frame::demodulated);
  SUBCASE("|f| proportional to |alpha|") {
    const auto grid = default_grid(ref().spec, pump, 64);
    const auto js = compute_jsa(ref().model, ref().spec, one, pump, grid);
    const double fmax = js.amplitude.cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (std::size_t r = 0; r < 64; ++r)
      for (std::size_t k = 0; k < 64; ++k)
        worst = std::max(worst, std::abs(std::abs(js.amplitude(r, k)) / fmax -
                                         pump_envelope(pump, grid.signal.at(r) + grid.idler.at(k))));
    CHECK(worst < 1e-6);
  }
  SUBCASE("nearly separable on a grid narrow against the pump") {
    const auto js = compute_jsa(ref().model, ref().spec, one, pump,
                                default_grid(ref().spec, pump, 64, 0.25));
    CHECK(schmidt(js).purity > 0.99);
  }
}

TEST_CASE("marginals") {
  const auto g = toy_grid(48);
  SUBCASE("separable product") {
    const VectorXd a = gaussian_samples(g.signal, 1.204e15, 1.0e12);
    const VectorXd b = gaussian_samples(g.idler, 1.107e15, 2.0e12);
    const auto js = from_matrix(g, (a * b.transpose()).cast<std::complex<double>>());
    const auto m = marginals(js);
    const VectorXd sa = a.cwiseAbs2() / (a.squaredNorm() * g.signal.step());
    const VectorXd sb = b.cwiseAbs2() / (b.squaredNorm() * g.idler.step());
    CHECK((m.signal - sa).norm() / sa.norm() < 1e-12);
    CHECK((m.idler - sb).norm() / sb.norm() < 1e-12);
  }
  SUBCASE("swap-symmetric amplitude") {
    const FrequencyGrid square({1.20e15, 1.21e15, 48}, {1.20e15, 1.21e15, 48});
    const VectorXd a = gaussian_samples(square.signal, 1.204e15, 1.0e12);
    const VectorXd b = gaussian_samples(square.signal, 1.206e15, 2.0e12);
    const MatrixXcd f = (a * b.transpose() + b * a.transpose()).cast<std::complex<double>>();
    const auto m = marginals(from_matrix(square, f));
    CHECK((m.signal - m.idler).norm() < 1e-12 * m.signal.norm());
  }
  SUBCASE("Gaussian design marginals are Gaussian") {
    const auto& js = gaussian_jsa(256);
    const auto m = marginals(js);
    VectorXd ws(256), wi(256);
    for (std::size_t k = 0; k < 256; ++k) {
      ws[k] = js.grid.signal.at(k) * 1e-12;
      wi[k] = js.grid.idler.at(k) * 1e-12;
    }
    CHECK(fit_gaussian(ws, m.signal).r_squared > 0.995);
    CHECK(fit_gaussian(wi, m.idler).r_squared > 0.995);
  }
}

TEST_CASE("Schmidt decomposition") {
  const auto g = toy_grid(64);
  const double mid_s = (g.signal.min + g.signal.max) / 2.0;
  const double mid_i = (g.idler.min + g.idler.max) / 2.0;

  SUBCASE("separable Gaussian product is rank one") {
    const VectorXd a = gaussian_samples(g.signal, mid_s, 1.0e12);
    const VectorXd b = gaussian_samples(g.idler, mid_i, 1.5e12);
    const auto r = schmidt(from_matrix(g, (a * b.transpose()).cast<std::complex<double>>()));
    CHECK(r.coefficients[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.purity == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.schmidt_number == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two equal orthogonal components") {
    // Even and odd Hermite-Gaussians on a symmetric grid are exactly orthogonal.
    VectorXd u0 = gaussian_samples(g.signal, mid_s, 1.0e12, 0).normalized();
    VectorXd u1 = gaussian_samples(g.signal, mid_s, 1.0e12, 1).normalized();
    VectorXd v0 = gaussian_samples(g.idler, mid_i, 1.0e12, 0).normalized();
    VectorXd v1 = gaussian_samples(g.idler, mid_i, 1.0e12, 1).normalized();
    const MatrixXcd f = (u0 * v0.transpose() + u1 * v1.transpose()).cast<std::complex<double>>();
    const auto r = schmidt(from_matrix(g, f));
    CHECK(r.coefficients[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.coefficients[1] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.purity == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.schmidt_number == doctest::Approx(2.0).epsilon(1e-10));
  }
  SUBCASE("Schmidt number and purity") {
    CHECK(purity_from_schmidt_number(1.06) == doctest::Approx(0.943).epsilon(1e-3));
    const auto r = SchmidtResult::from_coefficients({0.2, 0.7, 0.1});
    REQUIRE(r.coefficients.size() == 3);
    CHECK(r.coefficients[0] == doctest::Approx(0.7));
    CHECK(r.coefficients[1] == doctest::Approx(0.2));
    CHECK(r.coefficients[2] == doctest::Approx(0.1));
    CHECK(r.purity == doctest::Approx(0.54));
    CHECK(r.schmidt_number == doctest::Approx(1.0 / 0.54));
    CHECK_THROWS_AS(SchmidtResult::from_coefficients({0.5, -0.1}), InputError);
  }
}

TEST_CASE("Schmidt modes on the reference design") {
  const auto& js = gaussian_jsa(128);
  const auto r = schmidt(js, true);
  REQUIRE(r.signal_modes.has_value());
  REQUIRE(r.idler_modes.has_value());
  double sum = 0.0;
  for (double l : r.coefficients) sum += l;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::is_sorted(r.coefficients.rbegin(), r.coefficients.rend()));

  const MatrixXcd& u = *r.signal_modes;
  const MatrixXcd& v = *r.idler_modes;
  const auto eye = MatrixXcd::Identity(u.cols(), u.cols());
  CHECK((u.adjoint() * u - eye).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((v.adjoint() * v - MatrixXcd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff() < 1e-8);

  // Coefficients are normalized, so compare against the unit-Frobenius amplitude.
  const MatrixXcd unit = js.amplitude / js.amplitude.norm();
  CHECK(relative_frobenius(r.reconstruct(), unit) < 1e-8);
}

TEST_CASE("purity invariances") {
  const auto& js = gaussian_jsa(128);
  const double p = schmidt(js).purity;
  CHECK(schmidt(js.transposed()).purity == doctest::Approx(p).epsilon(1e-10));
  const JointSpectrum rotated(js.grid, js.amplitude * std::polar(1.0, 1.234));
  CHECK(schmidt(rotated).purity == doctest::Approx(p).epsilon(1e-10));
  CHECK(purity_from_reduced_density(js.amplitude) == doctest::Approx(p).epsilon(1e-10));

  // For a real nonnegative amplitude the JSI-only route is exact.
  const JointSpectrum magnitude(js.grid, js.amplitude.cwiseAbs().cast<std::complex<double>>());
  CHECK(schmidt_from_jsi(jsi(magnitude)).purity ==
        doctest::Approx(schmidt(magnitude).purity).epsilon(1e-10));
}

TEST_CASE("grid convergence at the default resolution") {
  const double fine = schmidt(gaussian_jsa(512)).purity;
  const double coarse = schmidt(gaussian_jsa(256)).purity;
  CHECK(std::abs(fine - coarse) < 0.002);
}

TEST_CASE("spectral filtering never lowers purity") {
  const PumpEnvelope pump(785.0, 2.36);
  const auto js = compute_jsa(ref().model, ref().spec, uniform_sequence(kLength, kLc), pump,
                              default_grid(ref().spec, pump, 128));
  double previous = schmidt(js).purity;
  const double centre = ref().spec.signal.wavelength_nm;
  for (double width : {12.0, 8.0, 6.0, 4.0, 3.0, 2.0, 1.5, 1.0}) {
    const double p = schmidt(spectral_window(js, Arm::signal, centre - width / 2,
                                             centre + width / 2)).purity;
    CHECK(p >= previous - 1e-12);
    previous = p;
  }
  CHECK_THROWS_AS(spectral_window(js, Arm::idler, 1600.0, 1590.0), InputError);
}

TEST_CASE("sigma sweep") {
  const PumpEnvelope pump(785.0, 4.5);
  SweepOptions opt;
  opt.grid_points = 128;
  const std::vector<double> sigmas{kLength / 3, kLength / 4, kLength / 5, kLength / 6,
                                   kLength / 8};
  const auto rows = sweep_sigma(ref().model, ref().spec, pump, kLength, kLc, sigmas, opt);
  REQUIRE(rows.size() == sigmas.size());
  for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k].brightness <= rows[k - 1].brightness);
  CHECK(rows[2].sigma_um == kLength / 5);
  CHECK(rows[2].purity >= 0.98);
  for (const auto& row : rows) CHECK(row.pump_fwhm_nm == 4.5);

  SUBCASE("wide envelope approaches the uniform grating") {
    const auto wide = sweep_sigma(ref().model, ref().spec, pump, kLength, kLc, {100 * kLength}, opt);
    const auto uniform = compute_jsa(ref().model, ref().spec, uniform_sequence(kLength, kLc), pump,
                                     default_grid(ref().spec, pump, 128));
    CHECK(wide[0].purity == doctest::Approx(schmidt(uniform).purity).epsilon(0.01));
    CHECK(wide[0].brightness > 0.999);
  }
  SUBCASE("rejects nonpositive sigma") {
    CHECK_THROWS_AS(sweep_sigma(ref().model, ref().spec, pump, kLength, kLc, {-1.0}, opt),
                    InputError);
  }
}

TEST_CASE("SFG map") {
  const auto& spec = ref().spec;
  const WavelengthAxis s{1512.0, 1528.0, 81};
  const WavelengthAxis i{1614.0, 1633.0, 81};
  auto dk_at = [&](std::size_t r, std::size_t c) {
    return phase_mismatch(ref().model, spec, units::omega_from_nm(s.at(r)),
                          units::omega_from_nm(i.at(c)));
  };

  SUBCASE("uniform grating has a sinc cross-section") {
    const auto seq = uniform_sequence(kLength, kLc);
    const auto map = sfg_map(ref().model, spec, seq, s, i);
    double worst = 0.0;
    for (std::size_t r = 0; r < 81; ++r)
      for (std::size_t c = 0; c < 81; ++c) {
        const double x = dk_at(r, c) * seq.length() / 2.0;
        const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
        worst = std::max(worst, std::abs(map.power(r, c) / std::pow(seq.length(), 2) - sinc * sinc));
      }
    CHECK(worst < 1e-9);
    CHECK(ridge_slope(map) > 0.0);
  }
  SUBCASE("Gaussian design suppresses sidelobes") {
    const auto map = sfg_map(ref().model, spec, gaussian_design(), s, i);
    const double peak = map.power.maxCoeff();
    const double sigma = kLength / 5.0;
    double worst = 0.0;
    for (std::size_t r = 0; r < 81; ++r)
      for (std::size_t c = 0; c < 81; ++c)
        if (std::abs(dk_at(r, c)) >= 4.0 / sigma) worst = std::max(worst, map.power(r, c) / peak);
    CHECK(worst < 0.01);
    CHECK(ridge_slope(map) > 0.0);
    CHECK(pmf_angle(ref().model, spec) > 0.0);
  }
}
