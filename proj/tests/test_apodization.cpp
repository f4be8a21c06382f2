#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

#include "qpm/apodization.hpp"
#include "qpm/error.hpp"
#include "qpm/units.hpp"

using namespace qpm;

namespace {

constexpr double kPi = units::kPi;

// erf by composite Simpson quadrature of 2/sqrt(pi) exp(-t^2).
double erf_by_quadrature(double x) {
  const int panels = 20000;
  const double h = x / panels;
  double sum = 1.0 + std::exp(-x * x);
  for (int k = 1; k < panels; ++k) {
    const double t = h * k;
    sum += (k % 2 ? 4.0 : 2.0) * std::exp(-t * t);
  }
  return 2.0 / std::sqrt(kPi) * sum * h / 3.0;
}

enum class Rule { midpoint, simpson };

// Brute-force integral_0^{N Lc} g(z) e^{i dk z} dz, slice by slice.
// The midpoint rule is off by (dk h)^2 / 24, so it only resolves 1e-9 for |dk Lc| < 1.5.
std::complex<double> pmf_by_slices(const DomainSequence& seq, double dk, Rule rule,
                                   int slices_per_domain = 10000) {
  const double lc = seq.domain_length();
  const double h = lc / slices_per_domain;
  auto e = [dk](double z) { return std::complex<long double>(std::cos(dk * z), std::sin(dk * z)); };
  std::complex<long double> total = 0.0L;
  for (std::size_t j = 0; j < seq.size(); ++j) {
    const double z0 = static_cast<double>(j) * lc;
    std::complex<long double> part = 0.0L;
    for (int s = 0; s < slices_per_domain; ++s) {
      const double a = z0 + s * h;
      if (rule == Rule::midpoint)
        part += e(a + 0.5 * h);
      else
        part += (e(a) + 4.0L * e(a + 0.5 * h) + e(a + h)) / 6.0L;
    }
    total += static_cast<long double>(seq[j]) * part;
  }
  return {static_cast<double>(total.real() * h), static_cast<double>(total.imag() * h)};
}

DomainSequence random_sequence(std::mt19937_64& rng, std::size_t n, double lc, Frame frame) {
  std::vector<std::int8_t> g(n);
  for (auto& s : g) s = (rng() & 1u) ? 1 : -1;
  return DomainSequence(lc, std::move(g), frame);
}

std::vector<std::int8_t> signs_of(const DomainSequence& seq) {
  return {seq.signs().begin(), seq.signs().end()};
}

}  // namespace

TEST_CASE("target PMF") {
  const ApodizationTarget t(1000.0, 200.0, 1.0);
  CHECK(target_pmf(t, 0.0) == 1.0);
  CHECK(target_pmf(t, 1.0 / 200.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(target_pmf(t, 1.0 / 200.0) == doctest::Approx(0.6065).epsilon(1e-4));
  for (double dk : {0.001, 0.004, 0.02}) CHECK(target_pmf(t, dk) == target_pmf(t, -dk));
}

TEST_CASE("target cumulative amplitude") {
  SUBCASE("endpoints") {
    const ApodizationTarget t(1.0, 0.2, 1.0);
    CHECK(target_amplitude(t, 0.0) == 0.0);
    const double x = 1.0 / (2.0 * std::sqrt(2.0) * 0.2);
    CHECK(target_amplitude(t, 0.5) == doctest::Approx(erf_by_quadrature(x)).epsilon(1e-12));
    CHECK(target_amplitude(t, 1.0) == doctest::Approx(2.0 * erf_by_quadrature(x)).epsilon(1e-12));
    CHECK(target_amplitude(t, 1.0) == doctest::Approx(1.9752).epsilon(1e-4));
  }
  SUBCASE("rejects positions outside the grating") {
    const ApodizationTarget t(1.0, 0.2, 1.0);
    CHECK_THROWS_AS(target_amplitude(t, -1e-9), InputError);
    CHECK_THROWS_AS(target_amplitude(t, 1.0 + 1e-9), InputError);
  }
  SUBCASE("invalid targets") {
    CHECK_THROWS_AS(ApodizationTarget(0.0, 1.0, 1.0), InputError);
    CHECK_THROWS_AS(ApodizationTarget(1.0, -1.0, 1.0), InputError);
    CHECK_THROWS_AS(ApodizationTarget(1.0, 1.0, 0.0), InputError);
  }
  SUBCASE("nondecreasing for random parameters") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
      const ApodizationTarget t(100.0, 100.0 * u(rng), u(rng));
      double previous = 0.0;
      for (int k = 0; k <= 500; ++k) {
        const double a = target_amplitude(t, 100.0 * k / 500.0);
        CHECK(a >= previous);
        previous = a;
      }
    }
  }
  SUBCASE("Gaussian target has unit peak duty") {
    const auto t = gaussian_target(1000.0, 200.0);
    const double h = 1e-3;
    const double slope = (target_amplitude(t, 500.0 + h) - target_amplitude(t, 500.0 - h)) / (2 * h);
    CHECK(slope == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("greedy synthesis") {
  SUBCASE("flat envelope gives a uniform grating") {
    const auto seq = synthesize_domains(1000.0, 2.0, 1e4 * 1000.0);
    CHECK(seq.size() == 500);
    CHECK(std::all_of(seq.signs().begin(), seq.signs().end(), [](auto s) { return s == 1; }));
    CHECK(seq.frame() == Frame::demodulated);
  }
  SUBCASE("N = 4 reaches the exhaustive optimum") {
    const double lc = 1.0, length = 4.0;
    const auto target = gaussian_target(length, length / 5.0);
    const auto greedy = synthesize_domains(length, lc, length / 5.0);
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < 16; ++mask) {
      std::vector<std::int8_t> g(4);
      for (int j = 0; j < 4; ++j) g[j] = (mask >> j) & 1u ? 1 : -1;
      best = std::min(best, tracking_error(DomainSequence(lc, g, Frame::demodulated), target));
    }
    CHECK(tracking_error(greedy, target) == doctest::Approx(best).epsilon(1e-12));
  }
  SUBCASE("-1 density is symmetric about the centre within one domain") {
    for (double frac : {0.1, 0.2, 0.5}) {
      const auto seq = synthesize_domains(100.0, 1.0, 100.0 * frac);
      REQUIRE(seq.size() == 100);
      int head = 0, tail = 0, worst = 0;
      for (std::size_t k = 0; k < seq.size(); ++k) {
        head += seq[k] == -1;
        tail += seq[seq.size() - 1 - k] == -1;
        worst = std::max(worst, std::abs(head - tail));
      }
      CHECK(worst <= 1);
    }
  }
  SUBCASE("tracking error stays within one domain") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> frac(0.08, 2.0);
    std::uniform_int_distribution<int> count(1, 3000);
    for (int trial = 0; trial < 40; ++trial) {
      const double lc = 1.5;
      const double length = lc * count(rng);
      const double sigma = frac(rng) * length;
      const auto seq = synthesize_domains(length, lc, sigma);
      CHECK(tracking_error(seq, gaussian_target(seq.length(), sigma)) <= lc * (1.0 + 1e-12));
    }
  }
  SUBCASE("deterministic") {
    CHECK(synthesize_domains(9200.0, 1.54, 1840.0) == synthesize_domains(9200.0, 1.54, 1840.0));
  }
  SUBCASE("invalid geometry") {
    CHECK_THROWS_AS(synthesize_domains(100.0, 0.0, 20.0), InputError);
    CHECK_THROWS_AS(synthesize_domains(100.0, -1.0, 20.0), InputError);
    CHECK_THROWS_AS(synthesize_domains(-100.0, 1.0, 20.0), InputError);
    CHECK_THROWS_AS(synthesize_domains(100.0, 1.0, 0.0), InputError);
    CHECK_THROWS_AS(synthesize_domains(0.4, 1.0, 20.0), InputError);
  }
}

TEST_CASE("domain sequence invariants") {
  CHECK_THROWS_AS(DomainSequence(1.0, {}, Frame::demodulated), InputError);
  CHECK_THROWS_AS(DomainSequence(1.0, {1, 0, -1}, Frame::demodulated), InputError);
  CHECK_THROWS_AS(DomainSequence(0.0, {1}, Frame::demodulated), InputError);
  const DomainSequence s(1.0, {1, 1, -1, -1, 1}, Frame::demodulated);
  CHECK(s.domain_walls() == 2);
  CHECK(s.length() == 5.0);
  CHECK(cumulative_amplitude(s) == std::vector<double>{1.0, 2.0, 1.0, 0.0, 1.0});
}

TEST_CASE("frame conversion") {
  using V = std::vector<std::int8_t>;
  CHECK(signs_of(to_physical(DomainSequence(1.0, {1, 1, 1, 1}, Frame::demodulated))) ==
        V{1, -1, 1, -1});
  CHECK(signs_of(to_physical(DomainSequence(1.0, {-1, -1, -1, -1}, Frame::demodulated))) ==
        V{-1, 1, -1, 1});
  CHECK(signs_of(to_physical(DomainSequence(1.0, {1, 1, -1, -1}, Frame::demodulated))) ==
        V{1, -1, -1, 1});
  CHECK(to_physical(uniform_sequence(10.0, 1.0)) == uniform_sequence(10.0, 1.0, Frame::physical));

  const DomainSequence phys(1.0, {1, -1}, Frame::physical);
  CHECK_THROWS_AS(to_physical(phys), InputError);
  CHECK_THROWS_AS(to_demodulated(to_demodulated(phys)), InputError);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto seq = random_sequence(rng, 1 + rng() % 50, 1.3, Frame::demodulated);
    CHECK(to_demodulated(to_physical(seq)) == seq);
  }
}

TEST_CASE("discrete PMF closed forms") {
  SUBCASE("single domain") {
    const DomainSequence one(2.5, {1}, Frame::demodulated);
    CHECK(discrete_pmf(one, 0.0) == std::complex<double>(2.5, 0.0));
    CHECK(std::abs(discrete_pmf(one, 1e-9)) == doctest::Approx(2.5).epsilon(1e-15));
  }
  SUBCASE("physical carrier gives 2/pi of the length") {
    for (std::size_t n : {1u, 2u, 7u, 64u, 1001u}) {
      const double lc = 1.54;
      const auto seq = uniform_sequence(lc * n, lc, Frame::physical);
      const double mag = std::abs(discrete_pmf(seq, kPi / lc));
      CHECK(mag == doctest::Approx(2.0 / kPi * n * lc).epsilon(1e-9));
    }
  }
  SUBCASE("physical carrier with even N cancels at dk = 0") {
    const auto seq = uniform_sequence(1.0 * 200, 1.0, Frame::physical);
    CHECK(std::abs(discrete_pmf(seq, 0.0)) < 1e-12);
  }
  SUBCASE("uniform demodulated grating is a sinc") {
    const double lc = 1.54;
    const auto seq = uniform_sequence(9200.0, lc);
    const double length = seq.length();
    for (int k = -400; k <= 400; ++k) {
      const double dk = 0.05 * k * 2.0 * kPi / length;
      const double x = dk * length / 2.0;
      const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
      CHECK(std::abs(std::abs(discrete_pmf(seq, dk)) / length - std::abs(sinc)) < 1e-6);
    }
  }
}

TEST_CASE("discrete PMF matches brute-force integration") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const double lc = 0.5 + 2.0 * std::uniform_real_distribution<double>()(rng);
    const Frame frame = trial % 2 ? Frame::physical : Frame::demodulated;
    const auto seq = random_sequence(rng, 1 + rng() % 64, lc, frame);

    const double dk = std::uniform_real_distribution<double>(-kPi / lc, kPi / lc)(rng);
    const auto exact = discrete_pmf(seq, dk);
    const auto simpson = pmf_by_slices(seq, dk, Rule::simpson);
    CHECK(std::abs(exact - simpson) / std::abs(simpson) < 1e-9);

    const double near = std::uniform_real_distribution<double>(-1.0 / lc, 1.0 / lc)(rng);
    const auto midpoint = pmf_by_slices(seq, near, Rule::midpoint);
    CHECK(std::abs(discrete_pmf(seq, near) - midpoint) / std::abs(midpoint) < 1e-9);
  }
}

TEST_CASE("PMF symmetry") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto half = random_sequence(rng, 1 + rng() % 40, 1.1, Frame::demodulated);
    std::vector<std::int8_t> g = signs_of(half);
    g.insert(g.end(), g.rbegin() + (trial % 2), g.rend());  // odd and even palindromes
    const DomainSequence pal(1.1, g, Frame::demodulated);
    for (double dk : {0.013, 0.4, 1.7}) {
      CHECK(std::abs(discrete_pmf(pal, dk)) == doctest::Approx(std::abs(discrete_pmf(pal, -dk))));
      const auto centred = discrete_pmf(pal, dk) * std::polar(1.0, -dk * pal.length() / 2.0);
      CHECK(std::abs(centred.imag()) <= 1e-10 * pal.length());
    }
  }
}

TEST_CASE("brightness") {
  CHECK(brightness(uniform_sequence(500.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  const DomainSequence alternating(1.0, {1, -1, 1, -1}, Frame::demodulated);
  CHECK(std::abs(discrete_pmf(alternating, 0.0)) == 0.0);
  CHECK(brightness(alternating) < 1.0);
  CHECK(brightness(uniform_sequence(3000 * 1.54, 1.54, Frame::physical)) ==
        doctest::Approx(2.0 / kPi).epsilon(1e-3));

  // Regression pin for the sigma = L/5 trade-off point.
  const auto gaussian = synthesize_domains(3000 * 1.54, 1.54, 3000 * 1.54 / 5.0);
  const double b = brightness(gaussian);
  CHECK(b > 0.0);
  CHECK(b < 1.0);
  CHECK(b == doctest::Approx(0.49509).epsilon(1e-3));
}

TEST_CASE("Gaussian design quality") {
  const double lc = 1.54;
  const auto seq = synthesize_domains(1000 * lc, lc, 1000 * lc / 5.0);
  const auto q = gaussian_fit_quality(seq, seq.length() / 5.0);
  CHECK(q.rms_error < 0.02);
  CHECK(q.worst_sidelobe < 0.01);

  // The same check on a uniform grating fails loudly.
  const auto flat = gaussian_fit_quality(uniform_sequence(1000 * lc, lc), 1000 * lc / 5.0);
  CHECK(flat.worst_sidelobe > 0.05);
}
