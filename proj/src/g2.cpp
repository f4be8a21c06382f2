#include <cmath>

#include "qpm/error.hpp"
#include "qpm/measurement.hpp"
#include "qpm/parallel.hpp"
#include "qpm/rng.hpp"

namespace qpm {

double g2_from_purity(double purity) {
  if (!(purity > 0.0 && purity <= 1.0)) throw InputError("purity must lie in (0, 1]");
  return 1.0 + purity;
}

double purity_from_g2(double g2_zero, double g2_infinity) {
  if (!(g2_infinity > 0.0)) throw InputError("g2 baseline must be positive");
  return g2_zero / g2_infinity - 1.0;
}

namespace {

struct BatchTally {
  double pulses = 0;
  double photons_a = 0, photons_b = 0, pairs_same = 0, pairs_adjacent = 0, adjacent_slots = 0;
  double clicks_a = 0, clicks_b = 0, clicks_both = 0;

  BatchTally& operator+=(const BatchTally& o) {
    pulses += o.pulses;
    photons_a += o.photons_a; photons_b += o.photons_b;
    pairs_same += o.pairs_same; pairs_adjacent += o.pairs_adjacent;
    adjacent_slots += o.adjacent_slots;
    clicks_a += o.clicks_a; clicks_b += o.clicks_b; clicks_both += o.clicks_both;
    return *this;
  }
  BatchTally operator-(const BatchTally& o) const {
    BatchTally r = *this;
    r.pulses -= o.pulses;
    r.photons_a -= o.photons_a; r.photons_b -= o.photons_b;
    r.pairs_same -= o.pairs_same; r.pairs_adjacent -= o.pairs_adjacent;
    r.adjacent_slots -= o.adjacent_slots;
    r.clicks_a -= o.clicks_a; r.clicks_b -= o.clicks_b; r.clicks_both -= o.clicks_both;
    return r;
  }
  double g2_pairs() const { return pulses * pairs_same / (photons_a * photons_b); }
  double g2_clicks() const { return pulses * clicks_both / (clicks_a * clicks_b); }
};

// Jackknife standard error of `stat` over leave-one-batch-out totals.
template <typename Stat>
double jackknife(const std::vector<BatchTally>& batches, const BatchTally& total, Stat stat) {
  const auto b = static_cast<double>(batches.size());
  std::vector<double> loo;
  loo.reserve(batches.size());
  double mean = 0.0;
  for (const auto& t : batches) {
    loo.push_back(stat(total - t));
    mean += loo.back();
  }
  mean /= b;
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt((b - 1.0) / b * ss);
}

}  // namespace

G2Estimate simulate_g2(const SchmidtResult& spectrum, const G2Options& opt) {
  if (!(opt.mean_photons > 0.0) || !std::isfinite(opt.mean_photons))
    throw InputError("mean photon number must be positive");
  if (opt.pulses < 100'000) throw InputError("simulate_g2 needs at least 1e5 pulses");
  if (opt.batches < 2 || opt.batches > opt.pulses) throw InputError("invalid batch count");
  if (!(opt.transmission > 0.0 && opt.transmission <= 1.0))
    throw InputError("transmission must lie in (0, 1]");

  // Modes beyond a 1e-12 tail contribute nothing measurable.
  std::vector<double> log_q;
  double kept = 0.0;
  for (double lambda : spectrum.coefficients) {
    if (lambda <= 0.0 || kept >= 1.0 - 1e-12) break;
    const double m = opt.mean_photons * lambda;
    log_q.push_back(std::log(m / (1.0 + m)));
    kept += lambda;
  }
  if (log_q.empty()) throw InputError("Schmidt spectrum is empty");
  std::vector<double> q(log_q.size());
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::exp(log_q[k]);

  std::vector<BatchTally> tallies(opt.batches);
  const std::uint64_t base = opt.pulses / opt.batches;
  const std::uint64_t extra = opt.pulses % opt.batches;
  parallel_for(opt.batches, opt.threads, [&](std::size_t b) {
    RandomStream rng(mix_seed(opt.seed, b));
    BatchTally t;
    const std::uint64_t count = base + (b < extra ? 1 : 0);
    double prev_a = 0.0;
    for (std::uint64_t p = 0; p < count; ++p) {
      int na = 0, nb = 0;
      for (std::size_t k = 0; k < q.size(); ++k) {
        // Thermal (geometric) photon number: P(n >= j) = q^j.
        const double u = rng.uniform_open_zero();
        if (u > q[k]) continue;
        const auto photons = static_cast<int>(std::floor(std::log(u) / log_q[k]));
        for (int ph = 0; ph < photons; ++ph) {
          if (opt.transmission < 1.0 && rng.uniform() >= opt.transmission) continue;
          (rng.uniform() < 0.5 ? na : nb) += 1;
        }
      }
      t.pulses += 1;
      t.photons_a += na;
      t.photons_b += nb;
      t.pairs_same += static_cast<double>(na) * nb;
      if (p > 0) {
        t.pairs_adjacent += prev_a * nb;
        t.adjacent_slots += 1;
      }
      prev_a = na;
      t.clicks_a += na > 0;
      t.clicks_b += nb > 0;
      t.clicks_both += (na > 0 && nb > 0);
    }
    tallies[b] = t;
  });

  BatchTally total;
  for (const auto& t : tallies) total += t;
  if (total.photons_a == 0 || total.photons_b == 0 || total.clicks_both == 0)
    throw NumericalError("too few detections for a g2 estimate; raise pulses or mean photons");

  G2Estimate e;
  e.pulses = opt.pulses;
  e.g2_zero = total.g2_pairs();
  e.standard_error = jackknife(tallies, total, [](const BatchTally& t) { return t.g2_pairs(); });
  e.g2_zero_clicks = total.g2_clicks();
  e.clicks_standard_error =
      jackknife(tallies, total, [](const BatchTally& t) { return t.g2_clicks(); });
  e.g2_infinity = (total.pairs_adjacent / total.adjacent_slots) /
                  ((total.photons_a / total.pulses) * (total.photons_b / total.pulses));
  e.coincidences = static_cast<std::uint64_t>(total.clicks_both);
  return e;
}

}  // namespace qpm
