#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "qpm/dispersion.hpp"

namespace qpm::test {

// n(lambda) sampled on [lo, hi] with the given knot spacing (um).
inline ModeTable sampled(const std::function<double(double)>& n, double lo, double hi,
                         double step) {
  ModeTable t;
  const auto count = static_cast<int>(std::lround((hi - lo) / step));
  for (int k = 0; k <= count; ++k) {
    const double x = lo + step * k;
    t.wavelength_um.push_back(x);
    t.index.push_back(n(x));
  }
  return t;
}

// n = a + b lambda has group index exactly a.
inline ModeTable with_group_index(double group_index, double slope, double lo = 0.6,
                                  double hi = 2.0) {
  return sampled([=](double x) { return group_index + slope * x; }, lo, hi, 0.05);
}

// Three modes "P", "S", "I" with constant indices.
inline DispersionModel constant_model(double np, double ns, double ni) {
  return DispersionModel({{"P", sampled([=](double) { return np; }, 0.6, 2.0, 0.05)},
                          {"S", sampled([=](double) { return ns; }, 0.6, 2.0, 0.05)},
                          {"I", sampled([=](double) { return ni; }, 0.6, 2.0, 0.05)}});
}

inline ProcessSpec pump_signal_idler(const DispersionModel& model, double pump_nm = 785.0,
                                     double signal_nm = 1520.0) {
  return make_process(model, {"P", pump_nm}, {"S", signal_nm}, "I");
}

}  // namespace qpm::test
