#include "qpm/spline.hpp"

#include <algorithm>
#include <cmath>

#include "qpm/error.hpp"

namespace qpm {

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n != y_.size()) throw InputError("spline: knot and value counts differ");
  if (n < 4) throw InputError("spline: at least 4 knots are required");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]))
      throw InputError("spline: non-finite knot");
    if (i > 0 && !(x_[i] > x_[i - 1]))
      throw InputError("spline: abscissae must be strictly increasing");
  }

  // Tridiagonal system for the interior second derivatives; m_[0] = m_[n-1] = 0.
  m_.assign(n, 0.0);
  std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1];
    const double h1 = x_[i + 1] - x_[i];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  // Thomas algorithm; the lower diagonal entry of row i is h_{i-1}.
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double lower = x_[i] - x_[i - 1];
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
  }
}

std::size_t NaturalCubicSpline::interval(double x) const {
  if (!(x >= x_.front() && x <= x_.back()))
    throw InputError("spline: evaluation point outside the tabulated span");
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - x_.begin());
  if (i == 0) return 0;
  return std::min(i - 1, x_.size() - 2);
}

double NaturalCubicSpline::value(double x) const {
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double NaturalCubicSpline::derivative(double x) const {
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return (y_[i + 1] - y_[i]) / h +
         ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

}  // namespace qpm
