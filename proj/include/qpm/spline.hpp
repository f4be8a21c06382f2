#pragma once

#include <span>
#include <vector>

namespace qpm {

/// Natural cubic spline through (x, y) knots with strictly increasing x.
/// Evaluation outside [x.front(), x.back()] is a hard error.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

  double value(double x) const;
  double derivative(double x) const;

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }
  bool contains(double x) const { return x >= x_.front() && x <= x_.back(); }

  std::span<const double> knots() const { return x_; }
  std::span<const double> values() const { return y_; }

 private:
  std::size_t interval(double x) const;

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

}  // namespace qpm
