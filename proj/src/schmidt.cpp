#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "qpm/error.hpp"
#include "qpm/spectrum.hpp"

namespace qpm {

SchmidtResult SchmidtResult::from_coefficients(std::vector<double> lambdas) {
  if (lambdas.empty()) throw InputError("Schmidt spectrum is empty");
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l))
      throw InputError("Schmidt coefficients must be finite and nonnegative");
  }
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  const double total = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
  if (!(total > 0.0)) throw InputError("Schmidt coefficients sum to zero");
  SchmidtResult r;
  double p = 0.0;
  for (double& l : lambdas) {
    l /= total;
    p += l * l;
  }
  r.coefficients = std::move(lambdas);
  r.purity = p;
  r.schmidt_number = 1.0 / p;
  return r;
}

Eigen::MatrixXcd SchmidtResult::reconstruct() const {
  if (!signal_modes || !idler_modes) throw InputError("Schmidt modes were not retained");
  const Eigen::Index k = signal_modes->cols();
  Eigen::VectorXcd weights(k);
  for (Eigen::Index n = 0; n < k; ++n) weights[n] = std::sqrt(coefficients[static_cast<std::size_t>(n)]);
  return *signal_modes * weights.asDiagonal() * idler_modes->transpose();
}

namespace {

SchmidtResult decompose(const Eigen::MatrixXcd& f, bool keep_modes) {
  if (!f.allFinite()) throw InputError("Schmidt decomposition of a non-finite matrix");
  const unsigned flags = keep_modes ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(f, flags);
  if (svd.info() != Eigen::Success)
    throw NumericalError("singular value decomposition did not converge");
  const Eigen::VectorXd s = svd.singularValues();
  std::vector<double> lambdas(static_cast<std::size_t>(s.size()));
  for (Eigen::Index n = 0; n < s.size(); ++n) lambdas[static_cast<std::size_t>(n)] = s[n] * s[n];
  // Singular values arrive sorted, so the mode columns stay aligned.
  SchmidtResult r = SchmidtResult::from_coefficients(std::move(lambdas));
  if (keep_modes) {
    r.signal_modes = svd.matrixU();
    r.idler_modes = svd.matrixV().conjugate();
  }
  return r;
}

}  // namespace

SchmidtResult schmidt(const JointSpectrum& js, bool keep_modes) {
  return decompose(js.amplitude, keep_modes);
}

SchmidtResult schmidt_from_jsi(const Eigen::MatrixXd& intensity) {
  if ((intensity.array() < 0.0).any()) throw InputError("JSI has negative entries");
  return decompose(intensity.cwiseSqrt().cast<std::complex<double>>(), false);
}

double purity_from_reduced_density(const Eigen::MatrixXcd& f) {
  const Eigen::MatrixXcd rho = f * f.adjoint();
  const double trace = rho.trace().real();
  if (!(trace > 0.0)) throw InputError("reduced density matrix has zero trace");
  return rho.squaredNorm() / (trace * trace);
}

}  // namespace qpm
