#include "fertsae/priors.hpp"

#include <cmath>

#include "fertsae/errors.hpp"

namespace fertsae {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

PcSigmaPrior PcSigmaPrior::make(double U, double alpha) {
  require(U > 0, ErrorCode::invalid_argument, "PC sigma prior needs U > 0");
  require(alpha > 0 && alpha < 1, ErrorCode::invalid_argument,
          "PC sigma prior needs 0 < alpha < 1");
  return PcSigmaPrior{U, alpha, -std::log(alpha) / U};
}

double PcSigmaPrior::log_density(double sigma) const {
  if (!(sigma > 0)) return -std::numeric_limits<double>::infinity();
  return std::log(rate) - rate * sigma;
}

double PcSigmaPrior::log_density_at_log_sigma(double log_sigma) const {
  return log_density(std::exp(log_sigma)) + log_sigma;
}

double PcSigmaPrior::cdf(double sigma) const {
  return sigma <= 0 ? 0.0 : 1.0 - std::exp(-rate * sigma);
}

PcPhiPrior PcPhiPrior::make(const StructureMatrix& spatial, double U, double alpha) {
  require(spatial.scaled, ErrorCode::invalid_argument,
          "PC phi prior requires a scaled spatial structure");
  require(U > 0 && U < 1 && alpha > 0 && alpha < 1, ErrorCode::invalid_argument,
          "PC phi prior needs U, alpha in (0,1)");
  PcPhiPrior p;
  double tol = std::max(spatial.eigenvalues.cwiseAbs().maxCoeff() * 1e-9, 1e-12);
  for (int i = 0; i < spatial.eigenvalues.size(); ++i)
    if (spatial.eigenvalues[i] > tol)
      p.gamma_tilde_.push_back(1.0 / spatial.eigenvalues[i]);
  require(!p.gamma_tilde_.empty(), ErrorCode::invalid_argument,
          "spatial structure has no positive eigenvalues");
  p.d_one_ = p.distance(1.0);

  // Solve CDF(U) = alpha for the rate; signed rates keep the quantile
  // statement exact for the truncated exponential-in-distance family.
  auto cdf_at = [&](double lambda) {
    double dU = p.distance(U);
    if (std::abs(lambda) < 1e-12) return dU / p.d_one_;
    return -std::expm1(-lambda * dU) / -std::expm1(-lambda * p.d_one_);
  };
  double lo = -1e6, hi = 1e6;
  require(cdf_at(lo) < alpha && cdf_at(hi) > alpha, ErrorCode::numeric,
          "PC phi prior calibration out of range");
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    (cdf_at(mid) < alpha ? lo : hi) = mid;
  }
  p.rate_ = 0.5 * (lo + hi);
  return p;
}

double PcPhiPrior::distance(double phi) const {
  // d(phi) = sqrt( sum phi (g-1) - sum log(1 + phi (g-1)) ), over the
  // positive spectrum of the scaled structure's generalized covariance.
  double s = 0;
  for (double g : gamma_tilde_) {
    double t = phi * (g - 1.0);
    s += t - std::log1p(t);
  }
  return std::sqrt(std::max(s, 0.0));
}

double PcPhiPrior::distance_derivative(double phi) const {
  double d = distance(phi);
  double num = 0;
  for (double g : gamma_tilde_) {
    double t = phi * (g - 1.0);
    num += (g - 1.0) * t / (1.0 + t);
  }
  if (d < 1e-12) {
    // limit as phi -> 0: d ~ phi sqrt(sum (g-1)^2 / 2)
    double ss = 0;
    for (double g : gamma_tilde_) ss += (g - 1.0) * (g - 1.0);
    return std::sqrt(ss / 2.0);
  }
  return num / (2.0 * d);
}

double PcPhiPrior::log_density(double phi) const {
  if (!(phi > 0 && phi < 1)) return -std::numeric_limits<double>::infinity();
  double d = distance(phi);
  double dd = distance_derivative(phi);
  double log_norm = std::log(std::abs(-std::expm1(-rate_ * d_one_)));
  return std::log(std::abs(rate_)) - rate_ * d + std::log(std::max(dd, 1e-300)) - log_norm;
}

double PcPhiPrior::log_density_at_logit_phi(double logit_phi) const {
  double phi = 1.0 / (1.0 + std::exp(-logit_phi));
  return log_density(phi) + std::log(phi) + std::log(1.0 - phi);
}

double PcPhiPrior::cdf(double phi) const {
  if (phi <= 0) return 0;
  if (phi >= 1) return 1;
  double d = distance(phi);
  if (std::abs(rate_) < 1e-12) return d / d_one_;
  return -std::expm1(-rate_ * d) / -std::expm1(-rate_ * d_one_);
}

std::vector<std::pair<double, double>> PcPhiPrior::tabulate(int n) const {
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    double phi = static_cast<double>(i) / (n + 1.0);
    out.emplace_back(phi, std::exp(log_density(phi)));
  }
  return out;
}

double LogNormalPrior::log_density_at_log_value(double log_value) const {
  double z = (log_value - log_median) / log_sd;
  return -0.5 * z * z - std::log(log_sd) - 0.5 * kLog2Pi;
}

double NormalPrior::log_density(double x) const {
  double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * kLog2Pi;
}

double nb_loglik(double y, double mu, double d) {
  require(mu > 0 && d > 0, ErrorCode::invalid_argument,
          "negative binomial needs mu > 0 and d > 0");
  require(y >= 0, ErrorCode::invalid_argument, "negative binomial count must be >= 0");
  return std::lgamma(y + d) - std::lgamma(d) - std::lgamma(y + 1.0) +
         d * (std::log(d) - std::log(d + mu)) + y * (std::log(mu) - std::log(d + mu));
}

}  // namespace fertsae
