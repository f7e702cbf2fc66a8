#pragma once

#include <vector>

#include "fertsae/structures.hpp"

namespace fertsae {

/// PC prior for a standard deviation: exponential with rate
/// lambda = -ln(alpha)/U, so that P(sigma > U) = alpha.
struct PcSigmaPrior {
  double threshold = 1.0;  // U
  double tail_prob = 0.01;  // alpha
  double rate = 0;          // lambda

  static PcSigmaPrior make(double U, double alpha);
  double log_density(double sigma) const;
  double log_density_at_log_sigma(double log_sigma) const;  // includes Jacobian
  double cdf(double sigma) const;
};

/// PC prior for the BYM2 mixing proportion phi, computed from the KLD-based
/// distance d(phi) on the scaled spatial structure's positive eigenspectrum
/// and renormalized on (0,1). The rate is solved so P(phi < U) = alpha holds
/// exactly under the normalized density.
class PcPhiPrior {
 public:
  /// `spatial` must be a scaled ICAR-kind structure (unscaled rejected).
  static PcPhiPrior make(const StructureMatrix& spatial, double U, double alpha);

  double distance(double phi) const;
  double distance_derivative(double phi) const;
  double log_density(double phi) const;
  double log_density_at_logit_phi(double logit_phi) const;  // includes Jacobian
  double cdf(double phi) const;
  double rate() const { return rate_; }

  /// Density tabulation on an n-point open grid over (0,1).
  std::vector<std::pair<double, double>> tabulate(int n) const;

 private:
  std::vector<double> gamma_tilde_;  // marginal covariance eigenvalues, positive spectrum
  double d_one_ = 0;                 // distance at phi = 1
  double rate_ = 0;
};

struct LogNormalPrior {
  double log_median = 0;
  double log_sd = 1;

  double log_density_at_log_value(double log_value) const;
};

struct NormalPrior {
  double mean = 0;
  double sd = 1;

  double log_density(double x) const;
};

/// Negative binomial log pmf with mean mu and overdispersion d, so that
/// var = mu (1 + mu / d); large d approaches the Poisson limit.
double nb_loglik(double y, double mu, double d);

}  // namespace fertsae
