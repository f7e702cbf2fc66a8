#include "fertsae/model_spec.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "fertsae/errors.hpp"
#include "fertsae/stats.hpp"

namespace fertsae {

double Hyperparameter::log_prior_transformed(double t) const {
  switch (kind) {
    case Kind::sigma_pc:
      return sigma_prior.log_density_at_log_sigma(t);
    case Kind::phi_pc:
      return phi_prior->log_density_at_logit_phi(t);
    case Kind::overdispersion:
      return d_prior.log_density_at_log_value(t);
  }
  return -std::numeric_limits<double>::infinity();
}

double Hyperparameter::transform(double natural) const {
  return kind == Kind::phi_pc ? logit(natural) : std::log(natural);
}

double Hyperparameter::untransform(double t) const {
  return kind == Kind::phi_pc ? expit(t) : std::exp(t);
}

double Hyperparameter::initial_value() const {
  if (fixed_value) return *fixed_value;
  switch (kind) {
    case Kind::sigma_pc:
      return std::log(2.0) / sigma_prior.rate;  // prior median
    case Kind::phi_pc:
      return 0.5;
    case Kind::overdispersion:
      return std::exp(d_prior.log_median);
  }
  return 1.0;
}

int LatentModelSpec::add_hyper(Hyperparameter h) {
  hypers.push_back(std::move(h));
  return static_cast<int>(hypers.size()) - 1;
}

int LatentModelSpec::add_block(EffectBlock b) {
  blocks.push_back(std::move(b));
  return static_cast<int>(blocks.size()) - 1;
}

int LatentModelSpec::add_fixed(FixedEffect f) {
  fixed.push_back(std::move(f));
  return static_cast<int>(fixed.size()) - 1;
}

void LatentModelSpec::validate() const {
  int n = n_data();
  if (observation == ObservationModel::gaussian_known_variance) {
    require(static_cast<int>(obs_variance.size()) == n, ErrorCode::invalid_argument,
            "gaussian model needs one variance per datum");
    for (double v : obs_variance)
      require(v > 0, ErrorCode::invalid_argument, "observation variances must be positive");
  } else {
    require(static_cast<int>(log_offset.size()) == n, ErrorCode::invalid_argument,
            "negative binomial model needs one log offset per datum");
    require(d_slot >= 0 && d_slot < static_cast<int>(hypers.size()),
            ErrorCode::invalid_argument, "negative binomial model needs an overdispersion slot");
    require(hypers[d_slot].kind == Hyperparameter::Kind::overdispersion,
            ErrorCode::invalid_argument, "d_slot must reference an overdispersion hyper");
    for (double y_k : y)
      require(y_k >= 0 && y_k == std::floor(y_k), ErrorCode::invalid_argument,
              "negative binomial observations must be non-negative counts");
  }
  for (const auto& b : blocks) {
    require(static_cast<int>(b.datum_level.size()) == n, ErrorCode::invalid_argument,
            "block " + b.name + ": datum map length mismatch");
    for (int lev : b.datum_level)
      require(lev >= -1 && lev < b.n_levels(), ErrorCode::invalid_argument,
              "block " + b.name + ": datum level out of range");
    require(b.sigma_slot >= 0 && b.sigma_slot < static_cast<int>(hypers.size()),
            ErrorCode::invalid_argument, "block " + b.name + ": missing sigma slot");
    if (b.is_bym2())
      require(b.phi_slot >= 0 && b.phi_slot < static_cast<int>(hypers.size()),
              ErrorCode::invalid_argument, "block " + b.name + ": bym2 needs a phi slot");
    require(b.structure.scaled || b.structure.kind == StructureKind::iid,
            ErrorCode::invalid_argument,
            "block " + b.name + ": model blocks must use scaled structures");
  }
  for (const auto& f : fixed)
    require(static_cast<int>(f.column.size()) == n, ErrorCode::invalid_argument,
            "fixed effect " + f.name + ": column length mismatch");
  if (!fixed.empty() && n > 0) {
    Eigen::MatrixXd X(n, fixed.size());
    for (std::size_t j = 0; j < fixed.size(); ++j)
      for (int k = 0; k < n; ++k) X(k, static_cast<int>(j)) = fixed[j].column[k];
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    require(qr.rank() == static_cast<int>(fixed.size()), ErrorCode::invalid_argument,
            "fixed-effect design matrix is rank deficient");
  }
}

}  // namespace fertsae
