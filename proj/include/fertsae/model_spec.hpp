#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fertsae/priors.hpp"
#include "fertsae/structures.hpp"

namespace fertsae {

enum class ObservationModel { gaussian_known_variance, negative_binomial };

/// One scalar hyperparameter: free with its prior, or pinned to a value.
struct Hyperparameter {
  enum class Kind { sigma_pc, phi_pc, overdispersion };
  Kind kind = Kind::sigma_pc;
  std::string name;
  PcSigmaPrior sigma_prior;
  std::optional<PcPhiPrior> phi_prior;
  LogNormalPrior d_prior;
  std::optional<double> fixed_value;

  bool free() const { return !fixed_value.has_value(); }
  double log_prior_transformed(double t) const;  // includes Jacobian
  double transform(double natural) const;        // log / logit
  double untransform(double t) const;
  double initial_value() const;  // natural scale
};

/// One random-effect block. The latent vector has a fixed standardized prior
/// N(0, Q^+) under the block's constraints; hyperparameters enter as loadings
/// on the predictor contribution:
///   plain block: sigma * z[level]
///   bym2 block:  sigma * (sqrt(1-phi) z[level] + sqrt(phi) z[n+level])
struct EffectBlock {
  std::string name;
  StructureMatrix structure;
  int sigma_slot = -1;
  int phi_slot = -1;  // bym2 only
  std::vector<int> datum_level;  // per datum; -1 = block absent for the datum

  bool is_bym2() const { return structure.kind == StructureKind::bym2; }
  int n_latent() const { return structure.dim; }
  int n_levels() const { return is_bym2() ? structure.dim / 2 : structure.dim; }
};

struct FixedEffect {
  std::string name;
  NormalPrior prior;
  std::vector<double> column;  // data-length design column
  bool report = true;  // false excludes the coefficient from reported predictors
};

/// Observation model + linear predictor layout + priors + index maps for one
/// latent Gaussian model.
struct LatentModelSpec {
  ObservationModel observation = ObservationModel::gaussian_known_variance;
  std::vector<double> y;
  std::vector<double> obs_variance;  // gaussian: per-datum known variance
  std::vector<double> log_offset;    // negative binomial: log exposure
  int d_slot = -1;                   // negative binomial overdispersion slot

  std::vector<Hyperparameter> hypers;
  std::vector<EffectBlock> blocks;
  std::vector<FixedEffect> fixed;

  int n_data() const { return static_cast<int>(y.size()); }
  void validate() const;

  int add_hyper(Hyperparameter h);
  int add_block(EffectBlock b);
  int add_fixed(FixedEffect f);
};

/// Linear-combination recipe for a reported predictor (one output key).
struct ExtractionCell {
  std::vector<double> fixed_row;  // one weight per fixed effect
  std::vector<int> block_level;   // one level per block; -1 = absent
};

}  // namespace fertsae
