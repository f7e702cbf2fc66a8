#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fertsae/model_spec.hpp"

namespace fertsae {

struct SamplerSettings {
  int chains = 2;
  int burnin = 1000;
  int draws = 1000;  // per chain, post burn-in
  std::uint64_t seed = 0;  // mandatory for reproducibility
  bool adapt = true;
  int latent_sweeps = 1;  // latent-field updates per iteration
};

struct SamplerDiagnostics {
  std::map<std::string, double> acceptance;  // per adapted scalar + "latent"
  std::map<std::string, double> ess;         // hyperparameters and fixed effects
  double max_constraint_residual = 0;
};

/// Posterior draws for one fitted model. Columns: hyperparameters (natural
/// scale), fixed effects, then each block's latent coordinates z. Effect
/// values are the loading-scaled products (see effect_draws); the layout
/// metadata makes the object self-contained for post-processing.
class PosteriorSamples {
 public:
  struct BlockMeta {
    std::string name;
    int z_offset = 0;  // first z column
    int n_latent = 0;
    int n_levels = 0;
    bool bym2 = false;
    int sigma_col = -1;
    int phi_col = -1;
    Eigen::MatrixXd unit_constraints;  // n_latent x k, unit-norm rows of A'
  };

  std::vector<std::string> names;
  Eigen::MatrixXd draws;  // S x P
  std::vector<int> hyper_cols;
  std::vector<int> fixed_cols;
  std::vector<BlockMeta> blocks;
  SamplerDiagnostics diagnostics;

  int n_draws() const { return static_cast<int>(draws.rows()); }
  int column(const std::string& name) const;

  /// Effect-scale draws for block b: sigma * z, or for BYM2 the combined
  /// spatial effect sigma (sqrt(1-phi) e + sqrt(phi) S) per area.
  Eigen::MatrixXd effect_draws(int b) const;

  /// Reported linear predictors for arbitrary cells.
  Eigen::MatrixXd extract_predictors(const std::vector<ExtractionCell>& cells) const;

  /// Largest |a . z| over draws, blocks, and unit-norm constraint vectors a.
  double constraint_residual() const;

  /// samples.csv, long format: draw,parameter,value over hyperparameters,
  /// fixed effects, and effect-scale block values.
  void write_csv(const std::string& path) const;
};

/// MCMC for the latent Gaussian models. Latent field: Gaussian full
/// conditionals with conditioning-by-correction (Gaussian likelihood) or a
/// Taylor-proposal Metropolis step on the joint latent block (negative
/// binomial). Hyperparameters and fixed effects: adaptive random-walk
/// Metropolis; with a Gaussian likelihood the RW targets are evaluated with
/// the latent field integrated out. Deterministic given the seed.
PosteriorSamples sample_posterior(const LatentModelSpec& spec, const SamplerSettings& settings);

}  // namespace fertsae
