#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "fertsae/direct.hpp"
#include "fertsae/sampler.hpp"
#include "fertsae/survey_data.hpp"

namespace fertsae {

struct Summary {
  double median = 0, mean = 0, q025 = 0, q05 = 0, q95 = 0, q975 = 0;
};

Summary summarize(std::vector<double> draws);

struct SmoothedEstimate {
  EstimateKey key;
  Summary natural;    // rate scale (ASFR per 1000, TFR, or proportion)
  Summary log_scale;  // log rate per woman-year / log TFR / logit proportion
  bool observed = true;  // false when predicted for a key with no direct input
};

/// Natural-scale summaries from log-rate draws; ASFR rows are rescaled to
/// per-1000.
SmoothedEstimate summarize_key(const EstimateKey& key, const Eigen::VectorXd& log_draws,
                               bool observed);

struct PcPriorSettings {
  double sigma_u = 1.0;       // P(sigma > sigma_u) = sigma_alpha
  double sigma_alpha = 0.01;
  double phi_u = 0.5;         // P(phi < phi_u) = phi_alpha
  double phi_alpha = 2.0 / 3.0;
};

struct AreaFitOptions {
  bool use_covariates = false;
  SamplerSettings sampler;
  PcPriorSettings pc;
  bool cutoff_adjustment = true;  // TFR model only
  int survey_year = 0;            // TFR model only
  double zeta_mean = 0.05;
  double zeta_sd = 0.1;
  double fixed_effect_sd = 31.622776601683793;  // N(0, 1000) for alpha, beta
};

/// One fitted area- or unit-level model: per-key log-rate draws plus
/// summaries. Keys cover the full grid, including combinations with no
/// direct input (predicted from the structure).
struct ModelFit {
  std::vector<EstimateKey> keys;
  Eigen::MatrixXd log_rate_draws;  // S x K
  std::vector<SmoothedEstimate> estimates;
  std::vector<SmoothedEstimate> tfr_estimates;  // derived TFR keys where defined
  std::vector<EstimateKey> tfr_keys;
  Eigen::MatrixXd log_tfr_draws;  // S x |tfr_keys|
  PosteriorSamples samples;

  int key_index(const EstimateKey& key) const;
  int tfr_key_index(const EstimateKey& key) const;
};

/// Area-level ASFR model on log direct estimates for one reference period:
/// intercept (+ covariates) + age RW1 + age IID + BYM2 space + type-IV
/// space x age interaction. Estimates with missing or non-positive variance
/// are excluded from the likelihood and predicted from the structure.
ModelFit fit_fh_asfr(const std::vector<DirectEstimate>& direct, const RegionGraph& graph,
                     const CovariateTable& covariates, Period period,
                     const AreaFitOptions& options);

/// Area-level TFR model on yearly log direct estimates: intercept + cutoff
/// adjustment (+ covariates) + RW2 and IID time + BYM2 space + type-IV
/// space x time. Reported rates exclude the cutoff term. Needs >= 3 years.
ModelFit fit_fh_tfr(const std::vector<DirectEstimate>& direct, const RegionGraph& graph,
                    const CovariateTable& covariates, const std::vector<int>& years,
                    const AreaFitOptions& options);

struct ProportionDatum {
  int area_id = 0;  // 1-based
  double p_hat = 0;
  double variance = 0;  // design variance of p_hat
};

struct CovariateFitResult {
  std::vector<SmoothedEstimate> proportions;  // natural scale in (0,1)
  PosteriorSamples samples;
  std::vector<int> excluded_areas;  // p_hat in {0,1}
};

/// Supplement-style Fay-Herriot smoothing of a direct proportion on the logit
/// scale (delta-method variance), intercept + BYM2 only.
CovariateFitResult fit_fh_covariate(const std::vector<ProportionDatum>& direct,
                                    const RegionGraph& graph, const AreaFitOptions& options);

/// Per-draw weighted average of natural-scale TFR over each period's years.
/// `weight(area, year)` supplies non-negative weights (normalized within each
/// period); equal weights when absent.
struct PeriodTfr {
  std::vector<EstimateKey> keys;
  Eigen::MatrixXd log_tfr_draws;  // S x |keys|
  std::vector<SmoothedEstimate> estimates;
};

PeriodTfr aggregate_tfr_periods(
    const std::vector<EstimateKey>& yearly_keys, const Eigen::MatrixXd& log_tfr_draws,
    const std::vector<Period>& periods,
    const std::function<double(int area, int year)>& weight = nullptr);

/// smoothed_estimates.csv writer; one labeled group of rows per model.
void write_smoothed_csv(
    const std::vector<std::pair<std::string, std::vector<SmoothedEstimate>>>& groups,
    const std::string& path, bool log_scale = false);

}  // namespace fertsae
