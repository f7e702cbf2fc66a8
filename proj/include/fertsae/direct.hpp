#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fertsae/exposure.hpp"

namespace fertsae {

namespace direct_flags {
constexpr unsigned sparse_zero_births = 1u << 0;
constexpr unsigned variance_unavailable = 1u << 1;
constexpr unsigned replicates_dropped = 1u << 2;
constexpr unsigned missing_age_group = 1u << 3;
std::string to_string(unsigned flags);
unsigned parse(const std::string& s);
}  // namespace direct_flags

/// Key of a direct estimate; age_index -1 marks a TFR estimate.
struct EstimateKey {
  AreaLevel level = AreaLevel::national;
  int area_id = 0;
  Urbanicity urbanicity = Urbanicity::both;
  Period period;
  int age_index = -1;

  bool is_tfr() const { return age_index < 0; }
  auto operator<=>(const EstimateKey&) const = default;
};

struct DirectEstimate {
  EstimateKey key;
  double point = 0;                    // ASFR per 1,000 women-years, or TFR
  std::optional<double> variance;      // design-based variance of point
  std::optional<double> log_point;     // log rate per woman-year / log TFR
  std::optional<double> log_variance;  // delta method: variance / point^2
  unsigned flags = 0;
  int n_clusters = 0;
};

/// Weighted ratio estimate for one (area, period, age group):
/// (sum w_j y_j / sum w_j E_j) * 1000, from cell-level weighted sums.
/// Throws no_data when the key has zero weighted exposure.
DirectEstimate direct_asfr(const FertilityTable& table, const EstimateKey& key);

/// TFR = 5 * sum_a ASFR_a / 1000; a missing age group counts as zero and is
/// flagged.
DirectEstimate direct_tfr(const std::vector<DirectEstimate>& asfrs);

enum class EstimatorKind { asfr, tfr };

struct JackknifeResult {
  std::optional<double> variance;
  int n_clusters = 0;   // replicates used
  int n_dropped = 0;    // undefined replicates (zero exposure after deletion)
};

/// Delete-one-cluster jackknife across the clusters contributing to the key:
/// variance = ((C-1)/C) * sum_c (theta_(c) - mean)^2.
JackknifeResult jackknife_variance(const FertilityTable& table, const EstimateKey& key,
                                   EstimatorKind estimator);

/// Fills log_point / log_variance via the delta method. Zero points leave the
/// transform unavailable (flagged), matching their exclusion from area-level
/// modeling.
DirectEstimate log_transform(DirectEstimate est);

/// Point + jackknife variance + log transform in one pass; returns nullopt for
/// keys with zero weighted exposure.
std::optional<DirectEstimate> compute_direct(const FertilityTable& table,
                                             const EstimateKey& key);

void write_direct_csv(const std::vector<DirectEstimate>& estimates,
                      const std::string& path);
std::vector<DirectEstimate> read_direct_csv(const std::string& path);

}  // namespace fertsae
