#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fertsae/area_models.hpp"
#include "fertsae/exposure.hpp"

namespace fertsae {

/// Cell-level input for the negative-binomial unit model: one urbanicity
/// stratum (or the pooled data), cells with positive exposure only.
struct UnitModelInput {
  struct Cell {
    int area0 = 0;  // 0-based model area
    int year = 0;
    int age = 0;
    std::int64_t births = 0;
    double exposure = 0;  // person-years, > 0
  };
  std::vector<Cell> cells;
  std::vector<int> years;  // modeling years, ascending
  Urbanicity stratum = Urbanicity::both;
  AreaLevel level = AreaLevel::admin1;
  CovariateTable covariates;
  int survey_year = 0;
  std::int64_t n_dropped_zero_exposure = 0;
};

/// Cells from a cluster-level table, keyed to `level` areas, restricted to
/// `stratum` (both = pooled). Cells with zero exposure are dropped.
UnitModelInput make_unit_input(const FertilityTable& table, const SurveyDataset& dataset,
                               AreaLevel level, Urbanicity stratum,
                               const std::vector<int>& years, int survey_year);

/// Negative-binomial unit-level model with the full interaction structure:
/// intercept + cutoff + covariates + RW2/IID time + RW1/IID age + BYM2 space
/// + type-IV space x age, space x time, age x time. Reported rates exclude
/// the cutoff term; ASFR_{i,t,a} = exp(eta) per draw.
ModelFit fit_unit_model(const UnitModelInput& input, const RegionGraph& graph,
                        const AreaFitOptions& options);

/// Independent urban and rural fits with chain seeds derived from
/// options.sampler.seed; runs the two fits concurrently.
std::pair<ModelFit, ModelFit> fit_stratified(const UnitModelInput& urban_input,
                                             const UnitModelInput& rural_input,
                                             const RegionGraph& graph,
                                             const AreaFitOptions& options);

/// Urban proportions r_{i,t,a} in [0,1] per (area, period, age group).
struct UrbanFractionTable {
  std::map<std::tuple<int, Period, int>, double> r;

  /// Exact period match first, then any table period containing the year.
  std::optional<double> lookup(int area_id, Period period, int age) const;

  static UrbanFractionTable read_csv(const std::string& path);
  void write_csv(const std::string& path) const;
};

/// Pixel grid with urban labels and female population counts per age group.
struct GridLayer {
  struct Pixel {
    std::int64_t pixel_id = 0;
    int area_id = 0;
    bool urban = false;
    std::array<double, AgeGroup::count> pop{};
  };
  std::vector<Pixel> pixels;

  static GridLayer read_csv(const std::string& path);
};

/// r = sum L_g H_g / sum H_g over the area's pixels; errors on zero
/// population.
double urban_fraction(const GridLayer& grid, int area_id, int age);

/// Static-in-time fraction table from a grid, one row per (area, period, age).
UrbanFractionTable urban_fractions_from_grid(const GridLayer& grid,
                                             const std::vector<int>& areas,
                                             const std::vector<Period>& periods);

struct AggregateUrOptions {
  bool flag_resampled = false;  // set by the call when draw counts differed
};

/// Per-draw convex combination r * urban + (1-r) * rural on the rate scale;
/// TFR recomputed from the combined ASFRs. Draw counts are index-matched
/// (cycled) when unequal.
ModelFit aggregate_ur(const ModelFit& urban, const ModelFit& rural,
                      const UrbanFractionTable& fractions,
                      AggregateUrOptions* info = nullptr);

struct ExceedanceRow {
  EstimateKey key;  // (area, period)
  double threshold = 0;
  double probability = 0;
};

/// P(TFR_rural - TFR_urban > threshold) per key, over index-matched draws.
std::vector<ExceedanceRow> exceedance_probability(const std::vector<EstimateKey>& keys,
                                                  const Eigen::MatrixXd& urban_log_tfr,
                                                  const Eigen::MatrixXd& rural_log_tfr,
                                                  double threshold);

void write_exceedance_csv(const std::vector<ExceedanceRow>& rows, const std::string& path);

struct VarianceDecomposition {
  struct Component {
    std::string name;
    double variance = 0;
    double share = 0;  // over all six components
  };
  std::vector<Component> components;  // time, space, age, space_age, space_time, age_time

  double total() const;
  /// Shares renormalized over a subset of component names.
  std::vector<Component> shares_over(const std::vector<std::string>& names) const;
};

/// Empirical population variance of each effect family's posterior-median
/// values (structured + unstructured summed within time/age/space), with the
/// configured age groups removed from age-involved components first.
VarianceDecomposition variance_decomposition(const ModelFit& fit, int n_areas, int n_years,
                                             const std::vector<int>& exclude_age_groups);

void write_variance_csv(const VarianceDecomposition& vd, const std::string& path);

}  // namespace fertsae
