#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fertsae/survey_data.hpp"

namespace fertsae {

enum class AreaLevel { cluster, admin2, admin1, national };
enum class Urbanicity { rural = 0, urban = 1, both = 2 };

std::string to_string(AreaLevel level);
AreaLevel parse_area_level(const std::string& s);

struct Period {
  int first = 0;
  int last = 0;

  bool contains(int year) const { return year >= first && year <= last; }
  int n_years() const { return last - first + 1; }
  std::string label() const;
  static Period parse(const std::string& label);
  static Period single(int year) { return {year, year}; }

  auto operator<=>(const Period&) const = default;
};

/// Consecutive k-year periods covering [first_year, last_year], newest-aligned:
/// the last period always ends at last_year.
std::vector<Period> make_periods(int first_year, int last_year, int k);

struct CellKey {
  AreaLevel level = AreaLevel::cluster;
  int area_id = 0;           // admin2 id at cluster level, 0 for national
  Urbanicity urbanicity = Urbanicity::both;
  Id cluster_id = -1;        // -1 once aggregated past cluster level
  Period period;             // single year at cluster level
  AgeGroup age;

  auto operator<=>(const CellKey&) const = default;
};

/// One Lexis cell: births Y and person-years exposure, with design-weighted
/// counterparts. Exposure is kept as an exact integer month count.
struct FertilityCell {
  CellKey key;
  int admin1_id = 0;  // carried for cluster-level cells
  std::int64_t births = 0;
  std::int64_t exposure_months = 0;
  double weighted_births = 0;
  double weighted_exposure = 0;  // person-years

  double exposure() const { return static_cast<double>(exposure_months) / 12.0; }
};

struct TabulationDiagnostics {
  std::int64_t births_out_of_age_range = 0;  // mother < 15 or >= 50 at birth
  std::int64_t births_outside_window = 0;
  std::int64_t births_after_censoring = 0;  // birth month at/after interview month
  bool zero_exposure_window = false;        // window entirely after all interviews
};

class FertilityTable {
 public:
  AreaLevel level = AreaLevel::cluster;
  Period window;
  std::map<CellKey, FertilityCell> cells;
  TabulationDiagnostics diagnostics;

  std::int64_t total_births() const;
  double total_exposure() const;

  void write_csv(const std::string& path) const;
  static FertilityTable read_csv(const std::string& path, Period window);
};

/// Tabulates births and person-months on the (cluster, year, age-group) grid.
/// Each woman's month m in [max(dob+180, window start), min(interview-1,
/// window end, dob+419)] contributes one month of exposure to the cell at
/// (cluster, year(m), age(m - dob)); births are attributed by the mother's
/// completed-month age at the birth month and censored at interview-1 like
/// exposure.
FertilityTable tabulate(const SurveyDataset& dataset, Period window);

/// Re-keys cells to (area, period, age) sums. `urbanicity` urban/rural filters
/// to that stratum; `both` merges the strata.
FertilityTable aggregate_cells(const FertilityTable& table, const SurveyDataset& dataset,
                               AreaLevel level, Urbanicity urbanicity,
                               const std::vector<Period>& periods);

}  // namespace fertsae
