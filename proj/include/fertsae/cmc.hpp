#pragma once

#include <string>

namespace fertsae {

/// Century month code, the DHS month convention: cmc = (year - 1900) * 12 + month.
/// Month resolution is the contract everywhere; day precision is rejected, not
/// approximated.
struct CmcDate {
  int cmc = 0;

  int year() const { return 1900 + (cmc - 1) / 12; }
  int month() const { return (cmc - 1) % 12 + 1; }

  auto operator<=>(const CmcDate&) const = default;
};

CmcDate cmc_from_year_month(int year, int month);

inline CmcDate cmc_of(int raw) { return CmcDate{raw}; }

/// First and last month index of a calendar year.
inline int cmc_year_start(int year) { return (year - 1900) * 12 + 1; }
inline int cmc_year_end(int year) { return (year - 1900) * 12 + 12; }

/// Maternal age groups 15-19 .. 45-49, index 0..6.
struct AgeGroup {
  int index = 0;

  static constexpr int count = 7;
  static bool valid_age_months(int m) { return m >= 180 && m < 420; }
  /// Group for age in completed months; precondition: valid_age_months(m).
  static AgeGroup of_age_months(int m) { return AgeGroup{(m - 180) / 60}; }

  std::string label() const;
  static AgeGroup parse(const std::string& label);

  auto operator<=>(const AgeGroup&) const = default;
};

}  // namespace fertsae
