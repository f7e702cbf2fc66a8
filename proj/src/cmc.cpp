#include "fertsae/cmc.hpp"

#include "fertsae/errors.hpp"

namespace fertsae {

CmcDate cmc_from_year_month(int year, int month) {
  require(month >= 1 && month <= 12, ErrorCode::invalid_argument,
          "month out of range: " + std::to_string(month));
  require(year >= 1900, ErrorCode::invalid_argument,
          "year before CMC epoch: " + std::to_string(year));
  return CmcDate{(year - 1900) * 12 + month};
}

std::string AgeGroup::label() const {
  int lo = 15 + 5 * index;
  return std::to_string(lo) + "-" + std::to_string(lo + 4);
}

AgeGroup AgeGroup::parse(const std::string& label) {
  for (int i = 0; i < count; ++i)
    if (AgeGroup{i}.label() == label) return AgeGroup{i};
  fail(ErrorCode::invalid_argument, "not an age group label: " + label);
}

}  // namespace fertsae
