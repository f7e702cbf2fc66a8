#include "fertsae/exposure.hpp"

#include <algorithm>
#include <cmath>

#include "fertsae/csv.hpp"
#include "fertsae/errors.hpp"

namespace fertsae {

std::string to_string(AreaLevel level) {
  switch (level) {
    case AreaLevel::cluster: return "cluster";
    case AreaLevel::admin2: return "admin2";
    case AreaLevel::admin1: return "admin1";
    case AreaLevel::national: return "national";
  }
  return "?";
}

AreaLevel parse_area_level(const std::string& s) {
  if (s == "cluster") return AreaLevel::cluster;
  if (s == "admin2") return AreaLevel::admin2;
  if (s == "admin1") return AreaLevel::admin1;
  if (s == "national") return AreaLevel::national;
  fail(ErrorCode::invalid_argument, "not an area level: " + s);
}

std::string Period::label() const {
  if (first == last) return std::to_string(first);
  return std::to_string(first) + "-" + std::to_string(last);
}

Period Period::parse(const std::string& label) {
  auto dash = label.find('-');
  if (dash == std::string::npos) return single(std::stoi(label));
  Period p{std::stoi(label.substr(0, dash)), std::stoi(label.substr(dash + 1))};
  require(p.first <= p.last, ErrorCode::invalid_argument, "bad period: " + label);
  return p;
}

std::vector<Period> make_periods(int first_year, int last_year, int k) {
  require(k >= 1 && first_year <= last_year, ErrorCode::invalid_argument,
          "bad period grouping");
  std::vector<Period> out;
  int end = last_year;
  while (end >= first_year) {
    int start = std::max(first_year, end - k + 1);
    out.push_back({start, end});
    end = start - 1;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::int64_t FertilityTable::total_births() const {
  std::int64_t s = 0;
  for (const auto& [k, c] : cells) s += c.births;
  return s;
}

double FertilityTable::total_exposure() const {
  std::int64_t months = 0;
  for (const auto& [k, c] : cells) months += c.exposure_months;
  return static_cast<double>(months) / 12.0;
}

FertilityTable tabulate(const SurveyDataset& dataset, Period window) {
  require(window.first <= window.last, ErrorCode::invalid_argument,
          "empty tabulation window");
  FertilityTable table;
  table.level = AreaLevel::cluster;
  table.window = window;

  const int wstart = cmc_year_start(window.first);
  const int wend = cmc_year_end(window.last);

  if (!dataset.women.empty() && wstart > dataset.latest_interview().cmc - 1)
    table.diagnostics.zero_exposure_window = true;

  auto cell_at = [&](const WomanRecord& w, int year, AgeGroup age) -> FertilityCell& {
    const Cluster& cl = dataset.cluster_of(w.cluster_id);
    CellKey key{AreaLevel::cluster, cl.admin2_id,
                cl.urban ? Urbanicity::urban : Urbanicity::rural, cl.cluster_id,
                Period::single(year), age};
    auto [it, inserted] = table.cells.try_emplace(key);
    if (inserted) {
      it->second.key = key;
      it->second.admin1_id = cl.admin1_id;
    }
    return it->second;
  };

  for (const auto& w : dataset.women) {
    int lo = std::max(w.dob.cmc + 180, wstart);
    int hi = std::min({w.interview.cmc - 1, wend, w.dob.cmc + 419});
    if (lo > hi) continue;
    // Runs of months sharing (year, age group) are at most 12 long; walk them
    // in blocks so exposure stays integer-exact without a per-month map lookup.
    int m = lo;
    while (m <= hi) {
      int year = cmc_of(m).year();
      AgeGroup age = AgeGroup::of_age_months(m - w.dob.cmc);
      int year_last = cmc_year_end(year);
      int age_last = w.dob.cmc + 180 + 60 * (age.index + 1) - 1;
      int run_end = std::min({hi, year_last, age_last});
      int months = run_end - m + 1;
      FertilityCell& cell = cell_at(w, year, age);
      cell.exposure_months += months;
      cell.weighted_exposure += w.weight * static_cast<double>(months) / 12.0;
      m = run_end + 1;
    }
  }

  for (const auto& b : dataset.births) {
    const WomanRecord& mother = dataset.woman(b.woman_id);
    int m = b.birth.cmc;
    if (m >= mother.interview.cmc) {
      table.diagnostics.births_after_censoring++;
      continue;
    }
    if (m < wstart || m > wend) {
      table.diagnostics.births_outside_window++;
      continue;
    }
    int age_months = m - mother.dob.cmc;
    if (!AgeGroup::valid_age_months(age_months)) {
      table.diagnostics.births_out_of_age_range++;
      continue;
    }
    FertilityCell& cell =
        cell_at(mother, cmc_of(m).year(), AgeGroup::of_age_months(age_months));
    cell.births += 1;
    cell.weighted_births += mother.weight;
  }

  return table;
}

FertilityTable aggregate_cells(const FertilityTable& table, const SurveyDataset& dataset,
                               AreaLevel level, Urbanicity urbanicity,
                               const std::vector<Period>& periods) {
  require(level != AreaLevel::cluster, ErrorCode::invalid_argument,
          "aggregation target must be coarser than cluster");
  require(table.level == AreaLevel::cluster, ErrorCode::invalid_argument,
          "aggregation starts from a cluster-level table");
  FertilityTable out;
  out.level = level;
  out.window = table.window;
  out.diagnostics = table.diagnostics;

  for (const auto& [key, cell] : table.cells) {
    if (urbanicity != Urbanicity::both && key.urbanicity != urbanicity) continue;
    const Period* period = nullptr;
    for (const auto& p : periods)
      if (p.contains(key.period.first)) {
        period = &p;
        break;
      }
    if (!period) continue;
    int admin1 = cell.admin1_id;
    if (admin1 < 1 && key.cluster_id >= 0)
      admin1 = dataset.cluster_of(key.cluster_id).admin1_id;
    int area = 0;
    if (level == AreaLevel::admin2) {
      area = key.area_id;
    } else if (level == AreaLevel::admin1) {
      area = admin1;
      require(area >= 1, ErrorCode::invalid_argument,
              "unknown admin1 area for cluster " + std::to_string(key.cluster_id));
    }
    CellKey agg_key{level, area, urbanicity, -1, *period, key.age};
    auto [it, inserted] = out.cells.try_emplace(agg_key);
    if (inserted) {
      it->second.key = agg_key;
      it->second.admin1_id = level == AreaLevel::admin2 ? admin1 : area;
    }
    FertilityCell& acc = it->second;
    acc.births += cell.births;
    acc.exposure_months += cell.exposure_months;
    acc.weighted_births += cell.weighted_births;
    acc.weighted_exposure += cell.weighted_exposure;
  }
  return out;
}

void FertilityTable::write_csv(const std::string& path) const {
  csv::Writer w(path);
  w.row({"area_id", "urban", "cluster_id", "year", "age_group", "births", "exposure",
         "w_births", "w_exposure"});
  for (const auto& [key, c] : cells)
    w.row({csv::Writer::num(key.area_id), csv::Writer::num(static_cast<int>(key.urbanicity)),
           csv::Writer::num(key.cluster_id), key.period.label(), key.age.label(),
           csv::Writer::num(c.births), csv::Writer::num(c.exposure()),
           csv::Writer::num(c.weighted_births), csv::Writer::num(c.weighted_exposure)});
}

FertilityTable read_cells_csv_impl(const std::string& path, Period window) {
  csv::Table t = csv::Table::read_file(path);
  int c_area = t.column("area_id"), c_urb = t.column("urban"),
      c_cl = t.column("cluster_id"), c_year = t.column("year"),
      c_age = t.column("age_group"), c_b = t.column("births"), c_e = t.column("exposure"),
      c_wb = t.column("w_births"), c_we = t.column("w_exposure");
  FertilityTable out;
  out.window = window;
  bool any_cluster = false, any_aggregated = false;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    FertilityCell cell;
    Id cluster_id = t.as_int(r, c_cl);
    Period p = Period::parse(t.cell(r, c_year));
    cell.key = CellKey{cluster_id >= 0 ? AreaLevel::cluster : AreaLevel::admin2,
                       static_cast<int>(t.as_int(r, c_area)),
                       static_cast<Urbanicity>(t.as_int(r, c_urb)), cluster_id, p,
                       AgeGroup::parse(t.cell(r, c_age))};
    cell.admin1_id = 0;
    cell.births = t.as_int(r, c_b);
    cell.exposure_months = std::llround(t.as_double(r, c_e) * 12.0);
    cell.weighted_births = t.as_double(r, c_wb);
    cell.weighted_exposure = t.as_double(r, c_we);
    (cluster_id >= 0 ? any_cluster : any_aggregated) = true;
    out.cells.emplace(cell.key, cell);
  }
  require(!(any_cluster && any_aggregated), ErrorCode::schema,
          path + ": mixes cluster-level and aggregated rows");
  out.level = any_cluster ? AreaLevel::cluster : AreaLevel::admin2;
  return out;
}

FertilityTable FertilityTable::read_csv(const std::string& path, Period window) {
  return read_cells_csv_impl(path, window);
}

}  // namespace fertsae
