#include "fertsae/direct.hpp"

#include <array>
#include <cmath>
#include <map>

#include "fertsae/csv.hpp"
#include "fertsae/errors.hpp"

namespace fertsae {

namespace direct_flags {

std::string to_string(unsigned flags) {
  std::string out;
  auto add = [&](unsigned bit, const char* name) {
    if (flags & bit) {
      if (!out.empty()) out += ';';
      out += name;
    }
  };
  add(sparse_zero_births, "sparse");
  add(variance_unavailable, "novar");
  add(replicates_dropped, "jkdrop");
  add(missing_age_group, "missing_age");
  return out;
}

unsigned parse(const std::string& s) {
  unsigned flags = 0;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto next = s.find(';', pos);
    std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
    if (tok == "sparse") flags |= sparse_zero_births;
    else if (tok == "novar") flags |= variance_unavailable;
    else if (tok == "jkdrop") flags |= replicates_dropped;
    else if (tok == "missing_age") flags |= missing_age_group;
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return flags;
}

}  // namespace direct_flags

namespace {

bool cell_in_key(const FertilityCell& cell, const EstimateKey& key) {
  const CellKey& ck = cell.key;
  if (key.urbanicity != Urbanicity::both && ck.urbanicity != key.urbanicity) return false;
  if (!key.period.contains(ck.period.first)) return false;
  switch (key.level) {
    case AreaLevel::national: break;
    case AreaLevel::admin1:
      if (cell.admin1_id != key.area_id) return false;
      break;
    case AreaLevel::admin2:
      if (ck.area_id != key.area_id) return false;
      break;
    case AreaLevel::cluster:
      fail(ErrorCode::invalid_argument, "cluster-level direct estimates are not defined");
  }
  return true;
}

// Per-cluster weighted (births, exposure) sums by age group for the key's
// area/period/urbanicity slice.
struct ClusterAgeSums {
  std::map<Id, std::array<std::pair<double, double>, AgeGroup::count>> by_cluster;
  std::array<std::pair<double, double>, AgeGroup::count> totals{};
  std::array<std::int64_t, AgeGroup::count> births{};  // unweighted, for sparse flags

  static ClusterAgeSums collect(const FertilityTable& table, const EstimateKey& key) {
    require(table.level == AreaLevel::cluster, ErrorCode::invalid_argument,
            "direct estimation requires a cluster-level table");
    ClusterAgeSums out;
    for (const auto& [ck, cell] : table.cells) {
      if (!cell_in_key(cell, key)) continue;
      int a = ck.age.index;
      auto& entry = out.by_cluster[ck.cluster_id];
      entry[a].first += cell.weighted_births;
      entry[a].second += cell.weighted_exposure;
      out.totals[a].first += cell.weighted_births;
      out.totals[a].second += cell.weighted_exposure;
      out.births[a] += cell.births;
    }
    return out;
  }
};

double asfr_from_sums(double wb, double we) { return wb / we * 1000.0; }

// TFR from per-age (wb, we) sums; zero-exposure groups contribute 0.
double tfr_from_sums(const std::array<std::pair<double, double>, AgeGroup::count>& sums) {
  double tfr = 0;
  for (const auto& [wb, we] : sums)
    if (we > 0) tfr += asfr_from_sums(wb, we) / 1000.0;
  return 5.0 * tfr;
}

}  // namespace

DirectEstimate direct_asfr(const FertilityTable& table, const EstimateKey& key) {
  require(!key.is_tfr(), ErrorCode::invalid_argument, "direct_asfr needs an age group");
  ClusterAgeSums sums = ClusterAgeSums::collect(table, key);
  int a = key.age_index;
  auto [wb, we] = sums.totals[a];
  require(we > 0, ErrorCode::no_data,
          "zero weighted exposure for " + key.period.label() + " age " +
              AgeGroup{a}.label());
  DirectEstimate est;
  est.key = key;
  est.point = asfr_from_sums(wb, we);
  if (sums.births[a] == 0) est.flags |= direct_flags::sparse_zero_births;
  int n_contrib = 0;
  for (const auto& [id, entry] : sums.by_cluster)
    if (entry[a].second > 0) ++n_contrib;
  est.n_clusters = n_contrib;
  return est;
}

DirectEstimate direct_tfr(const std::vector<DirectEstimate>& asfrs) {
  DirectEstimate est;
  std::array<bool, AgeGroup::count> present{};
  double sum = 0;
  for (const auto& a : asfrs) {
    require(!a.key.is_tfr(), ErrorCode::invalid_argument,
            "direct_tfr takes age-specific estimates");
    present[a.key.age_index] = true;
    sum += a.point / 1000.0;
    est.key = a.key;
  }
  for (bool p : present)
    if (!p) est.flags |= direct_flags::missing_age_group;
  est.key.age_index = -1;
  est.point = 5.0 * sum;
  return est;
}

JackknifeResult jackknife_variance(const FertilityTable& table, const EstimateKey& key,
                                   EstimatorKind estimator) {
  EstimateKey k = key;
  if (estimator == EstimatorKind::tfr) k.age_index = -1;
  ClusterAgeSums sums = ClusterAgeSums::collect(table, k);

  std::vector<double> replicates;
  int dropped = 0;
  for (const auto& [cluster_id, entry] : sums.by_cluster) {
    // Contributing clusters only: no exposure in the key slice means the
    // cluster is not part of the replicate set.
    double cluster_exposure = 0;
    for (int a = 0; a < AgeGroup::count; ++a)
      if (estimator == EstimatorKind::tfr || a == k.age_index)
        cluster_exposure += entry[a].second;
    if (!(cluster_exposure > 0)) continue;

    auto rest = sums.totals;
    for (int a = 0; a < AgeGroup::count; ++a) {
      rest[a].first -= entry[a].first;
      rest[a].second -= entry[a].second;
    }
    if (estimator == EstimatorKind::asfr) {
      int a = k.age_index;
      if (rest[a].second > 1e-12) {
        replicates.push_back(asfr_from_sums(rest[a].first, rest[a].second));
      } else {
        ++dropped;
      }
    } else {
      double remaining = 0;
      for (int a = 0; a < AgeGroup::count; ++a) remaining += rest[a].second;
      if (remaining > 1e-12) {
        replicates.push_back(tfr_from_sums(rest));
      } else {
        ++dropped;
      }
    }
  }

  JackknifeResult out;
  out.n_dropped = dropped;
  out.n_clusters = static_cast<int>(replicates.size());
  if (out.n_clusters < 2) return out;
  double m = 0;
  for (double r : replicates) m += r;
  m /= static_cast<double>(out.n_clusters);
  double ss = 0;
  for (double r : replicates) ss += (r - m) * (r - m);
  double c = static_cast<double>(out.n_clusters);
  out.variance = (c - 1.0) / c * ss;
  return out;
}

DirectEstimate log_transform(DirectEstimate est) {
  require(est.point >= 0, ErrorCode::invalid_argument, "negative rate");
  if (est.point <= 0) {
    est.flags |= direct_flags::sparse_zero_births;
    return est;
  }
  double rate = est.key.is_tfr() ? est.point : est.point / 1000.0;
  est.log_point = std::log(rate);
  if (est.variance)
    est.log_variance = *est.variance / (est.point * est.point);
  return est;
}

std::optional<DirectEstimate> compute_direct(const FertilityTable& table,
                                             const EstimateKey& key) {
  DirectEstimate est;
  if (key.is_tfr()) {
    std::vector<DirectEstimate> asfrs;
    for (int a = 0; a < AgeGroup::count; ++a) {
      EstimateKey ka = key;
      ka.age_index = a;
      try {
        asfrs.push_back(direct_asfr(table, ka));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::no_data) throw;
      }
    }
    if (asfrs.empty()) return std::nullopt;
    est = direct_tfr(asfrs);
    est.key = key;
  } else {
    try {
      est = direct_asfr(table, key);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::no_data) return std::nullopt;
      throw;
    }
  }
  JackknifeResult jk = jackknife_variance(
      table, key, key.is_tfr() ? EstimatorKind::tfr : EstimatorKind::asfr);
  est.n_clusters = jk.n_clusters > 0 ? jk.n_clusters : est.n_clusters;
  if (jk.variance) {
    est.variance = jk.variance;
  } else {
    est.flags |= direct_flags::variance_unavailable;
  }
  if (jk.n_dropped > 0) est.flags |= direct_flags::replicates_dropped;
  return log_transform(est);
}

void write_direct_csv(const std::vector<DirectEstimate>& estimates, const std::string& path) {
  csv::Writer w(path);
  w.row({"level", "area_id", "period", "age_group", "point", "variance", "log_point",
         "log_variance", "flags"});
  auto opt = [](const std::optional<double>& v) {
    return v ? csv::Writer::num(*v) : std::string("NA");
  };
  for (const auto& e : estimates)
    w.row({to_string(e.key.level), csv::Writer::num(e.key.area_id), e.key.period.label(),
           e.key.is_tfr() ? "TFR" : AgeGroup{e.key.age_index}.label(),
           csv::Writer::num(e.point), opt(e.variance), opt(e.log_point),
           opt(e.log_variance), direct_flags::to_string(e.flags)});
}

std::vector<DirectEstimate> read_direct_csv(const std::string& path) {
  csv::Table t = csv::Table::read_file(path);
  int c_lvl = t.column("level"), c_area = t.column("area_id"), c_p = t.column("period"),
      c_age = t.column("age_group"), c_pt = t.column("point"), c_v = t.column("variance"),
      c_lp = t.column("log_point"), c_lv = t.column("log_variance"),
      c_f = t.column("flags");
  std::vector<DirectEstimate> out;
  auto opt = [&](std::size_t r, int c) -> std::optional<double> {
    if (t.cell(r, c) == "NA") return std::nullopt;
    return t.as_double(r, c);
  };
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    DirectEstimate e;
    e.key.level = parse_area_level(t.cell(r, c_lvl));
    e.key.area_id = static_cast<int>(t.as_int(r, c_area));
    e.key.period = Period::parse(t.cell(r, c_p));
    const std::string& age = t.cell(r, c_age);
    e.key.age_index = age == "TFR" ? -1 : AgeGroup::parse(age).index;
    e.point = t.as_double(r, c_pt);
    e.variance = opt(r, c_v);
    e.log_point = opt(r, c_lp);
    e.log_variance = opt(r, c_lv);
    e.flags = direct_flags::parse(t.cell(r, c_f));
    out.push_back(e);
  }
  return out;
}

}  // namespace fertsae
