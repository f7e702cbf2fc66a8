#include "fertsae/survey_data.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "fertsae/csv.hpp"
#include "fertsae/errors.hpp"

namespace fertsae {

std::string LoadReport::summary() const {
  std::ostringstream os;
  os << n_women << " women, " << n_births << " births, " << n_clusters
     << " clusters";
  if (!dropped.empty()) os << "; " << dropped.size() << " rows dropped";
  return os.str();
}

const Cluster& SurveyDataset::cluster_of(Id cluster_id) const {
  auto it = cluster_index_.find(cluster_id);
  require(it != cluster_index_.end(), ErrorCode::dangling_key,
          "unknown cluster_id " + std::to_string(cluster_id));
  return clusters[it->second];
}

const WomanRecord& SurveyDataset::woman(Id woman_id) const {
  auto it = woman_index_.find(woman_id);
  require(it != woman_index_.end(), ErrorCode::dangling_key,
          "unknown woman_id " + std::to_string(woman_id));
  return women[it->second];
}

bool SurveyDataset::has_cluster(Id cluster_id) const {
  return cluster_index_.count(cluster_id) > 0;
}

CmcDate SurveyDataset::latest_interview() const {
  CmcDate latest{0};
  for (const auto& w : women) latest = std::max(latest, w.interview);
  return latest;
}

void SurveyDataset::index() {
  cluster_index_.clear();
  woman_index_.clear();
  for (std::size_t i = 0; i < clusters.size(); ++i)
    cluster_index_[clusters[i].cluster_id] = i;
  for (std::size_t i = 0; i < women.size(); ++i)
    woman_index_[women[i].woman_id] = i;
}

namespace {

struct RowDropper {
  const LoadOptions& options;
  LoadReport& report;

  void drop(const std::string& file, int row, const std::string& reason) {
    if (options.strict)
      fail(ErrorCode::invalid_argument, file + " row " + std::to_string(row) + ": " + reason);
    report.dropped.push_back({file, row, reason});
  }
};

}  // namespace

LoadResult build_dataset(std::vector<WomanRecord> women, std::vector<BirthRecord> births,
                         std::vector<Cluster> clusters, RegionGraph admin1,
                         RegionGraph admin2, const LoadOptions& options) {
  LoadResult out;
  RowDropper dropper{options, out.report};
  SurveyDataset& ds = out.dataset;
  ds.admin1_graph = std::move(admin1);
  ds.admin2_graph = std::move(admin2);

  // Clusters first; admin2 -> admin1 nesting is inferred and checked here.
  std::set<Id> cluster_ids;
  std::map<int, int> admin2_parent;
  std::map<std::pair<int, bool>, Id> stratum_of;
  std::map<Id, std::pair<int, bool>> stratum_key;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const Cluster& c = clusters[i];
    int row = static_cast<int>(i) + 2;
    if (cluster_ids.count(c.cluster_id)) {
      dropper.drop("clusters", row, "duplicate cluster_id " + std::to_string(c.cluster_id));
      continue;
    }
    if (c.admin1_id < 1 || c.admin1_id > ds.admin1_graph.size()) {
      dropper.drop("clusters", row, "admin1_id " + std::to_string(c.admin1_id) +
                                        " outside graph range");
      continue;
    }
    if (c.admin2_id < 1 || c.admin2_id > ds.admin2_graph.size()) {
      dropper.drop("clusters", row, "admin2_id " + std::to_string(c.admin2_id) +
                                        " outside graph range");
      continue;
    }
    auto [it, inserted] = admin2_parent.emplace(c.admin2_id, c.admin1_id);
    if (!inserted && it->second != c.admin1_id) {
      dropper.drop("clusters", row,
                   "admin2 " + std::to_string(c.admin2_id) + " nests in admin1 " +
                       std::to_string(it->second) + " elsewhere, here " +
                       std::to_string(c.admin1_id));
      continue;
    }
    std::pair<int, bool> key{c.admin1_id, c.urban};
    auto [sit, sinserted] = stratum_of.emplace(key, c.stratum_id);
    if (!sinserted && sit->second != c.stratum_id) {
      dropper.drop("clusters", row,
                   "stratum_id " + std::to_string(c.stratum_id) +
                       " conflicts with earlier id for the same (admin1, urbanicity)");
      continue;
    }
    auto [kit, kinserted] = stratum_key.emplace(c.stratum_id, key);
    if (!kinserted && kit->second != key) {
      dropper.drop("clusters", row,
                   "stratum_id " + std::to_string(c.stratum_id) +
                       " spans multiple (admin1, urbanicity) combinations");
      continue;
    }
    cluster_ids.insert(c.cluster_id);
    ds.clusters.push_back(c);
  }

  std::set<Id> woman_ids;
  for (std::size_t i = 0; i < women.size(); ++i) {
    const WomanRecord& w = women[i];
    int row = static_cast<int>(i) + 2;
    if (woman_ids.count(w.woman_id)) {
      dropper.drop("women", row, "duplicate woman_id " + std::to_string(w.woman_id));
      continue;
    }
    if (!cluster_ids.count(w.cluster_id)) {
      dropper.drop("women", row, "dangling cluster_id " + std::to_string(w.cluster_id));
      continue;
    }
    if (!(w.weight > 0)) {
      dropper.drop("women", row, "non-positive weight");
      continue;
    }
    if (w.interview <= w.dob) {
      dropper.drop("women", row, "interview not after date of birth");
      continue;
    }
    int age_months = w.interview.cmc - w.dob.cmc;
    if (age_months < 180 || age_months >= 600) {
      dropper.drop("women", row, "age at interview " + std::to_string(age_months) +
                                     " months outside [180, 600)");
      continue;
    }
    woman_ids.insert(w.woman_id);
    ds.women.push_back(w);
  }

  std::map<Id, const WomanRecord*> by_id;
  for (const auto& w : ds.women) by_id[w.woman_id] = &w;
  for (std::size_t i = 0; i < births.size(); ++i) {
    const BirthRecord& b = births[i];
    int row = static_cast<int>(i) + 2;
    auto it = by_id.find(b.woman_id);
    if (it == by_id.end()) {
      dropper.drop("births", row, "dangling woman_id " + std::to_string(b.woman_id));
      continue;
    }
    const WomanRecord& mother = *it->second;
    if (b.birth.cmc < mother.dob.cmc + 120) {
      dropper.drop("births", row, "birth before mother's age 10 (corrupt record)");
      continue;
    }
    if (b.birth > mother.interview) {
      dropper.drop("births", row, "birth after mother's interview");
      continue;
    }
    ds.births.push_back(b);
  }

  // Canonical order: id-sorted, so the loaded dataset is independent of
  // input row permutation.
  std::sort(ds.clusters.begin(), ds.clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.cluster_id < b.cluster_id; });
  std::sort(ds.women.begin(), ds.women.end(), [](const WomanRecord& a, const WomanRecord& b) {
    return a.woman_id < b.woman_id;
  });
  std::sort(ds.births.begin(), ds.births.end(), [](const BirthRecord& a, const BirthRecord& b) {
    return a.woman_id != b.woman_id ? a.woman_id < b.woman_id : a.birth < b.birth;
  });

  ds.index();
  out.report.n_women = ds.women.size();
  out.report.n_births = ds.births.size();
  out.report.n_clusters = ds.clusters.size();
  return out;
}

LoadResult load_dataset(const std::string& women_path, const std::string& births_path,
                        const std::string& clusters_path,
                        const std::string& admin1_graph_path,
                        const std::string& admin2_graph_path, const LoadOptions& options) {
  RegionGraph g1 = RegionGraph::read_file(admin1_graph_path);
  RegionGraph g2 = RegionGraph::read_file(admin2_graph_path);

  csv::Table wt = csv::Table::read_file(women_path);
  std::vector<WomanRecord> women;
  {
    int c_id = wt.column("woman_id"), c_cl = wt.column("cluster_id"),
        c_dob = wt.column("dob_cmc"), c_int = wt.column("interview_cmc"),
        c_w = wt.column("weight");
    for (std::size_t r = 0; r < wt.n_rows(); ++r)
      women.push_back({wt.as_int(r, c_id), wt.as_int(r, c_cl),
                       cmc_of(static_cast<int>(wt.as_int(r, c_dob))),
                       cmc_of(static_cast<int>(wt.as_int(r, c_int))),
                       wt.as_double(r, c_w)});
  }

  csv::Table bt = csv::Table::read_file(births_path);
  std::vector<BirthRecord> births;
  {
    int c_id = bt.column("woman_id"), c_b = bt.column("birth_cmc");
    for (std::size_t r = 0; r < bt.n_rows(); ++r)
      births.push_back({bt.as_int(r, c_id), cmc_of(static_cast<int>(bt.as_int(r, c_b)))});
  }

  csv::Table ct = csv::Table::read_file(clusters_path);
  std::vector<Cluster> clusters;
  {
    int c_id = ct.column("cluster_id"), c_a1 = ct.column("admin1_id"),
        c_a2 = ct.column("admin2_id"), c_u = ct.column("urban"),
        c_s = ct.column("stratum_id");
    for (std::size_t r = 0; r < ct.n_rows(); ++r) {
      std::int64_t urb = ct.as_int(r, c_u);
      require(urb == 0 || urb == 1, ErrorCode::schema,
              clusters_path + " row " + std::to_string(ct.file_row(r)) +
                  ": urban must be 0 or 1");
      clusters.push_back({ct.as_int(r, c_id), static_cast<int>(ct.as_int(r, c_a1)),
                          static_cast<int>(ct.as_int(r, c_a2)), urb == 1,
                          ct.as_int(r, c_s)});
    }
  }

  return build_dataset(std::move(women), std::move(births), std::move(clusters),
                       std::move(g1), std::move(g2), options);
}

void write_women_csv(const std::vector<WomanRecord>& women, const std::string& path) {
  csv::Writer w(path);
  w.row({"woman_id", "cluster_id", "dob_cmc", "interview_cmc", "weight"});
  for (const auto& r : women)
    w.row({csv::Writer::num(r.woman_id), csv::Writer::num(r.cluster_id),
           csv::Writer::num(r.dob.cmc), csv::Writer::num(r.interview.cmc),
           csv::Writer::num(r.weight)});
}

void write_births_csv(const std::vector<BirthRecord>& births, const std::string& path) {
  csv::Writer w(path);
  w.row({"woman_id", "birth_cmc"});
  for (const auto& r : births)
    w.row({csv::Writer::num(r.woman_id), csv::Writer::num(r.birth.cmc)});
}

void write_clusters_csv(const std::vector<Cluster>& clusters, const std::string& path) {
  csv::Writer w(path);
  w.row({"cluster_id", "admin1_id", "admin2_id", "urban", "stratum_id"});
  for (const auto& c : clusters)
    w.row({csv::Writer::num(c.cluster_id), csv::Writer::num(c.admin1_id),
           csv::Writer::num(c.admin2_id), std::string(c.urban ? "1" : "0"),
           csv::Writer::num(c.stratum_id)});
}

CovariateTable read_covariates_csv(const std::string& path) {
  csv::Table t = csv::Table::read_file(path);
  int c_area = t.column("area_id"), c_name = t.column("name"), c_val = t.column("value");
  CovariateTable out;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const std::string& name = t.cell(r, c_name);
    auto it = std::find(out.names.begin(), out.names.end(), name);
    if (it == out.names.end()) {
      out.names.push_back(name);
      it = out.names.end() - 1;
    }
    std::size_t col = static_cast<std::size_t>(it - out.names.begin());
    auto& vals = out.by_area[static_cast<int>(t.as_int(r, c_area))];
    if (vals.size() <= col) vals.resize(out.names.size(), 0.0);
    vals[col] = t.as_double(r, c_val);
  }
  for (auto& [area, vals] : out.by_area) {
    require(vals.size() == out.names.size(), ErrorCode::schema,
            path + ": area " + std::to_string(area) + " missing covariate values");
  }
  return out;
}

void write_covariates_csv(const CovariateTable& table, const std::string& path) {
  csv::Writer w(path);
  w.row({"area_id", "name", "value"});
  for (const auto& [area, vals] : table.by_area)
    for (std::size_t i = 0; i < table.names.size(); ++i)
      w.row({csv::Writer::num(area), table.names[i], csv::Writer::num(vals[i])});
}

}  // namespace fertsae
