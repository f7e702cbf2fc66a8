#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fertsae/cmc.hpp"
#include "fertsae/region_graph.hpp"

namespace fertsae {

using Id = std::int64_t;

struct WomanRecord {
  Id woman_id = 0;
  Id cluster_id = 0;
  CmcDate dob;
  CmcDate interview;
  double weight = 0;  // design weight w_j, strictly positive
};

struct BirthRecord {
  Id woman_id = 0;
  CmcDate birth;
};

struct Cluster {
  Id cluster_id = 0;
  int admin1_id = 0;  // 1-based region index
  int admin2_id = 0;  // 1-based district index, nests within admin1
  bool urban = false;
  Id stratum_id = 0;  // stratum = (admin1, urbanicity)
};

/// Per-area covariate table, keyed by area id (admin level of the consumer's
/// choosing); column-major named values.
struct CovariateTable {
  std::vector<std::string> names;
  std::map<int, std::vector<double>> by_area;  // area_id -> values, one per name

  bool empty() const { return names.empty(); }
};

struct LoadIssue {
  std::string file;
  int row = 0;  // 1-based file row (header = 1); 0 when not row-specific
  std::string reason;
};

struct LoadReport {
  std::size_t n_women = 0;
  std::size_t n_births = 0;
  std::size_t n_clusters = 0;
  std::vector<LoadIssue> dropped;
  std::string summary() const;
};

class SurveyDataset {
 public:
  std::vector<WomanRecord> women;
  std::vector<BirthRecord> births;
  std::vector<Cluster> clusters;
  RegionGraph admin1_graph;
  RegionGraph admin2_graph;
  CovariateTable covariates;

  const Cluster& cluster_of(Id cluster_id) const;
  const WomanRecord& woman(Id woman_id) const;
  bool has_cluster(Id cluster_id) const;

  /// Latest interview month over all women.
  CmcDate latest_interview() const;

  void index();  // rebuild id lookups after direct mutation

 private:
  std::map<Id, std::size_t> cluster_index_;
  std::map<Id, std::size_t> woman_index_;
};

struct LoadOptions {
  bool strict = false;  // strict: abort on first invalid row instead of dropping
};

struct LoadResult {
  SurveyDataset dataset;
  LoadReport report;
};

/// Loads and cross-validates the survey schemas:
///   women.csv    woman_id,cluster_id,dob_cmc,interview_cmc,weight
///   births.csv   woman_id,birth_cmc
///   clusters.csv cluster_id,admin1_id,admin2_id,urban,stratum_id
/// Rows violating invariants are dropped with row-numbered diagnostics
/// (strict mode aborts on the first). Structural errors (missing files,
/// schema mismatch, non-symmetric adjacency) always throw.
LoadResult load_dataset(const std::string& women_path, const std::string& births_path,
                        const std::string& clusters_path,
                        const std::string& admin1_graph_path,
                        const std::string& admin2_graph_path,
                        const LoadOptions& options = {});

/// Assembles a dataset from in-memory rows, applying the same invariants.
LoadResult build_dataset(std::vector<WomanRecord> women, std::vector<BirthRecord> births,
                         std::vector<Cluster> clusters, RegionGraph admin1,
                         RegionGraph admin2, const LoadOptions& options = {});

void write_women_csv(const std::vector<WomanRecord>& women, const std::string& path);
void write_births_csv(const std::vector<BirthRecord>& births, const std::string& path);
void write_clusters_csv(const std::vector<Cluster>& clusters, const std::string& path);

/// covariates.csv: area_id,name,value (long format).
CovariateTable read_covariates_csv(const std::string& path);
void write_covariates_csv(const CovariateTable& table, const std::string& path);

}  // namespace fertsae
