#pragma once

#include <string>
#include <vector>

namespace fertsae {

/// Symmetric region adjacency with no self-loops. Regions are 1-based in
/// files and labels; internal storage is 0-based.
class RegionGraph {
 public:
  RegionGraph() = default;
  /// Validates symmetry and absence of self-loops; throws on violation.
  RegionGraph(int n, std::vector<std::vector<int>> neighbors,
              std::vector<std::string> labels = {});

  int size() const { return n_; }
  const std::vector<int>& neighbors(int i) const { return adj_[i]; }
  const std::string& label(int i) const { return labels_[i]; }

  /// Connected components, 0-based component id per node.
  std::vector<int> components() const;
  int n_components() const;

  static RegionGraph read_file(const std::string& path);
  void write_file(const std::string& path) const;

 private:
  int n_ = 0;
  std::vector<std::vector<int>> adj_;
  std::vector<std::string> labels_;
};

struct GraphReport {
  int n = 0;
  std::vector<std::pair<int, int>> asymmetric_pairs;  // 0-based (i,j): j lists i missing
  std::vector<int> self_loops;
  std::vector<int> isolated;
  int n_components = 0;
  std::vector<int> component_sizes;
  bool symmetric() const { return asymmetric_pairs.empty(); }
};

/// Report-only validation of raw adjacency lists (0-based),
/// usable before a RegionGraph can be constructed.
GraphReport validate_graph(int n, const std::vector<std::vector<int>>& neighbors);
GraphReport validate_graph(const RegionGraph& g);

/// Raw adjacency file parse without symmetry enforcement, for validation tools.
/// Format: first line n, then per region "i k j1 ... jk", 1-based indices.
std::pair<int, std::vector<std::vector<int>>> read_adjacency_file(const std::string& path);

}  // namespace fertsae
