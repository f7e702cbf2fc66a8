#include "fertsae/region_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fertsae/errors.hpp"

namespace fertsae {

RegionGraph::RegionGraph(int n, std::vector<std::vector<int>> neighbors,
                         std::vector<std::string> labels)
    : n_(n), adj_(std::move(neighbors)), labels_(std::move(labels)) {
  require(n_ >= 1, ErrorCode::graph, "region graph must have at least one region");
  require(static_cast<int>(adj_.size()) == n_, ErrorCode::graph,
          "adjacency list count does not match region count");
  GraphReport rep = validate_graph(n_, adj_);
  if (!rep.self_loops.empty())
    fail(ErrorCode::graph,
         "self-loop at region " + std::to_string(rep.self_loops.front() + 1));
  if (!rep.asymmetric_pairs.empty()) {
    auto [i, j] = rep.asymmetric_pairs.front();
    fail(ErrorCode::graph, "non-symmetric adjacency: region " + std::to_string(i + 1) +
                               " lists " + std::to_string(j + 1) +
                               " but not vice versa");
  }
  for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
  if (labels_.empty())
    for (int i = 0; i < n_; ++i) labels_.push_back(std::to_string(i + 1));
  require(static_cast<int>(labels_.size()) == n_, ErrorCode::graph,
          "label count does not match region count");
}

std::vector<int> RegionGraph::components() const {
  std::vector<int> comp(n_, -1);
  int c = 0;
  for (int start = 0; start < n_; ++start) {
    if (comp[start] >= 0) continue;
    std::vector<int> stack{start};
    comp[start] = c;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj_[v])
        if (comp[w] < 0) {
          comp[w] = c;
          stack.push_back(w);
        }
    }
    ++c;
  }
  return comp;
}

int RegionGraph::n_components() const {
  auto comp = components();
  return comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
}

std::pair<int, std::vector<std::vector<int>>> read_adjacency_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open adjacency file: " + path);
  int n = 0;
  if (!(in >> n) || n < 1)
    fail(ErrorCode::schema, path + ": first token must be the region count");
  std::vector<std::vector<int>> adj(n);
  for (int line = 0; line < n; ++line) {
    int idx = 0, k = 0;
    if (!(in >> idx >> k))
      fail(ErrorCode::schema, path + ": truncated adjacency entry " +
                                  std::to_string(line + 1));
    if (idx < 1 || idx > n)
      fail(ErrorCode::schema, path + ": region index " + std::to_string(idx) +
                                  " out of range 1.." + std::to_string(n));
    if (k < 0 || k >= n)
      fail(ErrorCode::schema, path + ": bad neighbor count for region " +
                                  std::to_string(idx));
    std::vector<int> nb(k);
    for (int j = 0; j < k; ++j) {
      if (!(in >> nb[j]))
        fail(ErrorCode::schema, path + ": truncated neighbor list for region " +
                                    std::to_string(idx));
      if (nb[j] < 1 || nb[j] > n)
        fail(ErrorCode::schema, path + ": neighbor index " + std::to_string(nb[j]) +
                                    " out of range for region " + std::to_string(idx));
      --nb[j];
    }
    adj[idx - 1] = std::move(nb);
  }
  return {n, std::move(adj)};
}

RegionGraph RegionGraph::read_file(const std::string& path) {
  auto [n, adj] = read_adjacency_file(path);
  return RegionGraph(n, std::move(adj));
}

void RegionGraph::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path);
  out << n_ << "\n";
  for (int i = 0; i < n_; ++i) {
    out << (i + 1) << " " << adj_[i].size();
    for (int j : adj_[i]) out << " " << (j + 1);
    out << "\n";
  }
}

GraphReport validate_graph(int n, const std::vector<std::vector<int>>& neighbors) {
  GraphReport rep;
  rep.n = n;
  auto has_edge = [&](int i, int j) {
    return std::find(neighbors[i].begin(), neighbors[i].end(), j) !=
           neighbors[i].end();
  };
  for (int i = 0; i < n; ++i) {
    if (neighbors[i].empty()) rep.isolated.push_back(i);
    for (int j : neighbors[i]) {
      if (j == i) rep.self_loops.push_back(i);
      else if (!has_edge(j, i)) rep.asymmetric_pairs.emplace_back(i, j);
    }
  }
  // Components on the symmetrized graph.
  std::vector<int> comp(n, -1);
  int c = 0;
  for (int start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    std::vector<int> stack{start};
    comp[start] = c;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      auto visit = [&](int w) {
        if (w >= 0 && w < n && comp[w] < 0) {
          comp[w] = c;
          stack.push_back(w);
        }
      };
      for (int w : neighbors[v]) visit(w);
      for (int u = 0; u < n; ++u)
        if (comp[u] < 0 && has_edge(u, v)) visit(u);
    }
    ++c;
  }
  rep.n_components = c;
  rep.component_sizes.assign(c, 0);
  for (int i = 0; i < n; ++i) rep.component_sizes[comp[i]]++;
  return rep;
}

GraphReport validate_graph(const RegionGraph& g) {
  std::vector<std::vector<int>> adj(g.size());
  for (int i = 0; i < g.size(); ++i) adj[i] = g.neighbors(i);
  return validate_graph(g.size(), adj);
}

}  // namespace fertsae
