#pragma once

// Small builders shared by the unit tests.

#include <optional>
#include <vector>

#include "mgce/data.hpp"
#include "mgce/graph.hpp"

namespace mgce::test {

// labels[i] >= 0 marks a labeled sample of that (dense) class; -1 is an
// unlabeled sample without ground truth.
inline EmbeddingSet make_set(const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels = {}) {
  EmbeddingSet set;
  set.dim = static_cast<int>(rows[0].size());
  set.rows = Matrix(static_cast<int>(rows.size()), set.dim);
  set.samples.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < set.dim; ++j) set.rows.at(static_cast<int>(i), j) = rows[i][j];
    Sample& s = set.samples[i];
    s.id = static_cast<int>(i);
    const int lab = labels.empty() ? -1 : labels[i];
    if (lab >= 0) {
      s.split = Split::LabeledKnown;
      s.label = lab;
      s.truth = lab;
    } else {
      s.split = Split::UnlabeledNovel;
    }
  }
  return set;
}

// Undirected weighted graph from an explicit edge list.
inline SymmetrizedGraph make_graph(int n, const std::vector<std::tuple<int, int, double>>& edges) {
  SymmetrizedGraph g;
  g.n = n;
  g.adj.resize(n);
  for (auto& [a, b, w] : edges) {
    g.adj[a].push_back({b, w});
    g.adj[b].push_back({a, w});
    g.total_weight += w;
  }
  return g;
}

}  // namespace mgce::test
