#pragma once

// Constrained similarity network. Candidate edge weights combine three rules:
// same-class labeled pairs are boosted to the row node's neighborhood maximum
// (must-link), pairs with at least one unlabeled endpoint keep their cosine
// similarity when it clears the threshold delta, and different-class labeled
// pairs are dropped (cannot-link). Each directed row then keeps its knn
// strongest candidates; an undirected max-symmetrized view feeds clustering.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <ostream>

#include "data.hpp"

namespace mgce {

struct Edge {
  int to = 0;
  double w = 0.0;
  bool operator==(const Edge&) const = default;
};

struct SimilarityGraph {
  int n = 0;
  int knn = 0;
  double delta = 0.0;
  std::vector<std::vector<Edge>> rows;  // directed, each row sorted by neighbor id
};

struct SymmetrizedGraph {
  int n = 0;
  std::vector<std::vector<Edge>> adj;  // undirected: every edge appears in both lists
  double total_weight = 0.0;           // each undirected edge counted once
};

// (cos + 1)/2, mapped into [0,1].
inline double pairwise_similarity(const double* zi, const double* zj, int d) {
  double c = cosine(zi, zj, d);
  c = std::clamp(c, -1.0, 1.0);
  return (c + 1.0) / 2.0;
}

namespace detail {

// Unit-normalized copies of the feature rows; throws on a zero row.
inline Matrix normalized_rows(const Matrix& feats) {
  Matrix u(feats.n, feats.d);
  for (int i = 0; i < feats.n; ++i) normalize(feats.row(i), u.row(i), feats.d);
  return u;
}

inline double sim_from_unit(const double* ui, const double* uj, int d) {
  double c = std::clamp(dot(ui, uj, d), -1.0, 1.0);
  return (c + 1.0) / 2.0;
}

}  // namespace detail

// Largest similarity from row i to any other row (self excluded).
inline double s_max(int i, const EmbeddingSet& set, const Matrix* features = nullptr) {
  const Matrix& f = features ? *features : set.rows;
  if (f.n < 2) throw std::runtime_error("s_max needs at least 2 rows");
  Matrix u = detail::normalized_rows(f);
  double best = 0.0;
  for (int j = 0; j < f.n; ++j)
    if (j != i) best = std::max(best, detail::sim_from_unit(u.row(i), u.row(j), f.d));
  return best;
}

// Optional hook for plugging in an approximate candidate source; the default
// scans every other node (exact brute force).
using CandidateFn = std::function<std::vector<int>(int node)>;

inline SimilarityGraph build_graph(const EmbeddingSet& set, const Matrix& features, int knn,
                                   double delta, const CandidateFn& candidates = nullptr) {
  const int n = features.n;
  if (n != set.size()) throw std::runtime_error("features not aligned with samples");
  if (knn < 1 || knn >= n) throw std::runtime_error("knn out of range");
  if (delta < 0.0 || delta >= 1.0) throw std::runtime_error("delta out of range");

  Matrix u = detail::normalized_rows(features);

  SimilarityGraph g;
  g.n = n;
  g.knn = knn;
  g.delta = delta;
  g.rows.resize(n);

  std::vector<int> all;
  if (!candidates) {
    all.resize(n);
    for (int j = 0; j < n; ++j) all[j] = j;
  }

  std::vector<Edge> cand;
  for (int i = 0; i < n; ++i) {
    const std::vector<int>& js = candidates ? candidates(i) : all;
    const Sample& si = set.samples[i];

    double smax_i = 0.0;
    for (int j : js)
      if (j != i) smax_i = std::max(smax_i, detail::sim_from_unit(u.row(i), u.row(j), u.d));

    cand.clear();
    for (int j : js) {
      if (j == i) continue;
      const Sample& sj = set.samples[j];
      const bool both_labeled = si.label.has_value() && sj.label.has_value();
      double w = 0.0;
      if (both_labeled && *si.label == *sj.label) {
        w = smax_i;
      } else if (!both_labeled) {
        double s = detail::sim_from_unit(u.row(i), u.row(j), u.d);
        if (s > delta) w = s;
      }
      if (w > 0.0) cand.push_back({j, w});
    }

    // top-knn by weight, ties broken toward the lower neighbor id
    std::sort(cand.begin(), cand.end(), [](const Edge& a, const Edge& b) {
      if (a.w != b.w) return a.w > b.w;
      return a.to < b.to;
    });
    if (static_cast<int>(cand.size()) > knn) cand.resize(knn);
    std::sort(cand.begin(), cand.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    g.rows[i] = cand;
  }
  return g;
}

inline SimilarityGraph build_graph(const EmbeddingSet& set, int knn, double delta) {
  return build_graph(set, set.rows, knn, delta);
}

// w(i,j) = max of the two directed weights; isolated nodes stay present.
inline SymmetrizedGraph symmetrize(const SimilarityGraph& g) {
  SymmetrizedGraph s;
  s.n = g.n;
  s.adj.resize(g.n);
  std::vector<std::vector<Edge>> upper(g.n);  // i < j buckets
  for (int i = 0; i < g.n; ++i)
    for (const Edge& e : g.rows[i]) {
      int a = std::min(i, e.to), b = std::max(i, e.to);
      auto& bucket = upper[a];
      auto it = std::find_if(bucket.begin(), bucket.end(), [&](const Edge& x) { return x.to == b; });
      if (it == bucket.end()) bucket.push_back({b, e.w});
      else it->w = std::max(it->w, e.w);
    }
  for (int a = 0; a < g.n; ++a) {
    std::sort(upper[a].begin(), upper[a].end(),
              [](const Edge& x, const Edge& y) { return x.to < y.to; });
    for (const Edge& e : upper[a]) {
      s.adj[a].push_back(e);
      s.adj[e.to].push_back({a, e.w});
      s.total_weight += e.w;
    }
  }
  for (auto& lst : s.adj)
    std::sort(lst.begin(), lst.end(), [](const Edge& x, const Edge& y) { return x.to < y.to; });
  return s;
}

inline void dump_graph(std::ostream& os, const SimilarityGraph& g) {
  char buf[64];
  for (int i = 0; i < g.n; ++i)
    for (const Edge& e : g.rows[i]) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.9g\n", i, e.to, e.w);
      os << buf;
    }
}

}  // namespace mgce
