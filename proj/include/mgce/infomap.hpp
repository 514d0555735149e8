#pragma once

// Two-level map-equation community detection on undirected weighted graphs.
//
// Flow model: node visit rate p_i = degree_i / (2W); the flow carried by an
// edge is w/(2W) per direction. For a partition with module exit flows q_m,
// module contents P_m and q^ = sum_m q_m, the codelength in bits is
//
//   L = plogp(q^) - 2*sum_m plogp(q_m) + sum_m plogp(q_m + P_m)
//       - sum_i plogp(p_i)
//
// which is the expanded form of the index/module entropy decomposition.
// The optimizer is deterministic Louvain-style local moving (node-id order,
// strict improvement > 1e-12 bits) with graph aggregation, repeated until a
// fixed point, followed by node-level refinement. Isolated nodes carry zero
// flow and end up as singleton communities.

#include <algorithm>
#include <map>
#include <numeric>

#include "graph.hpp"

namespace mgce {

struct Partition {
  std::vector<int> assignment;           // node -> dense community id
  std::vector<std::vector<int>> members;  // sorted node lists per community
  std::vector<int> sizes;

  int count() const { return static_cast<int>(members.size()); }

  static Partition from_assignment(std::vector<int> raw) {
    // densify ids, communities ordered by smallest member node
    Partition p;
    p.assignment.assign(raw.size(), -1);
    std::map<int, int> remap;
    for (size_t i = 0; i < raw.size(); ++i)
      if (!remap.count(raw[i])) {
        int id = static_cast<int>(remap.size());
        remap[raw[i]] = id;
        p.members.emplace_back();
      }
    for (size_t i = 0; i < raw.size(); ++i) {
      int c = remap[raw[i]];
      p.assignment[i] = c;
      p.members[c].push_back(static_cast<int>(i));
    }
    p.sizes.resize(p.members.size());
    for (size_t c = 0; c < p.members.size(); ++c) p.sizes[c] = static_cast<int>(p.members[c].size());
    return p;
  }

  bool operator==(const Partition&) const = default;
};

struct FlowGraph {
  int n = 0;
  std::vector<double> p;                    // visit rates, sum <= 1 (isolated nodes: 0)
  std::vector<std::vector<Edge>> adj;       // per-direction flow w/(2W)
  std::vector<double> out;                  // total flow leaving each node

  static FlowGraph from_graph(const SymmetrizedGraph& g) {
    FlowGraph f;
    f.n = g.n;
    f.p.assign(g.n, 0.0);
    f.out.assign(g.n, 0.0);
    f.adj.resize(g.n);
    if (g.total_weight <= 0.0) return f;
    const double two_w = 2.0 * g.total_weight;
    for (int i = 0; i < g.n; ++i) {
      f.adj[i].reserve(g.adj[i].size());
      for (const Edge& e : g.adj[i]) {
        const double flow = e.w / two_w;
        f.adj[i].push_back({e.to, flow});
        f.p[i] += flow;
        f.out[i] += flow;
      }
    }
    return f;
  }
};

// Exact two-level codelength of `part` on `flow`, in bits.
inline double map_equation(const FlowGraph& flow, const Partition& part) {
  if (flow.n == 0) throw std::runtime_error("empty graph");
  if (static_cast<int>(part.assignment.size()) != flow.n)
    throw std::runtime_error("partition does not cover the graph");
  const int k = part.count();
  std::vector<double> q(k, 0.0), content(k, 0.0);
  for (int i = 0; i < flow.n; ++i) {
    const int m = part.assignment[i];
    if (m < 0 || m >= k) throw std::runtime_error("partition does not cover the graph");
    content[m] += flow.p[i];
    for (const Edge& e : flow.adj[i])
      if (part.assignment[e.to] != m) q[m] += e.w;
  }
  double q_total = 0.0, l = 0.0;
  for (int m = 0; m < k; ++m) q_total += q[m];
  l += plogp(q_total);
  for (int m = 0; m < k; ++m) l -= 2.0 * plogp(q[m]);
  for (int m = 0; m < k; ++m) l += plogp(q[m] + content[m]);
  for (int i = 0; i < flow.n; ++i) l -= plogp(flow.p[i]);
  return l;
}

namespace detail {

constexpr double kMinGain = 1e-12;

struct LevelState {
  const FlowGraph* g;
  std::vector<int> mod;       // node -> module
  std::vector<double> q;      // module exit flow
  std::vector<double> pm;     // module content
  std::vector<int> size;      // nodes per module
  double q_total = 0.0;

  void init(const FlowGraph& graph) {
    g = &graph;
    const int n = graph.n;
    mod.resize(n);
    std::iota(mod.begin(), mod.end(), 0);
    q = graph.out;
    pm = graph.p;
    size.assign(n, 1);
    q_total = std::accumulate(q.begin(), q.end(), 0.0);
  }

  // One full sweep in node-id order; returns the number of moves taken.
  int sweep() {
    int moves = 0;
    std::vector<std::pair<int, double>> mod_flow;  // module -> flow from node i
    for (int i = 0; i < g->n; ++i) {
      const int a = mod[i];
      if (g->adj[static_cast<size_t>(i)].empty()) continue;  // zero-flow node stays put

      mod_flow.clear();
      for (const Edge& e : g->adj[static_cast<size_t>(i)]) {
        const int m = mod[e.to];
        bool found = false;
        for (auto& [mm, fl] : mod_flow)
          if (mm == m) { fl += e.w; found = true; break; }
        if (!found) mod_flow.emplace_back(m, e.w);
      }
      std::sort(mod_flow.begin(), mod_flow.end());

      const double out_i = g->out[static_cast<size_t>(i)];
      const double p_i = g->p[static_cast<size_t>(i)];
      double k_ia = 0.0;
      for (auto& [m, fl] : mod_flow)
        if (m == a) k_ia = fl;

      const double qa_new = q[a] - out_i + 2.0 * k_ia;
      const double rm_old = -2.0 * plogp(q[a]) + plogp(q[a] + pm[a]);
      const double rm_new = -2.0 * plogp(qa_new) + plogp(qa_new + pm[a] - p_i);

      double best_gain = -kMinGain;
      int best_mod = -1;  // -1: stay; -2: move to a fresh singleton module
      double best_qb_new = 0.0;

      auto consider = [&](int b, double k_ib, double qb, double pb) {
        if (b == a && size[a] == 1) return;  // already a singleton; "fresh" is a no-op
        const double qb_new = qb + out_i - 2.0 * k_ib;
        double gain = plogp(q_total + (qa_new - q[a]) + (qb_new - qb)) - plogp(q_total);
        gain += rm_new - rm_old;
        gain += -2.0 * plogp(qb_new) + plogp(qb_new + pb + p_i) + 2.0 * plogp(qb) - plogp(qb + pb);
        if (gain < best_gain) {
          best_gain = gain;
          best_mod = b == a ? -2 : b;
          best_qb_new = qb_new;
        }
      };

      for (auto& [b, k_ib] : mod_flow)
        if (b != a) consider(b, k_ib, q[b], pm[b]);
      consider(a, 0.0, 0.0, 0.0);  // fresh empty module

      if (best_mod == -1) continue;
      ++moves;
      int b = best_mod;
      if (b == -2) {  // allocate a fresh module id
        b = static_cast<int>(q.size());
        q.push_back(0.0);
        pm.push_back(0.0);
        size.push_back(0);
        best_qb_new = out_i;
      }
      q_total += (qa_new - q[a]) + (best_qb_new - q[b]);
      q[a] = qa_new;
      pm[a] -= p_i;
      --size[a];
      q[b] = best_qb_new;
      pm[b] += p_i;
      ++size[b];
      mod[i] = b;
    }
    return moves;
  }

  // Sweeps until stable; returns true if anything moved.
  bool optimize() {
    bool any = false;
    while (sweep() > 0) any = true;
    return any;
  }
};

inline FlowGraph aggregate(const FlowGraph& g, const std::vector<int>& mod, int k) {
  FlowGraph agg;
  agg.n = k;
  agg.p.assign(k, 0.0);
  agg.out.assign(k, 0.0);
  agg.adj.resize(k);
  std::vector<std::map<int, double>> acc(k);
  for (int i = 0; i < g.n; ++i) {
    agg.p[mod[i]] += g.p[i];
    for (const Edge& e : g.adj[i]) {
      const int a = mod[i], b = mod[e.to];
      if (a != b) acc[a][b] += e.w;  // internal flow folds into p only
    }
  }
  for (int m = 0; m < k; ++m)
    for (auto& [to, fl] : acc[m]) {
      agg.adj[m].push_back({to, fl});
      agg.out[m] += fl;
    }
  return agg;
}

inline std::vector<int> dense_ids(const std::vector<int>& mod, int* k_out) {
  std::map<int, int> remap;
  std::vector<int> out(mod.size());
  for (size_t i = 0; i < mod.size(); ++i) {
    auto [it, fresh] = remap.emplace(mod[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  *k_out = static_cast<int>(remap.size());
  return out;
}

}  // namespace detail

inline Partition detect_communities(const SymmetrizedGraph& g, uint64_t /*seed*/ = 0) {
  if (g.n < 1) throw std::runtime_error("empty graph");
  const FlowGraph base = FlowGraph::from_graph(g);

  std::vector<int> assign(g.n);
  std::iota(assign.begin(), assign.end(), 0);

  // Outer loop: node-level refinement of the current assignment, then repeated
  // aggregation passes, until neither level improves.
  bool improved = true;
  while (improved) {
    improved = false;

    detail::LevelState st;
    st.init(base);
    st.mod = assign;
    // rebuild module stats for the warm start
    int k = 0;
    st.mod = detail::dense_ids(st.mod, &k);
    st.q.assign(k, 0.0);
    st.pm.assign(k, 0.0);
    st.size.assign(k, 0);
    for (int i = 0; i < g.n; ++i) {
      st.pm[st.mod[i]] += base.p[i];
      ++st.size[st.mod[i]];
      for (const Edge& e : base.adj[i])
        if (st.mod[e.to] != st.mod[i]) st.q[st.mod[i]] += e.w;
    }
    st.q_total = std::accumulate(st.q.begin(), st.q.end(), 0.0);
    if (st.optimize()) improved = true;
    assign = st.mod;

    // aggregation ladder
    int levels_k = 0;
    std::vector<int> level_assign = detail::dense_ids(assign, &levels_k);
    FlowGraph cur = detail::aggregate(base, level_assign, levels_k);
    std::vector<int> composite = level_assign;
    bool ladder_improved = false;
    while (true) {
      detail::LevelState ls;
      ls.init(cur);
      if (!ls.optimize()) break;
      ladder_improved = true;
      int k2 = 0;
      std::vector<int> lm = detail::dense_ids(ls.mod, &k2);
      for (int& c : composite) c = lm[c];
      if (k2 == cur.n) break;
      cur = detail::aggregate(cur, lm, k2);
    }
    if (ladder_improved) {
      assign = composite;
      improved = true;
    }
  }

  return Partition::from_assignment(assign);
}

// Constrained clustering pipeline: constrained graph -> symmetrize -> map
// equation optimization. `features` selects the representation space; labels
// and splits always come from `set`.
inline Partition semi_infomap(const EmbeddingSet& set, const Matrix& features, int knn,
                              double delta, uint64_t seed) {
  SimilarityGraph g = build_graph(set, features, knn, delta);
  return detect_communities(symmetrize(g), seed);
}

inline Partition semi_infomap(const EmbeddingSet& set, int knn, double delta, uint64_t seed) {
  return semi_infomap(set, set.rows, knn, delta, seed);
}

}  // namespace mgce
