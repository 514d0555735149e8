#pragma once

// Test-only reference implementations, deliberately independent of the
// production code paths they check:
//  - exhaustive set-partition search with its own entropy-form codelength
//  - exhaustive injective cluster-to-class matching
//  - central finite differences over a flat parameter vector

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "mgce/infomap.hpp"

namespace mgce::oracle {

// Codelength from the raw undirected graph, computed as the weighted sum of
// index/module entropies (a different algebraic route than the production
// plogp expansion).
inline double codelength(const SymmetrizedGraph& g, const std::vector<int>& assign) {
  double total_w = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (const Edge& e : g.adj[i])
      if (e.to > i) total_w += e.w;
  if (total_w <= 0.0) return 0.0;
  const double two_w = 2.0 * total_w;

  const int k = 1 + *std::max_element(assign.begin(), assign.end());
  std::vector<double> q(k, 0.0);
  std::vector<std::vector<double>> visits(k);
  for (int i = 0; i < g.n; ++i) {
    double deg = 0.0;
    for (const Edge& e : g.adj[i]) {
      deg += e.w;
      if (assign[e.to] != assign[i]) q[assign[i]] += e.w / two_w;
    }
    visits[assign[i]].push_back(deg / two_w);
  }

  auto entropy = [](const std::vector<double>& xs) {
    double h = 0.0;
    for (double x : xs)
      if (x > 0.0) h -= x * std::log2(x);
    return h;
  };

  double q_total = std::accumulate(q.begin(), q.end(), 0.0);
  double l = 0.0;
  if (q_total > 0.0) {
    std::vector<double> norm(k);
    for (int m = 0; m < k; ++m) norm[m] = q[m] / q_total;
    l += q_total * entropy(norm);
  }
  for (int m = 0; m < k; ++m) {
    double t = q[m];
    for (double p : visits[m]) t += p;
    if (t <= 0.0) continue;
    std::vector<double> norm;
    norm.push_back(q[m] / t);
    for (double p : visits[m]) norm.push_back(p / t);
    l += t * entropy(norm);
  }
  return l;
}

struct BestPartition {
  std::vector<int> assign;
  double codelength = 0.0;
  bool unique = true;  // no other partition within 1e-9 bits of the optimum
};

// Exhaustive minimization over all set partitions (restricted-growth
// enumeration; first optimum in enumeration order wins ties).
inline BestPartition brute_force_partition(const SymmetrizedGraph& g) {
  if (g.n > 8) throw std::runtime_error("oracle size limit");
  if (g.n < 1) throw std::runtime_error("empty graph");

  BestPartition best;
  best.codelength = std::numeric_limits<double>::infinity();
  double runner_up = std::numeric_limits<double>::infinity();
  std::vector<int> assign(g.n, 0);

  std::function<void(int, int)> rec = [&](int node, int used) {
    if (node == g.n) {
      const double l = codelength(g, assign);
      if (l < best.codelength) {  // strict: ties keep the first in enumeration order
        runner_up = best.codelength;
        best.codelength = l;
        best.assign = assign;
      } else {
        runner_up = std::min(runner_up, l);
      }
      return;
    }
    for (int b = 0; b <= used; ++b) {
      assign[node] = b;
      rec(node + 1, std::max(used, b + 1));
    }
  };
  rec(0, 0);
  best.unique = runner_up - best.codelength > 1e-9;
  return best;
}

// Max accuracy over all injective cluster -> class maps.
inline double brute_force_matching(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size())
    throw std::runtime_error("label vectors must be nonempty and equal-sized");
  std::set<int> pred_ids(y_pred.begin(), y_pred.end());
  std::set<int> true_ids(y_true.begin(), y_true.end());
  if (pred_ids.size() > 6 || true_ids.size() > 6) throw std::runtime_error("oracle size limit");

  std::map<int, int> pi, ti;
  for (int v : pred_ids) pi.emplace(v, static_cast<int>(pi.size()));
  for (int v : true_ids) ti.emplace(v, static_cast<int>(ti.size()));
  const int s = static_cast<int>(std::max(pi.size(), ti.size()));

  std::vector<std::vector<int>> counts(s, std::vector<int>(s, 0));
  for (size_t i = 0; i < y_true.size(); ++i) ++counts[pi[y_pred[i]]][ti[y_true[i]]];

  std::vector<int> perm(s);
  std::iota(perm.begin(), perm.end(), 0);
  long long best = 0;
  do {
    long long hits = 0;
    for (int p = 0; p < s; ++p) hits += counts[p][perm[p]];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(y_true.size());
}

// Central finite differences of fn over the flat vector x.
inline std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& fn,
                                       std::vector<double> x, double step = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = fn(x);
    x[i] = orig - step;
    const double down = fn(x);
    x[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("non-finite probe in finite differences");
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace mgce::oracle
