#pragma once

// Clustering accuracy via maximum-weight assignment between predicted
// clusters and ground-truth classes (contingency counts, square zero padding,
// O(n^3) potential-based solver on integer costs), the All/Old/New protocol,
// small-cluster filtering and inference-time cluster merging.

#include <algorithm>
#include <limits>
#include <map>

#include "data.hpp"
#include "infomap.hpp"

namespace mgce {

struct AccReport {
  double all_acc = 0.0, old_acc = 0.0, new_acc = 0.0;
  std::map<int, int> matching;  // predicted cluster id -> class id
  int k_est = 0;
};

namespace detail {

// Minimum-cost perfect assignment on a square integer matrix (potentials
// method). Returns the column matched to each row. Deterministic.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<long long>>& a) {
  const int n = static_cast<int>(a.size());
  const long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      long long delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          const long long cur = a[i0 - 1][j - 1] - u[i0] - v[j];
          if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
          if (minv[j] < delta) { delta = minv[j]; j1 = j; }
        }
      for (int j = 0; j <= n; ++j)
        if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
        else minv[j] -= delta;
      j0 = j1;
    } while (p[j0] != 0);
    do { const int j1 = way[j0]; p[j0] = p[j1]; j0 = j1; } while (j0);
  }
  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) match[p[j] - 1] = j - 1;
  return match;
}

inline std::map<int, int> dense_index(const std::vector<int>& ids) {
  std::map<int, int> idx;
  for (int v : ids) idx.emplace(v, 0);
  int next = 0;
  for (auto& [k, i] : idx) i = next++;
  return idx;
}

}  // namespace detail

// Hungarian-matched accuracy. Returns (acc, predicted-cluster -> class map).
inline std::pair<double, std::map<int, int>> hungarian_acc(const std::vector<int>& y_true,
                                                           const std::vector<int>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size())
    throw std::runtime_error("hungarian_acc needs equal nonempty label vectors");

  auto pred_idx = detail::dense_index(y_pred);
  auto true_idx = detail::dense_index(y_true);
  const int np = static_cast<int>(pred_idx.size());
  const int nt = static_cast<int>(true_idx.size());
  const int s = std::max(np, nt);

  std::vector<std::vector<long long>> counts(s, std::vector<long long>(s, 0));
  for (size_t i = 0; i < y_true.size(); ++i)
    ++counts[pred_idx.at(y_pred[i])][true_idx.at(y_true[i])];

  std::vector<std::vector<long long>> cost(s, std::vector<long long>(s, 0));
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) cost[i][j] = -counts[i][j];
  std::vector<int> match = detail::min_cost_assignment(cost);

  long long hits = 0;
  for (int i = 0; i < s; ++i)
    if (match[i] >= 0) hits += counts[i][match[i]];

  std::map<int, int> mapping;
  std::vector<int> true_orig(nt);
  for (auto& [orig, idx] : true_idx) true_orig[idx] = orig;
  for (auto& [orig, idx] : pred_idx)
    if (match[idx] >= 0 && match[idx] < nt) mapping[orig] = true_orig[match[idx]];

  return {static_cast<double>(hits) / static_cast<double>(y_true.size()), mapping};
}

// GCD protocol: fit one matching on all unlabeled instances, then restrict it
// to the known-class (old) and novel-class (new) subsets.
inline AccReport gcd_acc(const EmbeddingSet& set, const Partition& part) {
  if (static_cast<int>(part.assignment.size()) != set.size())
    throw std::runtime_error("partition does not cover the dataset");
  std::vector<int> y_true, y_pred;
  std::vector<Split> splits;
  for (int i = 0; i < set.size(); ++i) {
    const Sample& s = set.samples[i];
    if (s.split == Split::LabeledKnown) continue;
    if (!s.truth) throw std::runtime_error("missing ground truth");
    y_true.push_back(*s.truth);
    y_pred.push_back(part.assignment[i]);
    splits.push_back(s.split);
  }
  if (y_true.empty()) throw std::runtime_error("no unlabeled instances to evaluate");

  AccReport rep;
  auto [acc, mapping] = hungarian_acc(y_true, y_pred);
  rep.all_acc = acc;
  rep.matching = mapping;

  long long old_hits = 0, new_hits = 0, old_n = 0, new_n = 0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    auto it = rep.matching.find(y_pred[i]);
    const bool hit = it != rep.matching.end() && it->second == y_true[i];
    if (splits[i] == Split::UnlabeledKnown) { ++old_n; old_hits += hit; }
    else { ++new_n; new_hits += hit; }
  }
  rep.old_acc = old_n ? static_cast<double>(old_hits) / old_n : 1.0;
  rep.new_acc = new_n ? static_cast<double>(new_hits) / new_n : 1.0;

  int k = 0;
  for (int c = 0; c < part.count(); ++c)
    if (part.sizes[c] >= 4) ++k;
  rep.k_est = k;
  return rep;
}

// Number of communities holding at least `min_size` members.
inline int filter_small(const Partition& part, int min_size = 4) {
  int k = 0;
  for (int c = 0; c < part.count(); ++c)
    if (part.sizes[c] >= min_size) ++k;
  return k;
}

inline int estimate_k(const Partition& part) { return filter_small(part, 4); }

// Repeatedly folds the smallest cluster (ties: lower id) into the cluster
// whose centroid is most cosine-similar, until exactly k clusters remain.
inline Partition merge_to_k(const Partition& part, const Matrix& features, int k) {
  if (k < 1) throw std::runtime_error("target cluster count must be >= 1");
  if (part.count() < k) throw std::runtime_error("fewer clusters than the merge target");
  if (static_cast<int>(part.assignment.size()) != features.n)
    throw std::runtime_error("features do not cover the partition");

  std::vector<std::vector<int>> members = part.members;
  const int d = features.d;
  auto centroid = [&](const std::vector<int>& m, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int i : m)
      for (int j = 0; j < d; ++j) out[j] += features.at(i, j);
    for (double& v : out) v /= static_cast<double>(m.size());
  };

  std::vector<std::vector<double>> cents(members.size(), std::vector<double>(d));
  for (size_t c = 0; c < members.size(); ++c) centroid(members[c], cents[c]);
  std::vector<char> alive(members.size(), 1);
  int live = static_cast<int>(members.size());

  while (live > k) {
    int smallest = -1;
    for (size_t c = 0; c < members.size(); ++c)
      if (alive[c] && (smallest < 0 || members[c].size() < members[smallest].size()))
        smallest = static_cast<int>(c);

    int target = -1;
    double best = -2.0;
    for (size_t c = 0; c < members.size(); ++c) {
      if (!alive[c] || static_cast<int>(c) == smallest) continue;
      const double cs = cosine(cents[smallest].data(), cents[c].data(), d);
      if (cs > best) { best = cs; target = static_cast<int>(c); }
    }

    members[target].insert(members[target].end(), members[smallest].begin(),
                           members[smallest].end());
    std::sort(members[target].begin(), members[target].end());
    centroid(members[target], cents[target]);
    alive[smallest] = 0;
    --live;
  }

  std::vector<int> assign(part.assignment.size(), -1);
  for (size_t c = 0; c < members.size(); ++c)
    if (alive[c])
      for (int i : members[c]) assign[i] = static_cast<int>(c);
  return Partition::from_assignment(assign);
}

}  // namespace mgce
