#pragma once

// Coarse-to-fine adaptive selection of the neighborhood size k_nn. The coarse
// stage scans powers of two {4..512} by labeled-subset clustering accuracy;
// the fine stage scans the integer interval between the neighboring coarse
// values (step 10, or 50 for wide intervals) and picks the candidate with the
// best error-adjusted accuracy, where the error rate compares the number of
// labeled-covering communities K_est against K_true = K_L.

#include <algorithm>

#include "evaluation.hpp"
#include "infomap.hpp"

namespace mgce {

struct CoarseRow {
  int k = 0;
  double acc = 0.0;
};

struct FineRow {
  int k = 0;
  double acc = 0.0;
  int k_est = 0;
  double err_rate = 0.0;
  double err_acc = 0.0;
};

struct KnnSearchReport {
  std::vector<CoarseRow> coarse_results;
  std::vector<FineRow> fine_results;
  int k_coarse = 0;
  int chosen = 0;
};

inline double err_acc(double acc, int k_true, int k_est) {
  if (k_est < 1) throw std::runtime_error("k_est must be >= 1");
  const double err_rate = std::abs(static_cast<double>(k_true - k_est)) / k_est;
  return acc * (1.0 - err_rate);
}

namespace detail {

struct LabeledEval {
  double acc = 0.0;
  int k_est = 0;  // communities containing at least one labeled sample
};

inline LabeledEval eval_labeled(const EmbeddingSet& set, const Partition& part) {
  std::vector<int> y_true, y_pred;
  for (int i = 0; i < set.size(); ++i)
    if (set.samples[i].label) {
      y_true.push_back(*set.samples[i].label);
      y_pred.push_back(part.assignment[i]);
    }
  LabeledEval ev;
  ev.acc = hungarian_acc(y_true, y_pred).first;
  std::vector<char> covered(part.count(), 0);
  for (int c : y_pred) covered[c] = 1;
  for (char f : covered) ev.k_est += f;
  return ev;
}

}  // namespace detail

inline std::pair<int, std::vector<CoarseRow>> coarse_search(const EmbeddingSet& set,
                                                            const Matrix& features, double delta,
                                                            uint64_t seed) {
  const int n = set.size();
  if (n < 5) throw std::runtime_error("adaptive knn selection needs at least 5 samples");

  std::vector<CoarseRow> rows;
  int best_k = -1;
  double best_acc = -1.0;
  for (int e = 2; e <= 9; ++e) {
    const int k = 1 << e;
    if (k > n - 1) break;
    Partition part = semi_infomap(set, features, k, delta, seed);
    const double acc = detail::eval_labeled(set, part).acc;
    rows.push_back({k, acc});
    if (acc > best_acc) { best_acc = acc; best_k = k; }  // ties keep the smaller k
  }
  if (best_k < 0) throw std::runtime_error("no valid coarse candidate");
  return {best_k, rows};
}

inline KnnSearchReport fine_search(const EmbeddingSet& set, const Matrix& features, double delta,
                                   uint64_t seed, int k_coarse,
                                   std::vector<CoarseRow> coarse_rows = {}) {
  const int n = set.size();
  int lo = k_coarse >= 8 ? k_coarse / 2 : k_coarse;   // neighboring coarse value below
  int hi = k_coarse <= 256 ? k_coarse * 2 : k_coarse; // neighboring coarse value above
  lo = std::clamp(lo, 1, n - 1);
  hi = std::clamp(hi, 1, n - 1);

  const int step = (hi - lo) < 200 ? 10 : 50;
  std::vector<int> cands;
  for (int k = lo; k < hi; k += step) cands.push_back(k);
  cands.push_back(hi);
  cands.push_back(k_coarse);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  KnnSearchReport rep;
  rep.coarse_results = std::move(coarse_rows);
  rep.k_coarse = k_coarse;

  const int k_true = gcd_counts(set).k_labeled;
  int best_k = -1;
  double best = -std::numeric_limits<double>::infinity();
  for (int k : cands) {
    Partition part = semi_infomap(set, features, k, delta, seed);
    auto ev = detail::eval_labeled(set, part);
    FineRow row;
    row.k = k;
    row.acc = ev.acc;
    row.k_est = ev.k_est;
    row.err_rate = ev.k_est > 0
                       ? std::abs(static_cast<double>(k_true - ev.k_est)) / ev.k_est
                       : 1.0;
    row.err_acc = ev.acc * (1.0 - row.err_rate);
    rep.fine_results.push_back(row);
    if (row.err_acc > best) { best = row.err_acc; best_k = k; }  // ties keep the smaller k
  }
  rep.chosen = best_k;
  return rep;
}

inline KnnSearchReport select_knn_report(const EmbeddingSet& set, const Matrix& features,
                                         double delta, uint64_t seed) {
  auto [k_coarse, rows] = coarse_search(set, features, delta, seed);
  return fine_search(set, features, delta, seed, k_coarse, std::move(rows));
}

inline int select_knn(const EmbeddingSet& set, const Matrix& features, double delta,
                      uint64_t seed) {
  return select_knn_report(set, features, delta, seed).chosen;
}

inline int select_knn(const EmbeddingSet& set, double delta, uint64_t seed) {
  return select_knn(set, set.rows, delta, seed);
}

inline void write_knn_report_csv(std::ostream& os, const KnnSearchReport& rep) {
  os << "k,acc,k_est,err_rate,err_acc,stage\n";
  char buf[128];
  for (const CoarseRow& r : rep.coarse_results) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,,,,coarse\n", r.k, r.acc);
    os << buf;
  }
  for (const FineRow& r : rep.fine_results) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%d,%.10g,%.10g,fine\n", r.k, r.acc, r.k_est,
                  r.err_rate, r.err_acc);
    os << buf;
  }
}

}  // namespace mgce
