#pragma once

// Alternating training loop: each epoch re-clusters the dataset per expert
// (constrained graph + map-equation communities), re-initializes the concept
// memories from the fresh partitions, then runs mini-batch SGD on the joint
// objective with cosine learning-rate decay. Augmented views are embedding-
// space Gaussian noise. Everything is sequential and seeded, so two runs from
// the same config produce identical logs and parameters.

#include <cstdio>
#include <optional>
#include <sstream>

#include "evaluation.hpp"
#include "knn_select.hpp"
#include "losses.hpp"

namespace mgce {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 128;
  double lr0 = 0.05;
  uint64_t seed = 1;
  bool k_u_known = false;
  int k = 0;            // known total class count; 0 = take from ground truth
  int knn = 0;          // base neighborhood size; 0 = adaptive selection
  int encoder_dim = 0;  // 0 = input dim
  int phi_hidden = 0;   // 0 = 4*d
  Hyper hyper;
  LossFlags flags;

  void validate() const {
    if (epochs < 0) throw std::runtime_error("epochs must be >= 0");
    if (batch_size < 2) throw std::runtime_error("batch size must be >= 2");
    if (!(lr0 > 0.0)) throw std::runtime_error("lr must be > 0");
  }
};

struct EpochState {
  int epoch = 0;
  std::array<Partition, 3> parts;
  std::vector<ConceptMemory> memories;  // one per expert; disabled experts stay empty
  double tau_t = 0.0;
};

struct EpochSummary {
  int epoch = 0;
  std::optional<AccReport> acc;
  std::array<int, 3> kg = {0, 0, 0};
  int k_est = 0;
};

struct TrainResult {
  ModelParams params;
  int k1 = 0;
  ExpertConfig experts;
  Partition final_partition;              // expert 1, merged down to K when known
  std::array<Partition, 3> final_parts;
  std::vector<EpochSummary> summaries;
  std::string step_log;   // csv: epoch,step,loss_total,loss_con,loss_cls,loss_c,loss_t,kg1,kg2,kg3,lr,tau_t
  std::string epoch_log;  // csv: epoch,acc_all,acc_old,acc_new,kg1,kg2,kg3,k_est
};

namespace detail {

// Clustering space for one expert: raw encoder output at epoch 0 (heads are
// untrained), that expert's normalized projection afterwards.
inline Matrix expert_features(const EmbeddingSet& set, const ModelParams& p, int expert,
                              int epoch) {
  Matrix f(set.size(), p.d);
  for (int i = 0; i < set.size(); ++i) {
    EncCache enc = nn::encode(p, set.rows.row(i));
    if (epoch == 0) {
      std::copy(enc.z.begin(), enc.z.end(), f.row(i));
    } else {
      HeadCache hc = nn::head_forward(p, p.experts[expert - 1], enc.z.data());
      std::copy(hc.u.begin(), hc.u.end(), f.row(i));
    }
  }
  return f;
}

inline double mean_row_norm(const Matrix& rows) {
  double s = 0.0;
  for (int i = 0; i < rows.n; ++i) s += norm2(rows.row(i), rows.d);
  return rows.n ? s / rows.n : 0.0;
}

}  // namespace detail

inline EpochState epoch_setup(int epoch, const EmbeddingSet& set, const ModelParams& params,
                              const TrainConfig& cfg, const ExpertConfig& experts) {
  EpochState st;
  st.epoch = epoch;
  st.tau_t = cfg.hyper.tau_t(epoch);
  st.memories.resize(3);
  for (int r = 1; r <= 3; ++r) {
    st.memories[r - 1].expert_id = r;
    if (r > 1 && !cfg.flags.multi_expert) continue;
    Matrix feats = detail::expert_features(set, params, r, epoch);
    st.parts[r - 1] = semi_infomap(set, feats, experts.k_of(r), cfg.hyper.delta, cfg.seed);
    if (cfg.flags.concept_level || cfg.flags.collab) {
      ConceptMemory mem = init_memory(st.parts[r - 1], feats);
      mem.expert_id = r;
      st.memories[r - 1] = std::move(mem);
    }
  }
  return st;
}

namespace detail {

inline Batch make_batch(const EmbeddingSet& set, const std::vector<int>& chunk,
                        const EpochState& st, const TrainConfig& cfg, double noise_scale,
                        Rng& rng) {
  Batch b;
  const int d = set.dim;
  b.rows = chunk;
  b.view1 = Matrix(static_cast<int>(chunk.size()), d);
  b.view2 = Matrix(static_cast<int>(chunk.size()), d);
  b.labels.resize(chunk.size());
  for (size_t i = 0; i < chunk.size(); ++i) {
    const int row = chunk[i];
    const double* x = set.rows.row(row);
    for (int j = 0; j < d; ++j) b.view1.at(static_cast<int>(i), j) = x[j] + noise_scale * rng.gaussian();
    for (int j = 0; j < d; ++j) b.view2.at(static_cast<int>(i), j) = x[j] + noise_scale * rng.gaussian();
    b.labels[i] = set.samples[row].label.value_or(-1);
  }

  if ((cfg.flags.concept_level || cfg.flags.collab) && st.parts[0].count() > 0) {
    const int kg = st.parts[0].count();
    const int nc = std::min(cfg.hyper.n_concepts, kg);
    std::vector<int> ids(kg);
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < nc; ++i) {  // partial Fisher-Yates: first nc entries
      const int j = rng.uniform_int(i, kg - 1);
      std::swap(ids[i], ids[j]);
    }
    for (int ci = 0; ci < nc; ++ci) {
      const std::vector<int>& members = st.parts[0].members[ids[ci]];
      const int msz = static_cast<int>(members.size());
      if (msz >= cfg.hyper.n_instances) {
        // without replacement: partial Fisher-Yates over a local copy
        std::vector<int> local = members;
        for (int t = 0; t < cfg.hyper.n_instances; ++t) {
          const int j = rng.uniform_int(t, msz - 1);
          std::swap(local[t], local[j]);
          b.crows.push_back(local[t]);
        }
      } else {
        for (int t = 0; t < cfg.hyper.n_instances; ++t)
          b.crows.push_back(members[rng.uniform_int(0, msz - 1)]);
      }
    }
    b.cfeat = Matrix(static_cast<int>(b.crows.size()), d);
    b.concepts.resize(b.crows.size());
    for (size_t i = 0; i < b.crows.size(); ++i) {
      std::copy_n(set.rows.row(b.crows[i]), d, b.cfeat.row(static_cast<int>(i)));
      for (int r = 0; r < 3; ++r)
        b.concepts[i][r] =
            st.parts[r].count() > 0 ? st.parts[r].assignment[b.crows[i]] : -1;
    }
  }
  return b;
}

}  // namespace detail

// One SGD step plus the post-step momentum refresh of the sampled concepts.
inline LossParts train_step(EpochState& st, const Batch& batch, ModelParams& params,
                            const TrainConfig& cfg, double lr) {
  std::vector<double> grad(params.size(), 0.0);
  LossParts parts = loss_total(batch, params, st.memories, cfg.hyper, cfg.k_u_known, st.epoch,
                               cfg.flags, &grad);
  if (!std::isfinite(parts.total)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "non-finite loss at epoch %d (con=%g cls=%g concept=%g collab=%g)", st.epoch,
                  parts.con, parts.cls, parts.concept_level, parts.collab);
    throw std::runtime_error(buf);
  }
  for (size_t i = 0; i < params.size(); ++i) params.w[i] -= lr * grad[i];

  for (size_t i = 0; i < batch.crows.size(); ++i) {
    EncCache enc = nn::encode(params, batch.cfeat.row(static_cast<int>(i)));
    for (ConceptMemory& mem : st.memories) {
      if (mem.empty()) continue;
      const int r = mem.expert_id - 1;
      HeadCache hc = nn::head_forward(params, params.experts[r], enc.z.data());
      momentum_update(mem, batch.concepts[i][r], hc.u.data(), cfg.hyper.eta);
    }
  }
  return parts;
}

inline TrainResult run(const EmbeddingSet& set, const TrainConfig& cfg) {
  cfg.validate();
  set.validate();
  const int n = set.size();
  const GcdCounts counts = gcd_counts(set);

  TrainResult res;
  res.k1 = cfg.knn > 0 ? cfg.knn : select_knn(set, set.rows, cfg.hyper.delta, cfg.seed);
  res.experts = derive_experts(res.k1, cfg.hyper.scale_r, n);

  int k_classes = counts.k_labeled;
  if (cfg.k_u_known) {
    k_classes = cfg.k > 0 ? cfg.k : counts.k_true.value_or(0);
    if (k_classes <= 0) throw std::runtime_error("known-K mode needs k or full ground truth");
  }
  k_classes = std::max(k_classes, 1);

  const int d = cfg.encoder_dim > 0 ? cfg.encoder_dim : set.dim;
  res.params = ModelParams::init(set.dim, d, cfg.phi_hidden, k_classes, cfg.seed);

  std::ostringstream step_log, epoch_log;
  step_log << "epoch,step,loss_total,loss_con,loss_cls,loss_c,loss_t,kg1,kg2,kg3,lr,tau_t\n";
  epoch_log << "epoch,acc_all,acc_old,acc_new,kg1,kg2,kg3,k_est\n";

  const bool can_eval = [&] {
    for (const Sample& s : set.samples)
      if (s.split != Split::LabeledKnown && !s.truth) return false;
    return counts.m_unlabeled > 0;
  }();

  auto log_epoch = [&](const EpochState& st) {
    EpochSummary sum;
    sum.epoch = st.epoch;
    for (int r = 0; r < 3; ++r) sum.kg[r] = st.parts[r].count();
    sum.k_est = st.parts[0].count() > 0 ? estimate_k(st.parts[0]) : 0;
    char buf[256];
    if (can_eval && st.parts[0].count() > 0) {
      sum.acc = gcd_acc(set, st.parts[0]);
      std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%d,%d,%d,%d\n", st.epoch,
                    sum.acc->all_acc, sum.acc->old_acc, sum.acc->new_acc, sum.kg[0], sum.kg[1],
                    sum.kg[2], sum.k_est);
    } else {
      std::snprintf(buf, sizeof buf, "%d,,,,%d,%d,%d,%d\n", st.epoch, sum.kg[0], sum.kg[1],
                    sum.kg[2], sum.k_est);
    }
    epoch_log << buf;
    res.summaries.push_back(std::move(sum));
  };

  if (cfg.epochs > 0) {
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const double noise_scale =
        cfg.hyper.sigma_aug * detail::mean_row_norm(set.rows) / std::sqrt(static_cast<double>(set.dim));
    const int steps_per_epoch = std::max(1, (n + cfg.batch_size - 1) / cfg.batch_size);
    const long long total_steps = static_cast<long long>(cfg.epochs) * steps_per_epoch;
    long long t = 0;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      EpochState st = epoch_setup(epoch, set, res.params, cfg, res.experts);
      log_epoch(st);

      rng.shuffle(order);
      for (int s = 0; s < steps_per_epoch; ++s) {
        int lo = s * cfg.batch_size;
        int hi = std::min(n, lo + cfg.batch_size);
        if (lo >= n) break;
        if (n - lo == 1 && s > 0) break;  // never feed a single-sample batch
        if (hi - lo == 1) hi = n;
        std::vector<int> chunk(order.begin() + lo, order.begin() + hi);

        const double lr =
            cfg.lr0 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(t) /
                                      static_cast<double>(total_steps))) / 2.0;
        Batch batch = detail::make_batch(set, chunk, st, cfg, noise_scale, rng);
        LossParts parts = train_step(st, batch, res.params, cfg, lr);
        char buf[320];
        std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d,%d,%.10g,%.10g\n",
                      epoch, s, parts.total, parts.con, parts.cls, parts.concept_level,
                      parts.collab, st.parts[0].count(), st.parts[1].count(),
                      st.parts[2].count(), lr, st.tau_t);
        step_log << buf;
        ++t;
      }
    }

    // final inference partitions with the trained parameters
    EpochState fin = epoch_setup(cfg.epochs, set, res.params, cfg, res.experts);
    log_epoch(fin);
    res.final_parts = fin.parts;
    res.final_partition = fin.parts[0];
    if (cfg.k_u_known && res.final_partition.count() > k_classes) {
      Matrix feats = detail::expert_features(set, res.params, 1, cfg.epochs);
      res.final_partition = merge_to_k(res.final_partition, feats, k_classes);
    } else if (cfg.k_u_known && res.final_partition.count() < k_classes) {
      std::fprintf(stderr, "warning: discovered %d clusters, fewer than the known %d\n",
                   res.final_partition.count(), k_classes);
    }
  }

  res.step_log = step_log.str();
  res.epoch_log = epoch_log.str();
  return res;
}

}  // namespace mgce
