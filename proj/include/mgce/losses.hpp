#pragma once

// Loss functions with hand-derived reverse-mode gradients over the fixed
// computation graph (encoder -> heads -> normalized projections). Every loss
// is a pure function of (batch, params, memories): no RNG, no hidden state,
// prototypes and alignment matrices are constants within a step. Each
// function accumulates `weight * dL/dtheta` into `grad` when non-null and
// returns the raw loss value. Contrastive/cross-entropy terms use natural
// logs; probabilities come from shifted softmaxes.

#include <array>

#include "memory.hpp"
#include "model.hpp"

namespace mgce {

struct Batch {
  // instance frame: two augmented views per sample
  std::vector<int> rows;     // dataset row of each instance
  Matrix view1, view2;       // |rows| x input_dim
  std::vector<int> labels;   // class id, or -1 for unlabeled

  // concept frame (N_C concepts x N_I instances)
  std::vector<int> crows;
  Matrix cfeat;                               // |crows| x input_dim, non-augmented
  std::vector<std::array<int, 3>> concepts;   // per-expert concept ids, -1 = absent
};

struct LossFlags {
  bool instance = true;      // instance-level contrastive + classification
  bool concept_level = true; // concept-level contrastive
  bool multi_expert = true;  // experts 2 and 3 participate
  bool collab = true;        // cross-expert consistency
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

// Eq-style instance contrastive objective: self-supervised cross-view term
// over the whole batch plus a supervised term over labeled anchors; both
// denominators run over the other first-view projections only (the positive
// pair is not added to the denominator).
inline double loss_instance_contrastive(const Batch& batch, const ModelParams& p,
                                        const Hyper& hy, std::vector<double>* grad,
                                        double weight = 1.0) {
  const int b = static_cast<int>(batch.rows.size());
  if (b < 2) throw std::runtime_error("instance batch needs at least 2 samples");

  std::vector<EncCache> enc1(b), enc2(b);
  std::vector<HeadCache> hc1(b), hc2(b);
  for (int i = 0; i < b; ++i) {
    enc1[i] = nn::encode(p, batch.view1.row(i));
    hc1[i] = nn::head_forward(p, p.phi, enc1[i].z.data());
    enc2[i] = nn::encode(p, batch.view2.row(i));
    hc2[i] = nn::head_forward(p, p.phi, enc2[i].z.data());
  }
  const int d = p.d;
  auto h1 = [&](int i) { return hc1[i].u.data(); };
  auto h2 = [&](int i) { return hc2[i].u.data(); };

  std::vector<std::vector<double>> dh1(b, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> dh2(b, std::vector<double>(d, 0.0));

  double value = 0.0;

  // self-supervised term
  if (hy.lambda < 1.0) {
    const double scale = (1.0 - hy.lambda) / b;
    std::vector<double> sims(b);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b; ++j) sims[j] = dot(h1(i), h1(j), d) / hy.tau_u;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < b; ++j)
        if (j != i) mx = std::max(mx, sims[j]);
      double den = 0.0;
      for (int j = 0; j < b; ++j)
        if (j != i) den += std::exp(sims[j] - mx);
      const double pos = dot(h1(i), h2(i), d) / hy.tau_u;
      value += (1.0 - hy.lambda) / b * (-pos + mx + std::log(den));
      if (grad) {
        for (int k = 0; k < d; ++k) {
          dh1[i][k] += scale * (-h2(i)[k] / hy.tau_u);
          dh2[i][k] += scale * (-h1(i)[k] / hy.tau_u);
        }
        for (int j = 0; j < b; ++j) {
          if (j == i) continue;
          const double sm = std::exp(sims[j] - mx) / den;
          for (int k = 0; k < d; ++k) {
            dh1[i][k] += scale * sm * h1(j)[k] / hy.tau_u;
            dh1[j][k] += scale * sm * h1(i)[k] / hy.tau_u;
          }
        }
      }
    }
  }

  // supervised term over labeled anchors with same-class positives
  if (hy.lambda > 0.0) {
    std::vector<int> lab;
    for (int i = 0; i < b; ++i)
      if (batch.labels[i] >= 0) lab.push_back(i);
    if (!lab.empty()) {
      const double scale = hy.lambda / static_cast<double>(lab.size());
      for (int i : lab) {
        std::vector<int> pos;
        for (int q : lab)
          if (q != i && batch.labels[q] == batch.labels[i]) pos.push_back(q);
        if (pos.empty()) continue;  // vacuous anchor

        std::vector<double> sims;
        std::vector<int> js;
        for (int j : lab)
          if (j != i) {
            js.push_back(j);
            sims.push_back(dot(h1(i), h1(j), d) / hy.tau_l);
          }
        const double lse = detail::log_sum_exp(sims);
        double mean_pos = 0.0;
        for (int q : pos) mean_pos += dot(h1(i), h1(q), d) / hy.tau_l;
        mean_pos /= static_cast<double>(pos.size());
        value += scale * (-mean_pos + lse);

        if (grad) {
          const double inv_p = 1.0 / static_cast<double>(pos.size());
          for (int q : pos)
            for (int k = 0; k < d; ++k) {
              dh1[i][k] += scale * (-inv_p * h1(q)[k] / hy.tau_l);
              dh1[q][k] += scale * (-inv_p * h1(i)[k] / hy.tau_l);
            }
          for (size_t t = 0; t < js.size(); ++t) {
            const int j = js[t];
            const double sm = std::exp(sims[t] - lse);
            for (int k = 0; k < d; ++k) {
              dh1[i][k] += scale * sm * h1(j)[k] / hy.tau_l;
              dh1[j][k] += scale * sm * h1(i)[k] / hy.tau_l;
            }
          }
        }
      }
    }
  }

  if (grad) {
    std::vector<double> dz(d);
    for (int i = 0; i < b; ++i) {
      for (double& v : dh1[i]) v *= weight;
      for (double& v : dh2[i]) v *= weight;
      std::fill(dz.begin(), dz.end(), 0.0);
      nn::head_backward(p, p.phi, hc1[i], dh1[i].data(), *grad, dz.data());
      nn::encode_backward(p, enc1[i], dz.data(), *grad);
      std::fill(dz.begin(), dz.end(), 0.0);
      nn::head_backward(p, p.phi, hc2[i], dh2[i].data(), *grad, dz.data());
      nn::encode_backward(p, enc2[i], dz.data(), *grad);
    }
  }
  return value;
}

// Switchable classifier objective. K_U unknown: labeled cross-entropy only.
// K_U known: adds the cross-view self-distillation term (sharpened targets at
// tau_t, no stop-gradient) minus an entropy reward on the two-view mean
// prediction.
inline double loss_classification(const Batch& batch, const ModelParams& p, const Hyper& hy,
                                  bool k_u_known, int epoch, std::vector<double>* grad,
                                  double weight = 1.0) {
  const int b = static_cast<int>(batch.rows.size());
  if (b < 1) throw std::runtime_error("empty instance batch");
  for (int i = 0; i < b; ++i)
    if (batch.labels[i] >= p.k_classes)
      throw std::runtime_error("label exceeds classifier width");

  std::vector<EncCache> enc1(b);
  std::vector<std::vector<double>> logits1(b), prob1(b);
  for (int i = 0; i < b; ++i) {
    enc1[i] = nn::encode(p, batch.view1.row(i));
    logits1[i] = nn::classify(p, enc1[i].z.data());
    std::vector<double> scaled(p.k_classes);
    for (int k = 0; k < p.k_classes; ++k) scaled[k] = logits1[i][k] / hy.tau_s;
    prob1[i] = nn::softmax(scaled);
  }
  std::vector<std::vector<double>> dlog1(b, std::vector<double>(p.k_classes, 0.0));

  double value = 0.0;
  int n_lab = 0;
  for (int i = 0; i < b; ++i) n_lab += batch.labels[i] >= 0;

  // supervised cross-entropy on labeled first views
  if (hy.lambda > 0.0 && n_lab > 0) {
    const double scale = hy.lambda / n_lab;
    for (int i = 0; i < b; ++i) {
      const int y = batch.labels[i];
      if (y < 0) continue;
      value += scale * -std::log(std::max(prob1[i][y], 1e-300));
      if (grad)
        for (int k = 0; k < p.k_classes; ++k)
          dlog1[i][k] += scale * (prob1[i][k] - (k == y ? 1.0 : 0.0)) / hy.tau_s;
    }
  }

  std::vector<EncCache> enc2;
  std::vector<std::vector<double>> dlog2;
  std::vector<std::vector<double>> logits2, prob2, sharp2;
  if (k_u_known) {
    enc2.resize(b);
    logits2.resize(b);
    prob2.resize(b);
    sharp2.resize(b);
    dlog2.assign(b, std::vector<double>(p.k_classes, 0.0));
    const double tau_t = hy.tau_t(epoch);
    for (int i = 0; i < b; ++i) {
      enc2[i] = nn::encode(p, batch.view2.row(i));
      logits2[i] = nn::classify(p, enc2[i].z.data());
      std::vector<double> s(p.k_classes), t(p.k_classes);
      for (int k = 0; k < p.k_classes; ++k) {
        s[k] = logits2[i][k] / hy.tau_s;
        t[k] = logits2[i][k] / tau_t;
      }
      prob2[i] = nn::softmax(s);
      sharp2[i] = nn::softmax(t);
    }

    const double scale_u = (1.0 - hy.lambda) / b;
    // cross-view soft cross-entropy
    for (int i = 0; i < b; ++i) {
      double ce = 0.0;
      for (int k = 0; k < p.k_classes; ++k)
        ce -= sharp2[i][k] * std::log(std::max(prob1[i][k], 1e-300));
      value += scale_u * ce;
      if (grad) {
        for (int k = 0; k < p.k_classes; ++k)
          dlog1[i][k] += scale_u * (prob1[i][k] - sharp2[i][k]) / hy.tau_s;
        std::vector<double> gq(p.k_classes);
        for (int k = 0; k < p.k_classes; ++k)
          gq[k] = scale_u * -std::log(std::max(prob1[i][k], 1e-300));
        std::vector<double> dt = nn::softmax_backward(sharp2[i], gq);
        for (int k = 0; k < p.k_classes; ++k) dlog2[i][k] += dt[k] / tau_t;
      }
    }

    // entropy reward on the mean prediction across both views
    std::vector<double> mean(p.k_classes, 0.0);
    for (int i = 0; i < b; ++i)
      for (int k = 0; k < p.k_classes; ++k) mean[k] += prob1[i][k] + prob2[i][k];
    for (double& v : mean) v /= 2.0 * b;
    double ent = 0.0;
    for (int k = 0; k < p.k_classes; ++k)
      if (mean[k] > 0.0) ent -= mean[k] * std::log(mean[k]);
    value += (1.0 - hy.lambda) * -hy.epsilon * ent;
    if (grad) {
      std::vector<double> dmean(p.k_classes);
      for (int k = 0; k < p.k_classes; ++k)
        dmean[k] = (1.0 - hy.lambda) * hy.epsilon * (std::log(std::max(mean[k], 1e-300)) + 1.0);
      for (int i = 0; i < b; ++i) {
        std::vector<double> gp(p.k_classes);
        for (int k = 0; k < p.k_classes; ++k) gp[k] = dmean[k] / (2.0 * b);
        std::vector<double> d1 = nn::softmax_backward(prob1[i], gp);
        std::vector<double> d2 = nn::softmax_backward(prob2[i], gp);
        for (int k = 0; k < p.k_classes; ++k) {
          dlog1[i][k] += d1[k] / hy.tau_s;
          dlog2[i][k] += d2[k] / hy.tau_s;
        }
      }
    }
  }

  if (grad) {
    std::vector<double> dz(p.d);
    for (int i = 0; i < b; ++i) {
      for (double& v : dlog1[i]) v *= weight;
      std::fill(dz.begin(), dz.end(), 0.0);
      nn::classify_backward(p, enc1[i].z.data(), dlog1[i].data(), *grad, dz.data());
      nn::encode_backward(p, enc1[i], dz.data(), *grad);
      if (k_u_known) {
        for (double& v : dlog2[i]) v *= weight;
        std::fill(dz.begin(), dz.end(), 0.0);
        nn::classify_backward(p, enc2[i].z.data(), dlog2[i].data(), *grad, dz.data());
        nn::encode_backward(p, enc2[i], dz.data(), *grad);
      }
    }
  }
  return value;
}

// Concept-level contrastive loss, summed over the experts whose memories are
// populated. Prototypes are constants; gradients flow through the expert
// heads and the encoder.
inline double loss_concept_contrastive(const Batch& batch, const ModelParams& p,
                                       const std::vector<ConceptMemory>& memories,
                                       const Hyper& hy, std::vector<double>* grad,
                                       double weight = 1.0) {
  const int bc = static_cast<int>(batch.crows.size());
  if (bc == 0) return 0.0;
  const double scale = 1.0 / bc;
  const int d = p.d;

  double value = 0.0;
  std::vector<double> dz(d), dv(d), logits;
  for (int i = 0; i < bc; ++i) {
    EncCache enc = nn::encode(p, batch.cfeat.row(i));
    bool enc_dirty = false;
    std::fill(dz.begin(), dz.end(), 0.0);
    for (const ConceptMemory& mem : memories) {
      if (mem.empty()) continue;
      const int r = mem.expert_id - 1;
      const int c = batch.concepts[i][r];
      if (c < 0 || c >= mem.count()) throw std::runtime_error("concept id out of range");

      HeadCache hc = nn::head_forward(p, p.experts[r], enc.z.data());
      logits.assign(mem.count(), 0.0);
      for (int k = 0; k < mem.count(); ++k)
        logits[k] = dot(hc.u.data(), mem.prototypes.row(k), d) / hy.tau_c;
      const double lse = detail::log_sum_exp(logits);
      value += scale * (-logits[c] + lse);

      if (grad) {
        std::fill(dv.begin(), dv.end(), 0.0);
        for (int k = 0; k < mem.count(); ++k) {
          const double g = weight * scale * (std::exp(logits[k] - lse) - (k == c ? 1.0 : 0.0)) / hy.tau_c;
          const double* mu = mem.prototypes.row(k);
          for (int j = 0; j < d; ++j) dv[j] += g * mu[j];
        }
        nn::head_backward(p, p.experts[r], hc, dv.data(), *grad, dz.data());
        enc_dirty = true;
      }
    }
    if (grad && enc_dirty) nn::encode_backward(p, enc, dz.data(), *grad);
  }
  return value;
}

// Cosine matrix between two prototype banks: rows index mem_r, columns mem_1.
inline Matrix alignment_matrix(const ConceptMemory& mem_r, const ConceptMemory& mem_1) {
  Matrix m(mem_r.count(), mem_1.count());
  for (int i = 0; i < mem_r.count(); ++i)
    for (int j = 0; j < mem_1.count(); ++j)
      m.at(i, j) = cosine(mem_r.prototypes.row(i), mem_1.prototypes.row(j), mem_r.dim());
  return m;
}

// softmax over the cosine similarities of v against every prototype
inline std::vector<double> expert_distribution(const double* v, const ConceptMemory& mem) {
  if (mem.empty()) throw std::runtime_error("empty concept memory");
  std::vector<double> logits(mem.count());
  for (int k = 0; k < mem.count(); ++k) logits[k] = cosine(v, mem.prototypes.row(k), mem.dim());
  return nn::softmax(logits);
}

// p_r * M, clamped at zero, floored at 1e-12 and renormalized so the result
// is a valid distribution over the reference expert's concepts.
inline std::vector<double> project_distribution(const std::vector<double>& p_r, const Matrix& m) {
  if (static_cast<int>(p_r.size()) != m.n) throw std::runtime_error("distribution/matrix mismatch");
  std::vector<double> out(m.d, 0.0);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.d; ++j) out[j] += p_r[i] * m.at(i, j);
  double sum = 0.0;
  for (double& v : out) {
    v = std::max(v, 0.0) + 1e-12;
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

// Symmetric KL consistency between the reference expert's concept
// distribution and the projected distributions of the other experts,
// averaged over the concept batch. Alignment matrices are constants.
inline double loss_collaborative(const Batch& batch, const ModelParams& p,
                                 const std::vector<ConceptMemory>& memories, const Hyper& hy,
                                 std::vector<double>* grad, double weight = 1.0) {
  (void)hy;
  const int bc = static_cast<int>(batch.crows.size());
  if (bc == 0) return 0.0;

  const ConceptMemory* base = nullptr;
  std::vector<const ConceptMemory*> others;
  for (const ConceptMemory& mem : memories) {
    if (mem.empty()) continue;
    if (mem.expert_id == 1) base = &mem;
    else others.push_back(&mem);
  }
  if (!base || others.empty()) return 0.0;

  std::vector<Matrix> align;
  align.reserve(others.size());
  for (const ConceptMemory* mem : others) align.push_back(alignment_matrix(*mem, *base));

  const int d = p.d;
  const double scale = 1.0 / bc;
  const int k1 = base->count();
  double value = 0.0;

  std::vector<double> dz(d), dv(d);
  for (int i = 0; i < bc; ++i) {
    EncCache enc = nn::encode(p, batch.cfeat.row(i));
    std::fill(dz.begin(), dz.end(), 0.0);

    HeadCache hc1 = nn::head_forward(p, p.experts[0], enc.z.data());
    std::vector<double> c1(k1);
    for (int k = 0; k < k1; ++k) c1[k] = dot(hc1.u.data(), base->prototypes.row(k), d);
    std::vector<double> a = nn::softmax(c1);
    std::vector<double> da(k1, 0.0);

    for (size_t oi = 0; oi < others.size(); ++oi) {
      const ConceptMemory& mem = *others[oi];
      const Matrix& m = align[oi];
      const int r = mem.expert_id - 1;
      const int kr = mem.count();

      HeadCache hcr = nn::head_forward(p, p.experts[r], enc.z.data());
      std::vector<double> cr(kr);
      for (int k = 0; k < kr; ++k) cr[k] = dot(hcr.u.data(), mem.prototypes.row(k), d);
      std::vector<double> s = nn::softmax(cr);

      std::vector<double> raw(k1, 0.0);
      for (int x = 0; x < kr; ++x)
        for (int j = 0; j < k1; ++j) raw[j] += s[x] * m.at(x, j);
      std::vector<double> t(k1);
      double tsum = 0.0;
      for (int j = 0; j < k1; ++j) {
        t[j] = std::max(raw[j], 0.0) + 1e-12;
        tsum += t[j];
      }
      std::vector<double> bq(k1);
      for (int j = 0; j < k1; ++j) bq[j] = t[j] / tsum;

      double kl = 0.0;
      for (int j = 0; j < k1; ++j) {
        kl += 0.5 * a[j] * std::log(a[j] / bq[j]);
        kl += 0.5 * bq[j] * std::log(bq[j] / a[j]);
      }
      value += scale * kl;

      if (grad) {
        std::vector<double> db(k1);
        for (int j = 0; j < k1; ++j) {
          da[j] += 0.5 * scale * (std::log(a[j] / bq[j]) + 1.0 - bq[j] / a[j]);
          db[j] = 0.5 * scale * (std::log(bq[j] / a[j]) + 1.0 - a[j] / bq[j]);
        }
        double dbdotb = 0.0;
        for (int j = 0; j < k1; ++j) dbdotb += db[j] * bq[j];
        std::vector<double> ds(kr, 0.0);
        for (int j = 0; j < k1; ++j) {
          const double dt = (db[j] - dbdotb) / tsum;
          if (raw[j] > 0.0)
            for (int x = 0; x < kr; ++x) ds[x] += dt * m.at(x, j);
        }
        std::vector<double> dcr = nn::softmax_backward(s, ds);
        std::fill(dv.begin(), dv.end(), 0.0);
        for (int k = 0; k < kr; ++k) {
          const double* mu = mem.prototypes.row(k);
          for (int j = 0; j < d; ++j) dv[j] += weight * dcr[k] * mu[j];
        }
        nn::head_backward(p, p.experts[r], hcr, dv.data(), *grad, dz.data());
      }
    }

    if (grad) {
      std::vector<double> dc1 = nn::softmax_backward(a, da);
      std::fill(dv.begin(), dv.end(), 0.0);
      for (int k = 0; k < k1; ++k) {
        const double* mu = base->prototypes.row(k);
        for (int j = 0; j < d; ++j) dv[j] += weight * dc1[k] * mu[j];
      }
      nn::head_backward(p, p.experts[0], hc1, dv.data(), *grad, dz.data());
      nn::encode_backward(p, enc, dz.data(), *grad);
    }
  }
  return value;
}

struct LossParts {
  double total = 0.0, con = 0.0, cls = 0.0, concept_level = 0.0, collab = 0.0;
};

// total = L_con + L_cls + alpha * (L_concept + L_collab), gated by flags
inline LossParts loss_total(const Batch& batch, const ModelParams& p,
                            const std::vector<ConceptMemory>& memories, const Hyper& hy,
                            bool k_u_known, int epoch, const LossFlags& flags,
                            std::vector<double>* grad) {
  LossParts parts;
  if (flags.instance && !batch.rows.empty()) {
    parts.con = loss_instance_contrastive(batch, p, hy, grad);
    parts.cls = loss_classification(batch, p, hy, k_u_known, epoch, grad);
  }
  if (flags.concept_level)
    parts.concept_level = loss_concept_contrastive(batch, p, memories, hy, grad, hy.alpha);
  if (flags.collab && flags.multi_expert)
    parts.collab = loss_collaborative(batch, p, memories, hy, grad, hy.alpha);
  parts.total = parts.con + parts.cls + hy.alpha * (parts.concept_level + parts.collab);
  return parts;
}

}  // namespace mgce
