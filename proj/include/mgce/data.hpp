#pragma once

// Dataset model for category discovery: per-sample split flags, dense class
// ids (labeled classes first), and a hierarchical synthetic generator
// (superclass -> class -> subclass -> sample, isotropic Gaussians).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "core.hpp"

namespace mgce {

enum class Split : uint8_t { LabeledKnown, UnlabeledKnown, UnlabeledNovel };

inline const char* split_code(Split s) {
  switch (s) {
    case Split::LabeledKnown: return "L";
    case Split::UnlabeledKnown: return "UK";
    default: return "UN";
  }
}

struct Sample {
  int id = 0;
  std::optional<int> label;  // supervision; present iff split == LabeledKnown
  std::optional<int> truth;  // evaluation ground truth, when available
  Split split = Split::UnlabeledNovel;
};

struct EmbeddingSet {
  int dim = 0;
  Matrix rows;
  std::vector<Sample> samples;

  int size() const { return rows.n; }

  // K_L: number of distinct labeled classes (dense, so max label + 1).
  int labeled_class_count() const {
    int k = 0;
    for (const auto& s : samples)
      if (s.label) k = std::max(k, *s.label + 1);
    return k;
  }

  bool has_full_truth() const {
    for (const auto& s : samples)
      if (!s.truth) return false;
    return !samples.empty();
  }

  void validate() const {
    if (dim < 2) throw std::runtime_error("embedding dim must be >= 2");
    if (rows.d != dim) throw std::runtime_error("row width does not match dim");
    if (rows.n != static_cast<int>(samples.size()))
      throw std::runtime_error("row count does not match sample count");
    for (const double v : rows.a)
      if (!std::isfinite(v)) throw std::runtime_error("non-finite embedding");

    std::vector<char> labeled_seen;
    for (int i = 0; i < rows.n; ++i) {
      const Sample& s = samples[i];
      if (s.id != i) throw std::runtime_error("sample ids must be 0..n-1 in order");
      if (s.label.has_value() != (s.split == Split::LabeledKnown))
        throw std::runtime_error(s.label ? "label on unlabeled sample" : "missing label");
      if (s.label) {
        if (*s.label < 0) throw std::runtime_error("negative class id");
        if (*s.label >= static_cast<int>(labeled_seen.size()))
          labeled_seen.resize(*s.label + 1, 0);
        labeled_seen[*s.label] = 1;
        if (s.truth && *s.truth != *s.label)
          throw std::runtime_error("labeled sample truth differs from label");
      }
      if (s.truth && *s.truth < 0) throw std::runtime_error("negative class id");
    }
    for (char seen : labeled_seen)
      if (!seen) throw std::runtime_error("labeled class ids are not dense");
    const int k_l = static_cast<int>(labeled_seen.size());
    for (const Sample& s : samples) {
      if (!s.truth) continue;
      if (s.split == Split::UnlabeledKnown && *s.truth >= k_l)
        throw std::runtime_error("unlabeled-known sample carries a novel class id");
      if (s.split == Split::UnlabeledNovel && *s.truth < k_l)
        throw std::runtime_error("unlabeled-novel sample carries a labeled class id");
    }
  }
};

struct GcdCounts {
  int n_labeled = 0;
  int m_unlabeled = 0;
  int k_labeled = 0;
  std::optional<int> k_true;  // total class count; only when full ground truth is present
};

inline GcdCounts gcd_counts(const EmbeddingSet& set) {
  GcdCounts c;
  int max_truth = -1;
  bool full = !set.samples.empty();
  for (const Sample& s : set.samples) {
    if (s.split == Split::LabeledKnown) {
      ++c.n_labeled;
      c.k_labeled = std::max(c.k_labeled, *s.label + 1);
    } else {
      ++c.m_unlabeled;
    }
    if (s.truth) max_truth = std::max(max_truth, *s.truth);
    else full = false;
  }
  if (full) c.k_true = max_truth + 1;
  return c;
}

struct SyntheticSpec {
  int n_super = 2;
  int classes_per_super = 5;
  int subclasses_per_class = 2;
  int samples_per_subclass = 20;
  int dim = 32;
  double sigma_within = 0.08;
  double sigma_sub = 0.16;
  double sigma_class = 0.45;
  uint64_t seed = 1;

  void validate() const {
    if (n_super < 1 || classes_per_super < 1 || subclasses_per_class < 1 ||
        samples_per_subclass < 1)
      throw std::runtime_error("synthetic counts must be >= 1");
    if (dim < 2) throw std::runtime_error("synthetic dim must be >= 2");
    if (!(sigma_within > 0 && sigma_within < sigma_sub && sigma_sub < sigma_class))
      throw std::runtime_error("need 0 < sigma_within < sigma_sub < sigma_class");
  }
};

// Known classes are interleaved across superclasses (global class id =
// local_class * n_super + super), so supervision touches every superclass.
// Within each known class the lowest-index half (rounded down) is labeled.
inline EmbeddingSet generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  const int k_total = spec.n_super * spec.classes_per_super;
  const int class_size = spec.subclasses_per_class * spec.samples_per_subclass;
  const int k_labeled = (k_total + 1) / 2;
  const int d = spec.dim;

  auto draw = [&](const double* center, double sigma, double* out) {
    for (int j = 0; j < d; ++j) out[j] = (center ? center[j] : 0.0) + sigma * rng.gaussian();
  };

  // Draw order is fixed (super, class, subclass, sample); rows are then laid
  // out grouped by global class id.
  std::vector<std::vector<double>> class_rows(k_total);
  std::vector<double> super_center(d), class_center(d), sub_center(d), x(d);
  for (int s = 0; s < spec.n_super; ++s) {
    draw(nullptr, 1.0, super_center.data());
    for (int c = 0; c < spec.classes_per_super; ++c) {
      const int gid = c * spec.n_super + s;
      draw(super_center.data(), spec.sigma_class, class_center.data());
      auto& bucket = class_rows[gid];
      bucket.reserve(static_cast<size_t>(class_size) * d);
      for (int m = 0; m < spec.subclasses_per_class; ++m) {
        draw(class_center.data(), spec.sigma_sub, sub_center.data());
        for (int i = 0; i < spec.samples_per_subclass; ++i) {
          draw(sub_center.data(), spec.sigma_within, x.data());
          bucket.insert(bucket.end(), x.begin(), x.end());
        }
      }
    }
  }

  EmbeddingSet set;
  set.dim = d;
  set.rows = Matrix(k_total * class_size, d);
  set.samples.resize(static_cast<size_t>(k_total) * class_size);
  int row = 0;
  for (int gid = 0; gid < k_total; ++gid) {
    const int n_lab = gid < k_labeled ? class_size / 2 : 0;
    for (int i = 0; i < class_size; ++i, ++row) {
      std::copy_n(class_rows[gid].data() + static_cast<size_t>(i) * d, d, set.rows.row(row));
      Sample& smp = set.samples[row];
      smp.id = row;
      smp.truth = gid;
      if (i < n_lab) {
        smp.split = Split::LabeledKnown;
        smp.label = gid;
      } else {
        smp.split = gid < k_labeled ? Split::UnlabeledKnown : Split::UnlabeledNovel;
      }
    }
  }
  set.validate();
  return set;
}

}  // namespace mgce
