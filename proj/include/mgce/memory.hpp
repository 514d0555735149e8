#pragma once

// Per-expert concept prototype banks: mean-initialized from the epoch's
// partition, unit-normalized, and momentum-updated from projected samples.
// Expert neighborhood radii derive from the base radius via a scale factor.

#include <cmath>
#include <cstring>
#include <ostream>

#include "infomap.hpp"

namespace mgce {

struct ConceptMemory {
  int expert_id = 1;  // 1 = base, 2 = fine, 3 = coarse
  Matrix prototypes;  // K x d, unit rows
  std::vector<int> concept_of;  // dataset row -> concept id

  int count() const { return prototypes.n; }
  int dim() const { return prototypes.d; }
  bool empty() const { return prototypes.n == 0; }
};

struct ExpertConfig {
  int k1 = 0, k2 = 0, k3 = 0;
  double scale_r = 0.6;

  int k_of(int expert) const { return expert == 1 ? k1 : expert == 2 ? k2 : k3; }
};

// k2 = round(k1*R) (fine), k3 = round(k1/R) (coarse); rounding half-up,
// clamped into [1, n-1].
inline ExpertConfig derive_experts(int k1, double scale_r, int n) {
  if (!(scale_r > 0.0 && scale_r < 1.0)) throw std::runtime_error("scale factor must be in (0,1)");
  if (k1 < 1 || k1 >= n) throw std::runtime_error("base knn out of range");
  ExpertConfig cfg;
  cfg.scale_r = scale_r;
  cfg.k1 = k1;
  cfg.k2 = std::max(1, static_cast<int>(std::llround(k1 * scale_r)));
  cfg.k3 = std::min(n - 1, static_cast<int>(std::llround(k1 / scale_r)));
  cfg.k3 = std::max(cfg.k3, cfg.k1);
  return cfg;
}

// Prototype k = normalized mean of the member rows of community k.
inline ConceptMemory init_memory(const Partition& part, const Matrix& features) {
  if (static_cast<int>(part.assignment.size()) != features.n)
    throw std::runtime_error("partition does not cover the features");
  ConceptMemory mem;
  mem.concept_of = part.assignment;
  mem.prototypes = Matrix(part.count(), features.d);
  std::vector<double> mean(features.d);
  for (int c = 0; c < part.count(); ++c) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (int i : part.members[c])
      for (int j = 0; j < features.d; ++j) mean[j] += features.at(i, j);
    for (double& v : mean) v /= static_cast<double>(part.members[c].size());
    normalize(mean.data(), mem.prototypes.row(c), features.d, "degenerate prototype");
  }
  return mem;
}

// mu_c <- normalize(eta*mu_c + (1-eta)*v)
inline void momentum_update(ConceptMemory& mem, int c, const double* v, double eta) {
  if (c < 0 || c >= mem.count()) throw std::runtime_error("concept id out of range");
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::runtime_error("eta must be in [0,1]");
  const int d = mem.dim();
  std::vector<double> mixed(d);
  double* mu = mem.prototypes.row(c);
  for (int j = 0; j < d; ++j) mixed[j] = eta * mu[j] + (1.0 - eta) * v[j];
  normalize(mixed.data(), mu, d, "degenerate prototype");
}

// Debug dump: u32le concept count, then the standard embedding blob.
inline void dump_prototypes(std::ostream& os, const ConceptMemory& mem) {
  auto put32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  put32(static_cast<uint32_t>(mem.count()));
  os.write("MGCE", 4);
  os.put(static_cast<char>(1));
  put32(static_cast<uint32_t>(mem.count()));
  put32(static_cast<uint32_t>(mem.dim()));
  for (double v : mem.prototypes.a) {
    const float f = static_cast<float>(v);
    uint32_t bits;
    static_assert(sizeof bits == sizeof f);
    std::memcpy(&bits, &f, 4);
    put32(bits);
  }
}

}  // namespace mgce
