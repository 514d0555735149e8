#pragma once

// Trainable parameters, stored as one flat vector so SGD and finite-difference
// probes are trivial. Components:
//   encoder  : linear input_dim -> d (identity-initialized square map)
//   phi      : instance projection head, affine-tanh-affine d -> h -> d
//   f_z      : affine classifier d -> K
//   phi_c[r] : three expert heads, affine-tanh-affine d -> 4d -> d
// Projections that feed inner products are L2-normalized; the backward
// helpers push gradients through the normalization and both affine layers.

#include <cstring>
#include <fstream>

#include "core.hpp"

namespace mgce {

struct Hyper {
  double lambda = 0.35;
  double tau_u = 0.07;
  double tau_l = 1.0;
  double tau_s = 0.1;
  double tau_t_start = 0.07;
  double tau_t_end = 0.04;
  int tau_t_anneal_epochs = 30;
  double tau_c = 0.05;
  double epsilon = 2.0;
  double alpha = 0.1;
  double delta = 0.6;
  double scale_r = 0.6;
  double eta = 0.9;
  double sigma_aug = 0.05;
  int n_concepts = 8;    // N_C
  int n_instances = 16;  // N_I

  double tau_t(int epoch) const {
    const int e = std::min(epoch, tau_t_anneal_epochs);
    return tau_t_start - (tau_t_start - tau_t_end) * e / tau_t_anneal_epochs;
  }
};

struct HeadRef {
  size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  int in = 0, hid = 0, out = 0;
};

struct ModelParams {
  int input_dim = 0;
  int d = 0;       // representation width
  int h_phi = 0;   // phi hidden width
  int h_exp = 0;   // expert hidden width (4d)
  int k_classes = 0;

  size_t off_enc_w = 0, off_enc_b = 0;
  HeadRef phi;
  size_t off_cls_w = 0, off_cls_b = 0;
  HeadRef experts[3];
  std::vector<double> w;

  size_t size() const { return w.size(); }

  static ModelParams init(int input_dim, int d, int h_phi, int k_classes, uint64_t seed) {
    if (d < 2 || d > input_dim) throw std::runtime_error("need 2 <= d <= input_dim");
    if (k_classes < 1) throw std::runtime_error("classifier needs at least one class");
    ModelParams p;
    p.input_dim = input_dim;
    p.d = d;
    p.h_phi = h_phi > 0 ? h_phi : 4 * d;
    p.h_exp = 4 * d;

    size_t off = 0;
    auto take = [&off](size_t n) { size_t o = off; off += n; return o; };
    p.off_enc_w = take(static_cast<size_t>(d) * input_dim);
    p.off_enc_b = take(d);
    auto make_head = [&](int in, int hid, int out) {
      HeadRef h;
      h.in = in; h.hid = hid; h.out = out;
      h.w1 = take(static_cast<size_t>(hid) * in);
      h.b1 = take(hid);
      h.w2 = take(static_cast<size_t>(out) * hid);
      h.b2 = take(out);
      return h;
    };
    p.phi = make_head(d, p.h_phi, d);
    p.k_classes = k_classes;
    p.off_cls_w = take(static_cast<size_t>(k_classes) * d);
    p.off_cls_b = take(k_classes);
    for (int r = 0; r < 3; ++r) p.experts[r] = make_head(d, p.h_exp, d);
    p.w.assign(off, 0.0);

    // encoder starts as the (truncated) identity; heads are random
    for (int i = 0; i < d; ++i) p.w[p.off_enc_w + static_cast<size_t>(i) * input_dim + i] = 1.0;
    Rng rng(seed);
    auto fill_head = [&](const HeadRef& h) {
      const double s1 = 1.0 / std::sqrt(static_cast<double>(h.in));
      const double s2 = 1.0 / std::sqrt(static_cast<double>(h.hid));
      for (size_t i = 0; i < static_cast<size_t>(h.hid) * h.in; ++i)
        p.w[h.w1 + i] = s1 * rng.gaussian();
      for (size_t i = 0; i < static_cast<size_t>(h.out) * h.hid; ++i)
        p.w[h.w2 + i] = s2 * rng.gaussian();
    };
    fill_head(p.phi);
    const double sc = 1.0 / std::sqrt(static_cast<double>(d));
    for (size_t i = 0; i < static_cast<size_t>(k_classes) * d; ++i)
      p.w[p.off_cls_w + i] = sc * rng.gaussian();
    for (int r = 0; r < 3; ++r) fill_head(p.experts[r]);
    return p;
  }
};

// ---- forward/backward building blocks ------------------------------------

struct EncCache {
  std::vector<double> x, z;
};

struct HeadCache {
  std::vector<double> in, t, y, u;  // t = tanh(W1 in + b1), y = W2 t + b2, u = y/|y|
  double norm = 0.0;
};

namespace nn {

inline void affine(const double* w, const double* b, int out, int in, const double* x,
                   double* y) {
  for (int i = 0; i < out; ++i) {
    double s = b[i];
    const double* row = w + static_cast<size_t>(i) * in;
    for (int j = 0; j < in; ++j) s += row[j] * x[j];
    y[i] = s;
  }
}

inline EncCache encode(const ModelParams& p, const double* x) {
  EncCache c;
  c.x.assign(x, x + p.input_dim);
  c.z.resize(p.d);
  affine(p.w.data() + p.off_enc_w, p.w.data() + p.off_enc_b, p.d, p.input_dim, x, c.z.data());
  return c;
}

// dz -> encoder parameter gradients (input x is data, not a parameter)
inline void encode_backward(const ModelParams& p, const EncCache& c, const double* dz,
                            std::vector<double>& grad) {
  double* gw = grad.data() + p.off_enc_w;
  double* gb = grad.data() + p.off_enc_b;
  for (int i = 0; i < p.d; ++i) {
    gb[i] += dz[i];
    double* row = gw + static_cast<size_t>(i) * p.input_dim;
    for (int j = 0; j < p.input_dim; ++j) row[j] += dz[i] * c.x[j];
  }
}

// affine-tanh-affine followed by L2 normalization
inline HeadCache head_forward(const ModelParams& p, const HeadRef& h, const double* in) {
  HeadCache c;
  c.in.assign(in, in + h.in);
  c.t.resize(h.hid);
  affine(p.w.data() + h.w1, p.w.data() + h.b1, h.hid, h.in, in, c.t.data());
  for (double& v : c.t) v = std::tanh(v);
  c.y.resize(h.out);
  affine(p.w.data() + h.w2, p.w.data() + h.b2, h.out, h.hid, c.t.data(), c.y.data());
  c.u.resize(h.out);
  c.norm = normalize(c.y.data(), c.u.data(), h.out, "degenerate projection");
  return c;
}

// du -> head parameter gradients + gradient w.r.t. the head input (accumulated
// into d_in when non-null).
inline void head_backward(const ModelParams& p, const HeadRef& h, const HeadCache& c,
                          const double* du, std::vector<double>& grad, double* d_in) {
  // through u = y/|y|
  std::vector<double> dy(h.out);
  const double udotdu = dot(c.u.data(), du, h.out);
  for (int i = 0; i < h.out; ++i) dy[i] = (du[i] - c.u[i] * udotdu) / c.norm;

  double* gw2 = grad.data() + h.w2;
  double* gb2 = grad.data() + h.b2;
  std::vector<double> dt(h.hid, 0.0);
  const double* w2 = p.w.data() + h.w2;
  for (int i = 0; i < h.out; ++i) {
    gb2[i] += dy[i];
    double* row = gw2 + static_cast<size_t>(i) * h.hid;
    const double* w2row = w2 + static_cast<size_t>(i) * h.hid;
    for (int j = 0; j < h.hid; ++j) {
      row[j] += dy[i] * c.t[j];
      dt[j] += w2row[j] * dy[i];
    }
  }
  for (int j = 0; j < h.hid; ++j) dt[j] *= 1.0 - c.t[j] * c.t[j];

  double* gw1 = grad.data() + h.w1;
  double* gb1 = grad.data() + h.b1;
  const double* w1 = p.w.data() + h.w1;
  for (int i = 0; i < h.hid; ++i) {
    gb1[i] += dt[i];
    double* row = gw1 + static_cast<size_t>(i) * h.in;
    const double* w1row = w1 + static_cast<size_t>(i) * h.in;
    for (int j = 0; j < h.in; ++j) {
      row[j] += dt[i] * c.in[j];
      if (d_in) d_in[j] += w1row[j] * dt[i];
    }
  }
}

inline std::vector<double> classify(const ModelParams& p, const double* z) {
  std::vector<double> logits(p.k_classes);
  affine(p.w.data() + p.off_cls_w, p.w.data() + p.off_cls_b, p.k_classes, p.d, z, logits.data());
  return logits;
}

inline void classify_backward(const ModelParams& p, const double* z, const double* dlogits,
                              std::vector<double>& grad, double* dz) {
  double* gw = grad.data() + p.off_cls_w;
  double* gb = grad.data() + p.off_cls_b;
  const double* w = p.w.data() + p.off_cls_w;
  for (int i = 0; i < p.k_classes; ++i) {
    gb[i] += dlogits[i];
    double* row = gw + static_cast<size_t>(i) * p.d;
    const double* wrow = w + static_cast<size_t>(i) * p.d;
    for (int j = 0; j < p.d; ++j) {
      row[j] += dlogits[i] * z[j];
      if (dz) dz[j] += wrow[j] * dlogits[i];
    }
  }
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// dL/dlogits given p = softmax(logits) and g = dL/dp
inline std::vector<double> softmax_backward(const std::vector<double>& p,
                                            const std::vector<double>& g) {
  double gp = 0.0;
  for (size_t i = 0; i < p.size(); ++i) gp += g[i] * p[i];
  std::vector<double> dl(p.size());
  for (size_t i = 0; i < p.size(); ++i) dl[i] = p[i] * (g[i] - gp);
  return dl;
}

}  // namespace nn

// ---- checkpoint -----------------------------------------------------------

inline void save_checkpoint(const std::string& path, const ModelParams& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("MGCP", 4);
  os.put(static_cast<char>(1));
  auto put32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  put32(static_cast<uint32_t>(p.input_dim));
  put32(static_cast<uint32_t>(p.d));
  put32(static_cast<uint32_t>(p.h_phi));
  put32(static_cast<uint32_t>(p.k_classes));
  put32(static_cast<uint32_t>(p.w.size()));
  for (double v : p.w) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MGCP", 4) != 0) throw std::runtime_error("bad checkpoint magic");
  if (is.get() != 1) throw std::runtime_error("unsupported checkpoint version");
  auto get32 = [&]() {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("truncated checkpoint");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  };
  const int input_dim = static_cast<int>(get32());
  const int d = static_cast<int>(get32());
  const int h_phi = static_cast<int>(get32());
  const int k = static_cast<int>(get32());
  ModelParams p = ModelParams::init(input_dim, d, h_phi, k, 0);
  const uint32_t n = get32();
  if (n != p.w.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (double& v : p.w) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("truncated checkpoint");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &bits, 8);
  }
  return p;
}

}  // namespace mgce
