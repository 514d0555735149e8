#pragma once

// Shared numeric primitives: dense row-major matrix, small vector kernels,
// and a self-contained deterministic RNG (stable draw sequence regardless of
// the standard library's distribution internals).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace mgce {

struct Matrix {
  int n = 0;
  int d = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int rows, int cols) : n(rows), d(cols), a(static_cast<size_t>(rows) * cols, 0.0) {}

  double* row(int i) { return a.data() + static_cast<size_t>(i) * d; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * d; }
  double& at(int i, int j) { return a[static_cast<size_t>(i) * d + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * d + j]; }

  bool operator==(const Matrix&) const = default;
};

inline double dot(const double* x, const double* y, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const double* x, int d) { return std::sqrt(dot(x, x, d)); }

// y = x/|x|; returns |x|. Throws on a (near-)zero vector.
inline double normalize(const double* x, double* y, int d,
                        const char* what = "degenerate embedding") {
  double nrm = norm2(x, d);
  if (!(nrm > 1e-300)) throw std::runtime_error(what);
  for (int i = 0; i < d; ++i) y[i] = x[i] / nrm;
  return nrm;
}

inline double cosine(const double* x, const double* y, int d) {
  double nx = norm2(x, d), ny = norm2(y, d);
  if (!(nx > 1e-300) || !(ny > 1e-300)) throw std::runtime_error("degenerate embedding");
  return dot(x, y, d) / (nx * ny);
}

// x*log2(x) with the 0*log(0)=0 convention.
inline double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

struct Rng {
  std::mt19937_64 gen;

  explicit Rng(uint64_t seed) : gen(seed) {}

  uint64_t next() { return gen(); }

  // [0,1)
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

  double gaussian() {
    // Box-Muller; two uniform draws per normal keeps the sequence explicit.
    double u1 = 1.0 - uniform();  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // inclusive bounds, rejection sampled
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t lim = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do { r = gen(); } while (r >= lim);
    return lo + static_cast<int>(r % span);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(0, i);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }
};

}  // namespace mgce
