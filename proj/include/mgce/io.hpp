#pragma once

// File formats.
//   embeddings: "MGCE" magic, u8 version=1, u32le rows, u32le dim,
//               rows*dim float32le, row-major.
//   labels:     UTF-8 CSV `id,label,split`, split in {L,UK,UN}; the label
//               column is required for L rows and otherwise holds optional
//               evaluation ground truth.
// Loading remaps external class ids to dense integers, labeled classes first.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "data.hpp"

namespace mgce {

namespace detail {

inline void put_u32le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("truncated embedding file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32le(std::ostream& os, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32le(os, v);
}

inline float get_f32le(std::istream& is) {
  uint32_t v = get_u32le(is);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') { out.push_back(cur); cur.clear(); }
    else if (ch != '\r') cur.push_back(ch);
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline void save_embeddings(const std::string& path, const EmbeddingSet& set) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("MGCE", 4);
  os.put(static_cast<char>(1));
  detail::put_u32le(os, static_cast<uint32_t>(set.rows.n));
  detail::put_u32le(os, static_cast<uint32_t>(set.dim));
  for (double v : set.rows.a) detail::put_f32le(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline void save_labels(const std::string& path, const EmbeddingSet& set) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << "id,label,split\n";
  for (const Sample& s : set.samples) {
    os << s.id << ',';
    if (s.label) os << *s.label;
    else if (s.truth) os << *s.truth;
    os << ',' << split_code(s.split) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

// Loads embeddings + labels and densifies class ids (labeled classes first,
// then novel classes, each in ascending external-id order).
inline EmbeddingSet load_embeddings(const std::string& emb_path, const std::string& labels_path) {
  std::ifstream is(emb_path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + emb_path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MGCE", 4) != 0)
    throw std::runtime_error("bad magic in embedding file");
  const int version = is.get();
  if (version != 1) throw std::runtime_error("unsupported embedding file version");
  const uint32_t n = detail::get_u32le(is);
  const uint32_t dim = detail::get_u32le(is);
  if (dim < 2) throw std::runtime_error("embedding dim must be >= 2");

  EmbeddingSet set;
  set.dim = static_cast<int>(dim);
  set.rows = Matrix(static_cast<int>(n), static_cast<int>(dim));
  for (double& v : set.rows.a) {
    v = static_cast<double>(detail::get_f32le(is));
    if (!std::isfinite(v)) throw std::runtime_error("non-finite embedding");
  }

  // Labels CSV; rows may arrive in any order but must cover ids 0..n-1.
  std::ifstream ls(labels_path);
  if (!ls) throw std::runtime_error("cannot open: " + labels_path);
  std::string line;
  if (!std::getline(ls, line)) throw std::runtime_error("empty labels file");

  struct Raw { std::optional<long> cls; Split split; };
  std::vector<Raw> raw(n);
  std::vector<char> seen(n, 0);
  int count = 0;
  while (std::getline(ls, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 3) throw std::runtime_error("labels row needs 3 fields: " + line);
    long id = std::stol(f[0]);
    if (id < 0 || id >= static_cast<long>(n) || seen[id])
      throw std::runtime_error("labels file does not align with embedding rows");
    seen[id] = 1;
    ++count;
    Raw& r = raw[id];
    if (f[2] == "L") r.split = Split::LabeledKnown;
    else if (f[2] == "UK") r.split = Split::UnlabeledKnown;
    else if (f[2] == "UN") r.split = Split::UnlabeledNovel;
    else throw std::runtime_error("unknown split code: " + f[2]);
    if (!f[1].empty()) r.cls = std::stol(f[1]);
    else if (r.split == Split::LabeledKnown) throw std::runtime_error("missing label");
  }
  if (count != static_cast<int>(n))
    throw std::runtime_error("labels file does not align with embedding rows");

  std::map<long, int> dense;  // external id -> dense id, labeled classes first
  for (const Raw& r : raw)
    if (r.split == Split::LabeledKnown) dense.emplace(*r.cls, 0);
  int next = 0;
  for (auto& [ext, id] : dense) id = next++;
  std::map<long, int> novel;  // novel class ids continue after the labeled ones
  for (const Raw& r : raw) {
    if (r.split == Split::UnlabeledNovel && r.cls) {
      if (dense.count(*r.cls))
        throw std::runtime_error("unlabeled-novel sample carries a labeled class id");
      novel.emplace(*r.cls, 0);
    }
    if (r.split == Split::UnlabeledKnown && r.cls && !dense.count(*r.cls))
      throw std::runtime_error("unlabeled-known sample carries a novel class id");
  }
  for (auto& [ext, id] : novel) id = next++;

  set.samples.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    Sample& s = set.samples[i];
    s.id = static_cast<int>(i);
    s.split = raw[i].split;
    if (raw[i].cls) {
      const int cid = raw[i].split == Split::UnlabeledNovel ? novel.at(*raw[i].cls)
                                                            : dense.at(*raw[i].cls);
      s.truth = cid;
      if (s.split == Split::LabeledKnown) s.label = cid;
    }
  }
  set.validate();
  return set;
}

inline void save_dataset(const std::string& dir, const EmbeddingSet& set) {
  save_embeddings(dir + "/embeddings.bin", set);
  save_labels(dir + "/labels.csv", set);
}

inline EmbeddingSet load_dataset(const std::string& dir) {
  return load_embeddings(dir + "/embeddings.bin", dir + "/labels.csv");
}

}  // namespace mgce
