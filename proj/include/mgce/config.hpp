#pragma once

// Flat `key = value` configuration files ('#' comments). Unknown keys are
// rejected. Every run writes a config.resolved capturing all effective values
// with round-trippable formatting, so a rerun from it reproduces the outputs.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "trainer.hpp"

namespace mgce {

struct RunConfig {
  // data sources
  std::string data_dir;   // directory with embeddings.bin + labels.csv
  std::string out_dir;
  TrainConfig train;
  SyntheticSpec synth;

  struct Field {
    enum Kind { Int, Real, Bool, Str, Seed } kind;
    void* ptr;
  };

  std::map<std::string, Field> fields() {
    return {
        {"data-dir", {Field::Str, &data_dir}},
        {"out-dir", {Field::Str, &out_dir}},
        {"epochs", {Field::Int, &train.epochs}},
        {"batch-size", {Field::Int, &train.batch_size}},
        {"lr", {Field::Real, &train.lr0}},
        {"seed", {Field::Seed, &train.seed}},
        {"k-known", {Field::Bool, &train.k_u_known}},
        {"k", {Field::Int, &train.k}},
        {"knn", {Field::Int, &train.knn}},
        {"encoder-dim", {Field::Int, &train.encoder_dim}},
        {"phi-hidden", {Field::Int, &train.phi_hidden}},
        {"lambda", {Field::Real, &train.hyper.lambda}},
        {"alpha", {Field::Real, &train.hyper.alpha}},
        {"scale-r", {Field::Real, &train.hyper.scale_r}},
        {"delta", {Field::Real, &train.hyper.delta}},
        {"eta", {Field::Real, &train.hyper.eta}},
        {"tau-u", {Field::Real, &train.hyper.tau_u}},
        {"tau-l", {Field::Real, &train.hyper.tau_l}},
        {"tau-s", {Field::Real, &train.hyper.tau_s}},
        {"tau-c", {Field::Real, &train.hyper.tau_c}},
        {"epsilon", {Field::Real, &train.hyper.epsilon}},
        {"sigma-aug", {Field::Real, &train.hyper.sigma_aug}},
        {"n-concepts", {Field::Int, &train.hyper.n_concepts}},
        {"n-instances", {Field::Int, &train.hyper.n_instances}},
        {"use-instance", {Field::Bool, &train.flags.instance}},
        {"use-concept", {Field::Bool, &train.flags.concept_level}},
        {"use-multi-expert", {Field::Bool, &train.flags.multi_expert}},
        {"use-collab", {Field::Bool, &train.flags.collab}},
        {"n-super", {Field::Int, &synth.n_super}},
        {"classes-per-super", {Field::Int, &synth.classes_per_super}},
        {"subclasses-per-class", {Field::Int, &synth.subclasses_per_class}},
        {"samples-per-subclass", {Field::Int, &synth.samples_per_subclass}},
        {"dim", {Field::Int, &synth.dim}},
        {"sigma-within", {Field::Real, &synth.sigma_within}},
        {"sigma-sub", {Field::Real, &synth.sigma_sub}},
        {"sigma-class", {Field::Real, &synth.sigma_class}},
        {"gen-seed", {Field::Seed, &synth.seed}},
    };
  }

  void set(const std::string& key, const std::string& value) {
    auto fs = fields();
    auto it = fs.find(key);
    if (it == fs.end()) throw std::runtime_error("unknown config key: " + key);
    const Field& f = it->second;
    try {
      switch (f.kind) {
        case Field::Int: *static_cast<int*>(f.ptr) = std::stoi(value); break;
        case Field::Real: *static_cast<double*>(f.ptr) = std::stod(value); break;
        case Field::Seed: *static_cast<uint64_t*>(f.ptr) = std::stoull(value); break;
        case Field::Str: *static_cast<std::string*>(f.ptr) = value; break;
        case Field::Bool: {
          if (value == "true" || value == "1") *static_cast<bool*>(f.ptr) = true;
          else if (value == "false" || value == "0") *static_cast<bool*>(f.ptr) = false;
          else throw std::runtime_error("bad bool");
          break;
        }
      }
    } catch (const std::exception&) {
      throw std::runtime_error("bad value for config key " + key + ": " + value);
    }
  }

  std::string resolved() {
    std::ostringstream os;
    char buf[64];
    for (auto& [key, f] : fields()) {
      os << key << " = ";
      switch (f.kind) {
        case Field::Int: os << *static_cast<int*>(f.ptr); break;
        case Field::Seed: os << *static_cast<uint64_t*>(f.ptr); break;
        case Field::Str: os << *static_cast<std::string*>(f.ptr); break;
        case Field::Bool: os << (*static_cast<bool*>(f.ptr) ? "true" : "false"); break;
        case Field::Real:
          std::snprintf(buf, sizeof buf, "%.17g", *static_cast<double*>(f.ptr));
          os << buf;
          break;
      }
      os << '\n';
    }
    return os.str();
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        const size_t a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        const size_t b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
      };
      const std::string t = trim(line);
      if (t.empty()) continue;
      const size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("bad config line " + std::to_string(lineno) + ": " + t);
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }
};

}  // namespace mgce
