// Command-line front end: synthetic data generation, adaptive neighborhood
// selection, training, one-shot clustering, evaluation, class-count
// estimation and per-epoch curve extraction.
//
// Exit codes: 0 success, 1 usage error, 2 data/runtime error.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "mgce/config.hpp"
#include "mgce/io.hpp"

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << content;
}

void write_partition_csv(const std::string& path, const mgce::Partition& part) {
  std::ostringstream os;
  os << "id,community\n";
  for (size_t i = 0; i < part.assignment.size(); ++i)
    os << i << ',' << part.assignment[i] << '\n';
  write_file(path, os.str());
}

mgce::Partition load_partition_csv(const std::string& path, int n) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty partition file");
  std::vector<int> assign(n, -1);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("bad partition row: " + line);
    const long id = std::stol(line.substr(0, comma));
    if (id < 0 || id >= n) throw std::runtime_error("partition id out of range");
    assign[id] = std::stoi(line.substr(comma + 1));
  }
  for (int v : assign)
    if (v < 0) throw std::runtime_error("partition does not cover all rows");
  return mgce::Partition::from_assignment(assign);
}

// train/gen flag overrides share the config key space
struct Overrides {
  std::vector<std::pair<std::string, std::string>> kv;

  void add_flags(CLI::App* cmd, const std::vector<std::string>& keys) {
    for (const std::string& key : keys) {
      auto setter = [this, key](const std::string& v) { kv.emplace_back(key, v); };
      cmd->add_option_function<std::string>("--" + key, setter);
    }
  }

  void apply(mgce::RunConfig& cfg) const {
    for (auto& [k, v] : kv) cfg.set(k, v);
  }
};

const std::vector<std::string> kTrainKeys = {
    "epochs", "batch-size", "lr",        "lambda",  "alpha",   "scale-r",
    "delta",  "knn",        "eta",       "tau-u",   "tau-l",   "tau-s",
    "tau-c",  "epsilon",    "seed",      "k-known", "k",       "encoder-dim",
    "phi-hidden", "sigma-aug", "n-concepts", "n-instances", "use-instance",
    "use-concept", "use-multi-expert", "use-collab", "data-dir", "out-dir"};

const std::vector<std::string> kGenKeys = {
    "n-super", "classes-per-super", "subclasses-per-class", "samples-per-subclass",
    "dim",     "sigma-within",      "sigma-sub",            "sigma-class",
    "gen-seed", "out-dir"};

int run_gen(const std::string& spec_path, const Overrides& ov) {
  mgce::RunConfig cfg;
  if (!spec_path.empty()) cfg.load_file(spec_path);
  ov.apply(cfg);
  if (cfg.out_dir.empty()) throw UsageError("gen needs --out-dir");
  fs::create_directories(cfg.out_dir);
  mgce::EmbeddingSet set = mgce::generate_synthetic(cfg.synth);
  mgce::save_dataset(cfg.out_dir, set);
  write_file(cfg.out_dir + "/config.resolved", cfg.resolved());
  const auto counts = mgce::gcd_counts(set);
  std::printf("wrote %d rows (dim %d) to %s: N=%d M=%d K_L=%d K=%d\n", set.size(), set.dim,
              cfg.out_dir.c_str(), counts.n_labeled, counts.m_unlabeled, counts.k_labeled,
              counts.k_true.value_or(-1));
  return 0;
}

int run_select_knn(const std::string& data_dir, double delta, uint64_t seed,
                   const std::string& out) {
  mgce::EmbeddingSet set = mgce::load_dataset(data_dir);
  mgce::KnnSearchReport rep = mgce::select_knn_report(set, set.rows, delta, seed);
  std::ostringstream os;
  mgce::write_knn_report_csv(os, rep);
  if (!out.empty()) write_file(out, os.str());
  else std::cout << os.str();
  std::printf("chosen k_nn = %d (coarse stage winner %d)\n", rep.chosen, rep.k_coarse);
  return 0;
}

int run_train(const std::string& config_path, const Overrides& ov) {
  mgce::RunConfig cfg;
  if (!config_path.empty()) cfg.load_file(config_path);
  ov.apply(cfg);
  if (cfg.data_dir.empty()) throw UsageError("train needs --data-dir");
  if (cfg.out_dir.empty()) throw UsageError("train needs --out-dir");
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/config.resolved", cfg.resolved());

  mgce::EmbeddingSet set = mgce::load_dataset(cfg.data_dir);
  mgce::TrainResult res = mgce::run(set, cfg.train);

  write_file(cfg.out_dir + "/train_log.csv", res.step_log);
  write_file(cfg.out_dir + "/epoch_log.csv", res.epoch_log);
  mgce::save_checkpoint(cfg.out_dir + "/params.ckpt", res.params);
  if (res.final_partition.count() > 0)
    write_partition_csv(cfg.out_dir + "/partition.csv", res.final_partition);

  std::printf("trained %d epochs, k_nn = (%d, %d, %d)\n", cfg.train.epochs, res.experts.k1,
              res.experts.k2, res.experts.k3);
  if (!res.summaries.empty() && res.summaries.back().acc) {
    const mgce::AccReport& a = *res.summaries.back().acc;
    std::printf("final ACC all/old/new = %.4f/%.4f/%.4f, K_est = %d\n", a.all_acc, a.old_acc,
                a.new_acc, res.summaries.back().k_est);
  }
  return 0;
}

int run_cluster(const std::string& data_dir, int knn, double delta, uint64_t seed, int k,
                const std::string& out) {
  if (knn < 1) throw UsageError("--knn must be >= 1");
  mgce::EmbeddingSet set = mgce::load_dataset(data_dir);
  mgce::Partition part = mgce::semi_infomap(set, knn, delta, seed);
  if (k > 0 && part.count() > k) part = mgce::merge_to_k(part, set.rows, k);
  if (!out.empty()) write_partition_csv(out, part);
  std::printf("%d communities (%d with >= 4 members)\n", part.count(), mgce::estimate_k(part));
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& partition_path,
             const std::string& out) {
  mgce::EmbeddingSet set = mgce::load_dataset(data_dir);
  mgce::Partition part = load_partition_csv(partition_path, set.size());
  mgce::AccReport rep = mgce::gcd_acc(set, part);

  std::printf("  split   accuracy\n");
  std::printf("  All     %.4f\n", rep.all_acc);
  std::printf("  Old     %.4f\n", rep.old_acc);
  std::printf("  New     %.4f\n", rep.new_acc);
  std::printf("  K_est   %d\n", rep.k_est);

  char buf[160];
  std::snprintf(buf, sizeof buf, "all_acc,old_acc,new_acc,k_est\n%.10g,%.10g,%.10g,%d\n",
                rep.all_acc, rep.old_acc, rep.new_acc, rep.k_est);
  if (!out.empty()) write_file(out, buf);
  else std::fputs(buf, stdout);
  return 0;
}

int run_estimate_k(const std::string& data_dir, const std::string& partition_path) {
  mgce::EmbeddingSet set = mgce::load_dataset(data_dir);
  mgce::Partition part = load_partition_csv(partition_path, set.size());
  const int k_est = mgce::estimate_k(part);
  const auto counts = mgce::gcd_counts(set);
  if (counts.k_true) {
    const double err = 100.0 * std::abs(*counts.k_true - k_est) / *counts.k_true;
    std::printf("k_est,gt,err_rate\n%d,%d,%.10g\n", k_est, *counts.k_true, err);
  } else {
    std::printf("k_est\n%d\n", k_est);
  }
  return 0;
}

// Extracts accuracy-vs-epoch and concept-count-vs-epoch series from a run dir.
int run_report(const std::string& run_dir, std::string out_dir) {
  if (out_dir.empty()) out_dir = run_dir;
  std::ifstream is(run_dir + "/epoch_log.csv");
  if (!is) throw std::runtime_error("cannot open: " + run_dir + "/epoch_log.csv");
  std::string line;
  std::getline(is, line);  // header
  std::ostringstream acc, kg;
  acc << "epoch,all_acc,old_acc,new_acc\n";
  kg << "epoch,kg1,kg2,kg3,k_est\n";
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') { f.push_back(cur); cur.clear(); }
      else if (ch != '\r') cur.push_back(ch);
    }
    f.push_back(cur);
    if (f.size() != 8) throw std::runtime_error("bad epoch_log row: " + line);
    if (!f[1].empty()) acc << f[0] << ',' << f[1] << ',' << f[2] << ',' << f[3] << '\n';
    kg << f[0] << ',' << f[4] << ',' << f[5] << ',' << f[6] << ',' << f[7] << '\n';
  }
  fs::create_directories(out_dir);
  write_file(out_dir + "/acc_vs_epoch.csv", acc.str());
  write_file(out_dir + "/kg_vs_epoch.csv", kg.str());
  std::printf("wrote %s/acc_vs_epoch.csv and %s/kg_vs_epoch.csv\n", out_dir.c_str(),
              out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-granularity concept-expert category discovery"};
  app.require_subcommand(1);

  std::string spec_path, config_path, data_dir, partition_path, out, run_dir;
  double delta = 0.6;
  uint64_t seed = 1;
  int knn = 0, k = 0;

  Overrides gen_ov, train_ov;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "synthetic spec config file");
  gen->add_option("--out", out, "output directory (alias of --out-dir)");
  gen_ov.add_flags(gen, kGenKeys);

  CLI::App* sel = app.add_subcommand("select-knn", "adaptive neighborhood-size search");
  sel->add_option("--data", data_dir)->required();
  sel->add_option("--delta", delta);
  sel->add_option("--seed", seed);
  sel->add_option("--out", out, "report CSV path (default: stdout)");

  CLI::App* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--config", config_path, "flat key = value config file");
  train->add_option("--data", data_dir, "alias of --data-dir");
  train->add_option("--out", out, "alias of --out-dir");
  train_ov.add_flags(train, kTrainKeys);

  CLI::App* cluster = app.add_subcommand("cluster", "one-shot constrained clustering");
  cluster->add_option("--data", data_dir)->required();
  cluster->add_option("--knn", knn)->required();
  cluster->add_option("--delta", delta);
  cluster->add_option("--seed", seed);
  cluster->add_option("--k", k, "merge down to this many clusters");
  cluster->add_option("--out", out, "partition CSV path");

  CLI::App* eval = app.add_subcommand("eval", "accuracy report for a partition");
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--partition", partition_path)->required();
  eval->add_option("--out", out, "CSV path (default: stdout)");

  CLI::App* estk = app.add_subcommand("estimate-k", "class-count estimate for a partition");
  estk->add_option("--data", data_dir)->required();
  estk->add_option("--partition", partition_path)->required();

  CLI::App* report = app.add_subcommand("report", "extract per-epoch curves from a run");
  report->add_option("--run", run_dir)->required();
  report->add_option("--out", out, "output directory (default: the run dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) {
      if (!out.empty()) gen_ov.kv.emplace_back("out-dir", out);
      return run_gen(spec_path, gen_ov);
    }
    if (sel->parsed()) return run_select_knn(data_dir, delta, seed, out);
    if (train->parsed()) {
      if (!data_dir.empty()) train_ov.kv.emplace_back("data-dir", data_dir);
      if (!out.empty()) train_ov.kv.emplace_back("out-dir", out);
      return run_train(config_path, train_ov);
    }
    if (cluster->parsed()) return run_cluster(data_dir, knn, delta, seed, k, out);
    if (eval->parsed()) return run_eval(data_dir, partition_path, out);
    if (estk->parsed()) return run_estimate_k(data_dir, partition_path);
    if (report->parsed()) return run_report(run_dir, out);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
