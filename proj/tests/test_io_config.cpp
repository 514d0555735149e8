#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mgce/config.hpp"
#include "mgce/io.hpp"

using namespace mgce;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("mgce_test_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

}  // namespace

TEST_CASE("embedding + labels round trip") {
  auto dir = temp_dir("io");
  SyntheticSpec spec;
  spec.n_super = 1;
  spec.classes_per_super = 3;
  spec.subclasses_per_class = 1;
  spec.samples_per_subclass = 6;
  spec.dim = 4;
  spec.sigma_within = 0.05;
  spec.sigma_sub = 0.1;
  spec.sigma_class = 0.5;
  EmbeddingSet set = generate_synthetic(spec);
  save_dataset(dir.string(), set);

  EmbeddingSet back = load_dataset(dir.string());
  REQUIRE(back.size() == set.size());
  REQUIRE(back.dim == set.dim);
  for (int i = 0; i < set.size(); ++i) {
    CHECK(back.samples[i].split == set.samples[i].split);
    CHECK(back.samples[i].label == set.samples[i].label);
    CHECK(back.samples[i].truth == set.samples[i].truth);
    for (int j = 0; j < set.dim; ++j)  // float32 storage is exact for float-representable values
      CHECK(back.rows.at(i, j) == Catch::Approx(set.rows.at(i, j)).margin(1e-6));
  }
}

TEST_CASE("loader accepts a hand-written v1 file") {
  auto dir = temp_dir("io_hand");
  // header + 6 finite floats + labels for 3 rows
  {
    std::ofstream os(dir / "embeddings.bin", std::ios::binary);
    os.write("MGCE", 4);
    os.put(1);
    const unsigned char n[4] = {3, 0, 0, 0}, d[4] = {2, 0, 0, 0};
    os.write(reinterpret_cast<const char*>(n), 4);
    os.write(reinterpret_cast<const char*>(d), 4);
    const float vals[6] = {1.f, 0.f, 0.f, 1.f, 1.f, 1.f};
    os.write(reinterpret_cast<const char*>(vals), 24);
  }
  write_text(dir / "labels.csv", "id,label,split\n0,5,L\n1,5,UK\n2,9,UN\n");
  EmbeddingSet set = load_dataset(dir.string());
  REQUIRE(set.size() == 3);
  CHECK(*set.samples[0].label == 0);  // densified: label 5 -> 0
  CHECK(*set.samples[1].truth == 0);
  CHECK(*set.samples[2].truth == 1);  // novel 9 -> 1
}

TEST_CASE("loader error paths") {
  auto dir = temp_dir("io_err");
  SyntheticSpec spec;
  spec.n_super = 1;
  spec.classes_per_super = 2;
  spec.subclasses_per_class = 1;
  spec.samples_per_subclass = 4;
  spec.dim = 4;
  spec.sigma_within = 0.05;
  spec.sigma_sub = 0.1;
  spec.sigma_class = 0.5;
  EmbeddingSet set = generate_synthetic(spec);
  save_dataset(dir.string(), set);

  SECTION("bad magic") {
    write_text(dir / "embeddings.bin", "NOPE");
    CHECK_THROWS_WITH(load_dataset(dir.string()), Catch::Matchers::ContainsSubstring("magic"));
  }
  SECTION("missing label on a labeled row") {
    write_text(dir / "labels.csv",
               "id,label,split\n0,,L\n1,0,L\n2,0,UK\n3,0,UK\n4,1,UN\n5,1,UN\n6,1,UN\n7,1,UN\n");
    CHECK_THROWS_WITH(load_dataset(dir.string()), "missing label");
  }
  SECTION("row count mismatch with the labels file") {
    write_text(dir / "labels.csv", "id,label,split\n0,0,L\n1,0,UK\n");
    CHECK_THROWS_WITH(load_dataset(dir.string()),
                      Catch::Matchers::ContainsSubstring("align"));
  }
  SECTION("non-finite payload") {
    std::ofstream os(dir / "embeddings.bin", std::ios::binary);
    os.write("MGCE", 4);
    os.put(1);
    const unsigned char n[4] = {1, 0, 0, 0}, d[4] = {2, 0, 0, 0};
    os.write(reinterpret_cast<const char*>(n), 4);
    os.write(reinterpret_cast<const char*>(d), 4);
    const float inf = std::numeric_limits<float>::infinity();
    const float vals[2] = {1.f, inf};
    os.write(reinterpret_cast<const char*>(vals), 8);
    os.close();
    write_text(dir / "labels.csv", "id,label,split\n0,,UN\n");
    CHECK_THROWS_WITH(load_dataset(dir.string()), "non-finite embedding");
  }
  SECTION("novel row reusing a labeled class id") {
    write_text(dir / "labels.csv",
               "id,label,split\n0,0,L\n1,0,L\n2,0,UK\n3,0,UK\n4,0,UN\n5,1,UN\n6,1,UN\n7,1,UN\n");
    CHECK_THROWS(load_dataset(dir.string()));
  }
}

TEST_CASE("flat config files parse, reject unknown keys and round trip") {
  auto dir = temp_dir("cfg");
  write_text(dir / "run.cfg",
             "# comment\nepochs = 12\nlr = 0.05\nlambda = 0.35\nk-known = true\n"
             "data-dir = /tmp/x\n");
  RunConfig cfg;
  cfg.load_file((dir / "run.cfg").string());
  CHECK(cfg.train.epochs == 12);
  CHECK(cfg.train.hyper.lambda == 0.35);
  CHECK(cfg.train.k_u_known);
  CHECK(cfg.data_dir == "/tmp/x");

  write_text(dir / "bad.cfg", "no-such-key = 3\n");
  RunConfig bad;
  CHECK_THROWS_WITH(bad.load_file((dir / "bad.cfg").string()),
                    Catch::Matchers::ContainsSubstring("unknown config key"));

  // resolved output reparses to an identical resolved output
  cfg.train.lr0 = 0.05 * (1.0 / 3.0);  // a value that needs full precision
  write_text(dir / "resolved.cfg", cfg.resolved());
  RunConfig cfg2;
  cfg2.load_file((dir / "resolved.cfg").string());
  CHECK(cfg2.train.lr0 == cfg.train.lr0);
  CHECK(cfg2.resolved() == cfg.resolved());
}
