#include <catch2/catch_amalgamated.hpp>

#include "mgce/data.hpp"

using namespace mgce;

TEST_CASE("synthetic split rule: half of each known class is labeled") {
  SyntheticSpec spec;
  spec.n_super = 1;
  spec.classes_per_super = 2;
  spec.subclasses_per_class = 1;
  spec.samples_per_subclass = 4;
  spec.dim = 8;
  spec.sigma_within = 0.05;
  spec.sigma_sub = 0.1;
  spec.sigma_class = 0.5;
  spec.seed = 7;

  EmbeddingSet set = generate_synthetic(spec);
  REQUIRE(set.size() == 8);

  int labeled0 = 0, unlabeled_known0 = 0, novel1 = 0;
  for (const Sample& s : set.samples) {
    if (*s.truth == 0) {
      if (s.split == Split::LabeledKnown) ++labeled0;
      if (s.split == Split::UnlabeledKnown) ++unlabeled_known0;
      REQUIRE(s.split != Split::UnlabeledNovel);
    } else {
      REQUIRE(s.split == Split::UnlabeledNovel);
      ++novel1;
    }
  }
  CHECK(labeled0 == 2);
  CHECK(unlabeled_known0 == 2);
  CHECK(novel1 == 4);

  // labeled rows are the lowest-index rows of their class
  CHECK(set.samples[0].split == Split::LabeledKnown);
  CHECK(set.samples[1].split == Split::LabeledKnown);
  CHECK(set.samples[2].split == Split::UnlabeledKnown);
}

TEST_CASE("synthetic generation is a pure function of the spec") {
  SyntheticSpec spec;
  spec.seed = 42;
  EmbeddingSet a = generate_synthetic(spec);
  EmbeddingSet b = generate_synthetic(spec);
  REQUIRE(a.rows == b.rows);  // bit-identical
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].split == b.samples[i].split);
    CHECK(a.samples[i].label == b.samples[i].label);
  }

  spec.seed = 43;
  EmbeddingSet c = generate_synthetic(spec);
  CHECK_FALSE(a.rows == c.rows);
}

TEST_CASE("synthetic count arithmetic follows the 50% rule") {
  SyntheticSpec spec;
  spec.n_super = 2;
  spec.classes_per_super = 5;
  spec.subclasses_per_class = 2;
  spec.samples_per_subclass = 20;
  spec.dim = 64;
  EmbeddingSet set = generate_synthetic(spec);

  GcdCounts c = gcd_counts(set);
  CHECK(c.k_labeled == 5);
  REQUIRE(c.k_true.has_value());
  CHECK(*c.k_true == 10);
  // class size 40 -> 20 labeled per known class
  CHECK(c.n_labeled == 100);
  CHECK(c.m_unlabeled == 300);
  CHECK(c.n_labeled + c.m_unlabeled == set.size());
}

TEST_CASE("known classes cover every superclass when interleaved") {
  SyntheticSpec spec;  // defaults: 2 supers x 5 classes
  EmbeddingSet set = generate_synthetic(spec);
  // class ids 0..4 are known and alternate supers; the novel set likewise
  GcdCounts c = gcd_counts(set);
  CHECK(c.k_labeled == 5);
}

TEST_CASE("gcd_counts on hand-built sets") {
  EmbeddingSet set;
  set.dim = 2;
  set.rows = Matrix(3, 2);
  set.samples.resize(3);
  for (int i = 0; i < 3; ++i) set.samples[i].id = i;
  set.samples[0].split = Split::LabeledKnown;
  set.samples[0].label = 0;
  set.samples[0].truth = 0;
  set.samples[1].split = Split::UnlabeledKnown;
  set.samples[1].truth = 0;
  set.samples[2].split = Split::UnlabeledNovel;
  set.samples[2].truth = 1;
  set.validate();

  GcdCounts c = gcd_counts(set);
  CHECK(c.n_labeled == 1);
  CHECK(c.m_unlabeled == 2);
  CHECK(c.k_labeled == 1);
  REQUIRE(c.k_true.has_value());
  CHECK(*c.k_true == 2);

  SECTION("all-labeled set has M = 0") {
    EmbeddingSet all;
    all.dim = 2;
    all.rows = Matrix(2, 2);
    all.samples.resize(2);
    for (int i = 0; i < 2; ++i) {
      all.samples[i].id = i;
      all.samples[i].split = Split::LabeledKnown;
      all.samples[i].label = i;
      all.samples[i].truth = i;
    }
    all.validate();
    CHECK(gcd_counts(all).m_unlabeled == 0);
  }

  SECTION("protocol-scale counts: 1498 labeled over 100 classes, 4496 unlabeled over 200") {
    EmbeddingSet big;
    big.dim = 2;
    big.rows = Matrix(1498 + 4496, 2);
    big.samples.resize(big.rows.n);
    for (int i = 0; i < big.rows.n; ++i) {
      Sample& s = big.samples[i];
      s.id = i;
      if (i < 1498) {
        s.split = Split::LabeledKnown;
        s.label = i % 100;
        s.truth = s.label;
      } else {
        s.truth = i % 200;
        s.split = *s.truth < 100 ? Split::UnlabeledKnown : Split::UnlabeledNovel;
      }
    }
    big.validate();
    GcdCounts bc = gcd_counts(big);
    CHECK(bc.n_labeled == 1498);
    CHECK(bc.m_unlabeled == 4496);
    CHECK(bc.k_labeled == 100);
    CHECK(*bc.k_true == 200);
  }
}

TEST_CASE("validation rejects inconsistent sets") {
  EmbeddingSet set;
  set.dim = 2;
  set.rows = Matrix(1, 2);
  set.samples.resize(1);
  set.samples[0].id = 0;
  set.samples[0].split = Split::LabeledKnown;  // labeled but no label
  CHECK_THROWS_WITH(set.validate(), "missing label");

  set.samples[0].label = 0;
  set.samples[0].truth = 0;
  set.rows.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(set.validate(), "non-finite embedding");

  set.rows.at(0, 1) = 0.0;
  set.samples[0].split = Split::UnlabeledNovel;  // label on unlabeled row
  CHECK_THROWS(set.validate());
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.dim = 1;
  CHECK_THROWS(generate_synthetic(spec));
  spec.dim = 8;
  spec.sigma_within = spec.sigma_sub;  // violates the separability ordering
  CHECK_THROWS(generate_synthetic(spec));
  spec.sigma_within = 0.01;
  spec.n_super = 0;
  CHECK_THROWS(generate_synthetic(spec));
}
