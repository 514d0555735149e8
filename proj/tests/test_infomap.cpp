#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mgce/infomap.hpp"
#include "oracles.hpp"

using namespace mgce;
using mgce::test::make_graph;
using mgce::test::make_set;

namespace {

Partition partition_of(std::vector<int> assign) { return Partition::from_assignment(std::move(assign)); }

SymmetrizedGraph two_triangles() {
  return make_graph(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}});
}

SymmetrizedGraph bridged_triangles(double bridge) {
  auto g = make_graph(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1},
                          {3, 4, 1}, {4, 5, 1}, {3, 5, 1}, {2, 3, bridge}});
  return g;
}

}  // namespace

TEST_CASE("map equation basics") {
  SECTION("single community on a connected graph = visit-rate entropy, zero exit") {
    auto g = make_graph(3, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}});
    FlowGraph f = FlowGraph::from_graph(g);
    const double l = map_equation(f, partition_of({0, 0, 0}));
    CHECK(l == Catch::Approx(std::log2(3.0)));  // three equal visit rates
    CHECK(l == Catch::Approx(oracle::codelength(g, {0, 0, 0})));
  }
  SECTION("all-singletons costs more than the component partition") {
    auto g = two_triangles();
    FlowGraph f = FlowGraph::from_graph(g);
    const double singles = map_equation(f, partition_of({0, 1, 2, 3, 4, 5}));
    const double comps = map_equation(f, partition_of({0, 0, 0, 1, 1, 1}));
    CHECK(comps < singles);
  }
  SECTION("empty graph is rejected") {
    FlowGraph f;
    CHECK_THROWS_WITH(map_equation(f, Partition{}), "empty graph");
  }
  SECTION("invariant under community relabeling") {
    auto g = bridged_triangles(0.2);
    FlowGraph f = FlowGraph::from_graph(g);
    const double a = map_equation(f, partition_of({0, 0, 0, 1, 1, 1}));
    const double b = map_equation(f, partition_of({1, 1, 1, 0, 0, 0}));
    CHECK(a == Catch::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("map equation matches the oracle on random partitions") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(2, 8);
    std::vector<std::tuple<int, int, double>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.5) edges.emplace_back(i, j, 0.1 + rng.uniform());
    auto g = make_graph(n, edges);
    FlowGraph f = FlowGraph::from_graph(g);
    std::vector<int> assign(n);
    for (int& a : assign) a = rng.uniform_int(0, n - 1);
    Partition part = partition_of(assign);
    CHECK(map_equation(f, part) ==
          Catch::Approx(oracle::codelength(g, part.assignment)).margin(1e-12));
  }
}

TEST_CASE("bridged triangles: clique split is the exhaustive optimum") {
  auto g = bridged_triangles(0.1);
  auto best = oracle::brute_force_partition(g);  // enumerates all 203 set partitions
  FlowGraph f = FlowGraph::from_graph(g);
  const double by_clique = map_equation(f, partition_of({0, 0, 0, 1, 1, 1}));
  CHECK(by_clique == Catch::Approx(best.codelength).margin(1e-9));
}

TEST_CASE("detect_communities") {
  SECTION("edgeless graph -> singletons") {
    SymmetrizedGraph g;
    g.n = 5;
    g.adj.resize(5);
    Partition p = detect_communities(g, 0);
    CHECK(p.count() == 5);
    for (int c = 0; c < 5; ++c) CHECK(p.sizes[c] == 1);
  }
  SECTION("two disjoint 4-cliques -> exactly the cliques") {
    std::vector<std::tuple<int, int, double>> edges;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        edges.emplace_back(i, j, 1.0);
        edges.emplace_back(4 + i, 4 + j, 1.0);
      }
    auto g = make_graph(8, edges);
    Partition p = detect_communities(g, 0);
    REQUIRE(p.count() == 2);
    CHECK(p.assignment == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});

    auto best = oracle::brute_force_partition(g);
    FlowGraph f = FlowGraph::from_graph(g);
    CHECK(map_equation(f, p) == Catch::Approx(best.codelength).margin(1e-9));
  }
  SECTION("deterministic across repeat runs") {
    auto g = bridged_triangles(0.3);
    Partition a = detect_communities(g, 1);
    Partition b = detect_communities(g, 1);
    CHECK(a == b);
  }
  SECTION("never exceeds the all-singletons codelength") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = rng.uniform_int(2, 8);
      std::vector<std::tuple<int, int, double>> edges;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (rng.uniform() < 0.6) edges.emplace_back(i, j, 0.1 + rng.uniform());
      auto g = make_graph(n, edges);
      FlowGraph f = FlowGraph::from_graph(g);
      Partition found = detect_communities(g, 0);
      std::vector<int> singles(n);
      std::iota(singles.begin(), singles.end(), 0);
      CHECK(map_equation(f, found) <=
            map_equation(f, partition_of(singles)) + 1e-12);
    }
  }
  SECTION("edge-weight scaling leaves the partition unchanged") {
    auto g1 = bridged_triangles(0.3);
    auto g2 = g1;
    for (auto& lst : g2.adj)
      for (Edge& e : lst) e.w *= 37.5;
    g2.total_weight *= 37.5;
    CHECK(detect_communities(g1, 0) == detect_communities(g2, 0));
  }
}

TEST_CASE("detect_communities attains the exhaustive optimum on small graphs") {
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = rng.uniform_int(3, 8);
    std::vector<std::tuple<int, int, double>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.55) edges.emplace_back(i, j, 0.2 + rng.uniform());
    auto g = make_graph(n, edges);
    auto best = oracle::brute_force_partition(g);
    if (!best.unique) continue;
    ++checked;
    FlowGraph f = FlowGraph::from_graph(g);
    Partition found = detect_communities(g, 0);
    INFO("trial " << trial << " n=" << n);
    CHECK(map_equation(f, found) == Catch::Approx(best.codelength).margin(1e-9));
  }
  CHECK(checked >= 10);
}

TEST_CASE("semi_infomap pipelines") {
  SECTION("isolated tight blobs become one community each") {
    // three orthogonal directions, three near-duplicates each
    std::vector<std::vector<double>> rows;
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 3; ++i) {
        std::vector<double> v(6, 0.0);
        v[2 * b] = 1.0;
        v[2 * b + 1] = 0.01 * i;
        rows.push_back(v);
      }
    auto set = make_set(rows);
    Partition p = semi_infomap(set, 3, 0.9, 0);
    REQUIRE(p.count() == 3);
    for (int i = 0; i < 9; ++i) CHECK(p.assignment[i] == i / 3);
  }
  SECTION("all labeled, all same class -> a single community") {
    auto set = make_set({{1, 0}, {0.9, 0.1}, {0.8, 0.3}, {0.6, 0.4}}, {0, 0, 0, 0});
    Partition p = semi_infomap(set, 3, 0.0, 0);
    CHECK(p.count() == 1);
  }
  SECTION("smaller neighborhoods give at least as many communities") {
    // a long chain of slowly rotating directions
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 12; ++i) {
      const double a = 0.12 * i;
      rows.push_back({std::cos(a), std::sin(a)});
    }
    auto set = make_set(rows);
    Partition fine = semi_infomap(set, 1, 0.0, 0);
    Partition coarse = semi_infomap(set, 11, 0.0, 0);
    CHECK(fine.count() > coarse.count());
  }
}
