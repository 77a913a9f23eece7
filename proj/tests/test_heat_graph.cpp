#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <numeric>
#include <set>

#include "lion/heat_graph.hpp"
#include "lion/rng.hpp"

using namespace lion;

namespace {

TxnMeta touching(TxnId id, std::vector<PartitionId> pids) {
  std::vector<Op> ops;
  for (PartitionId p : pids) ops.push_back({p, 0, OpType::Read, 0});
  return TxnMeta::make(id, id * 10, ops);
}

// Workload behind the worked planner figures: two transactions on
// {P0,P1} (co-located primaries), one on {P2}, two on {P3}, two on {P4}.
TxnBatch figure_batch() {
  TxnBatch b;
  b.txns.push_back(touching(1, {0, 1}));
  b.txns.push_back(touching(2, {0, 1}));
  b.txns.push_back(touching(3, {2}));
  b.txns.push_back(touching(4, {3}));
  b.txns.push_back(touching(5, {3}));
  b.txns.push_back(touching(6, {4}));
  b.txns.push_back(touching(7, {4}));
  return b;
}

PlacementMap co_located_layout() {
  // P0 and P1 primaries both on node 0; the rest spread out.
  PlacementMap p(3, 5, 1, 4);
  p.add_replica(0, 0, ReplicaRole::Primary);
  p.add_replica(1, 0, ReplicaRole::Primary);
  p.add_replica(2, 1, ReplicaRole::Primary);
  p.add_replica(3, 2, ReplicaRole::Primary);
  p.add_replica(4, 0, ReplicaRole::Primary);
  return p;
}

// Thresholded connected-components oracle via union-find.
std::set<std::set<PartitionId>> component_oracle(const HeatGraph& g, double alpha) {
  std::map<PartitionId, PartitionId> parent;
  for (const auto& [v, w] : g.vertices) parent[v] = v;
  std::function<PartitionId(PartitionId)> find = [&](PartitionId v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& [key, e] : g.edges)
    if (e.weight > alpha) parent[find(key.first)] = find(key.second);
  std::map<PartitionId, std::set<PartitionId>> comps;
  for (const auto& [v, w] : g.vertices) comps[find(v)].insert(v);
  std::set<std::set<PartitionId>> out;
  for (auto& [root, members] : comps) out.insert(members);
  return out;
}

std::set<std::set<PartitionId>> as_sets(const std::vector<Clump>& clumps) {
  std::set<std::set<PartitionId>> out;
  for (const Clump& c : clumps) out.insert({c.pids.begin(), c.pids.end()});
  return out;
}

HeatGraph random_graph(Rng& rng, int max_vertices) {
  HeatGraph g;
  int n = 2 + static_cast<int>(rng.uniform(max_vertices - 1));
  for (int v = 0; v < n; ++v) g.add_vertex_weight(v, 1.0 + rng.uniform(5));
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(0.35)) {
        double w = 1.0 + rng.uniform(12);  // straddles typical alpha
        g.add_edge_weight(u, v, w, EdgeKind::Same);
      }
  return g;
}

}  // namespace

TEST_CASE("build_graph accumulates vertex and edge weights", "[heat_graph]") {
  TxnBatch b = figure_batch();
  HeatGraph g = build_graph(b, co_located_layout(), 10.0);

  CHECK(g.vertex_weight(0) == 2.0);
  CHECK(g.vertex_weight(1) == 2.0);
  CHECK(g.edge_weight(0, 1) == 2.0);  // same-node pair: +1 per txn
  CHECK(g.vertex_weight(3) == 2.0);
  CHECK(g.vertex_weight(4) == 2.0);

  SECTION("single transaction on one partition gives one vertex, no edges") {
    TxnBatch single;
    single.txns.push_back(touching(1, {5}));
    PlacementMap p(2, 6, 1, 4);
    for (PartitionId v = 0; v < 6; ++v)
      p.add_replica(v, v % 2, ReplicaRole::Primary);
    HeatGraph sg = build_graph(single, p);
    CHECK(sg.vertices.size() == 1);
    CHECK(sg.edges.empty());
  }

  SECTION("cross-node pair counts with cross_weight") {
    TxnBatch cross;
    cross.txns.push_back(touching(1, {2, 3}));  // primaries on nodes 1 and 2
    HeatGraph cg = build_graph(cross, co_located_layout(), 10.0);
    CHECK(cg.edge_weight(2, 3) == 10.0);
    // Direct-count oracle: one co-access, cross increment 10.
    double expect = 0.0;
    for (const TxnMeta& t : cross.txns)
      if (t.txn_parts == std::vector<PartitionId>{2, 3}) expect += 10.0;
    CHECK(cg.edge_weight(2, 3) == expect);
  }
}

TEST_CASE("build_graph is permutation invariant", "[heat_graph]") {
  TxnBatch b = figure_batch();
  PlacementMap p = co_located_layout();
  HeatGraph g1 = build_graph(b, p);
  Rng rng(99, 0);
  for (int trial = 0; trial < 5; ++trial) {
    TxnBatch shuffled = b;
    for (std::size_t i = shuffled.txns.size(); i > 1; --i)
      std::swap(shuffled.txns[i - 1], shuffled.txns[rng.uniform(i)]);
    HeatGraph g2 = build_graph(shuffled, p);
    CHECK(g1.vertices == g2.vertices);
    CHECK(g1.dump_edges() == g2.dump_edges());
  }
}

TEST_CASE("generate_clumps on the worked example graph", "[heat_graph]") {
  HeatGraph g = build_graph(figure_batch(), co_located_layout(), 10.0);
  std::vector<Clump> clumps = generate_clumps(g, 1.0);
  REQUIRE(clumps.size() == 4);
  // First clump contains the globally hottest vertex and pairs P0 with P1.
  CHECK(clumps[0].pids == std::vector<PartitionId>{0, 1});
  CHECK(clumps[0].weight == 4.0);
  std::set<std::set<PartitionId>> rest(as_sets(clumps));
  CHECK(rest.count({2}) == 1);
  CHECK(rest.count({3}) == 1);
  CHECK(rest.count({4}) == 1);
}

TEST_CASE("edgeless graph yields singleton clumps", "[heat_graph]") {
  HeatGraph g;
  for (PartitionId v = 0; v < 7; ++v) g.add_vertex_weight(v, 1.0 + v);
  std::vector<Clump> clumps = generate_clumps(g, 5.0);
  CHECK(clumps.size() == 7);
  for (const Clump& c : clumps) CHECK(c.pids.size() == 1);
  // Seed order property: first clump holds the hottest vertex.
  CHECK(clumps[0].pids[0] == 6);
}

TEST_CASE("chain splits at the threshold", "[heat_graph]") {
  double alpha = 5.0;
  HeatGraph g;
  for (PartitionId v = 1; v <= 3; ++v) g.add_vertex_weight(v, 1.0);
  g.add_edge_weight(1, 2, alpha + 1, EdgeKind::Same);
  g.add_edge_weight(2, 3, alpha - 1, EdgeKind::Same);
  auto sets = as_sets(generate_clumps(g, alpha));
  CHECK(sets == component_oracle(g, alpha));
  CHECK(sets.count({1, 2}) == 1);
  CHECK(sets.count({3}) == 1);
}

TEST_CASE("clumps partition the vertex set and match the component oracle",
          "[heat_graph]") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed, 11);
    HeatGraph g = random_graph(rng, 12);
    double alpha = 1.0 + rng.uniform(10);
    std::vector<Clump> clumps = generate_clumps(g, alpha);

    // Partition property.
    std::set<PartitionId> seen;
    double total_weight = 0.0;
    for (const Clump& c : clumps) {
      REQUIRE(!c.pids.empty());
      double w = 0.0;
      for (PartitionId v : c.pids) {
        CHECK(seen.insert(v).second);
        w += g.vertex_weight(v);
      }
      CHECK(c.weight == Catch::Approx(w));
      total_weight += c.weight;
    }
    CHECK(seen.size() == g.vertices.size());

    // Equivalence with thresholded connected components.
    CHECK(as_sets(clumps) == component_oracle(g, alpha));

    // First-generated clump contains the globally hottest vertex.
    if (!clumps.empty()) {
      PartitionId hottest = g.h_vertices().front();
      const auto& first = clumps.front().pids;
      CHECK(std::count(first.begin(), first.end(), hottest) == 1);
    }
  }
}
