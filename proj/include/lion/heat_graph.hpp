#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lion/core.hpp"

namespace lion {

enum class EdgeKind { Same, Cross };

// Weighted co-access graph over partitions. Vertices carry access counts,
// edges carry co-access weight; edges whose endpoints had primaries on
// different nodes at construction time count with the (much larger)
// cross-node increment.
struct HeatGraph {
  struct Edge {
    double weight = 0.0;
    EdgeKind kind = EdgeKind::Same;
  };

  std::map<PartitionId, double> vertices;
  std::map<std::pair<PartitionId, PartitionId>, Edge> edges;

  double vertex_weight(PartitionId v) const {
    auto it = vertices.find(v);
    return it == vertices.end() ? 0.0 : it->second;
  }

  double edge_weight(PartitionId u, PartitionId v) const {
    auto it = edges.find(ordered(u, v));
    return it == edges.end() ? 0.0 : it->second.weight;
  }

  void add_vertex_weight(PartitionId v, double w) { vertices[v] += w; }

  void add_edge_weight(PartitionId u, PartitionId v, double w, EdgeKind kind) {
    if (u == v) throw std::invalid_argument("self-edge");
    Edge& e = edges[ordered(u, v)];
    e.weight += w;
    e.kind = kind;
  }

  // Vertices ordered hottest first; ties broken by ascending partition id.
  std::vector<PartitionId> h_vertices() const {
    std::vector<PartitionId> order;
    order.reserve(vertices.size());
    for (const auto& [v, w] : vertices) order.push_back(v);
    std::stable_sort(order.begin(), order.end(), [this](PartitionId a, PartitionId b) {
      double wa = vertex_weight(a), wb = vertex_weight(b);
      if (wa != wb) return wa > wb;
      return a < b;
    });
    return order;
  }

  std::vector<std::pair<PartitionId, double>> neighbors(PartitionId v) const {
    std::vector<std::pair<PartitionId, double>> out;
    for (const auto& [key, e] : edges) {
      if (key.first == v) out.push_back({key.second, e.weight});
      else if (key.second == v) out.push_back({key.first, e.weight});
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Debug dump: `u v weight kind` per edge.
  std::string dump_edges() const {
    std::ostringstream os;
    for (const auto& [key, e] : edges)
      os << key.first << ' ' << key.second << ' ' << e.weight << ' '
         << (e.kind == EdgeKind::Cross ? "cross" : "same") << '\n';
    return os.str();
  }

  static std::pair<PartitionId, PartitionId> ordered(PartitionId u, PartitionId v) {
    return u < v ? std::make_pair(u, v) : std::make_pair(v, u);
  }
};

// A set of partitions to be co-located, with the weighted sum of its
// member vertices and an optional destination node.
struct Clump {
  std::vector<PartitionId> pids;
  double weight = 0.0;
  NodeId dest = 0;
  bool has_dest = false;
};

// Per transaction: each touched partition gains vertex weight 1, each
// unordered pair gains edge weight 1 when the primaries are co-located
// and cross_weight when they are not. Edge kind is evaluated against the
// placement snapshot taken here, not per transaction.
inline HeatGraph build_graph(const TxnBatch& batch, const PlacementMap& placement,
                             double cross_weight = 10.0) {
  if (cross_weight < 1.0) throw std::invalid_argument("cross_weight must be >= 1");
  HeatGraph g;
  for (const TxnMeta& t : batch.txns) {
    for (PartitionId v : t.txn_parts) g.add_vertex_weight(v, 1.0);
    for (std::size_t i = 0; i < t.txn_parts.size(); ++i)
      for (std::size_t j = i + 1; j < t.txn_parts.size(); ++j) {
        PartitionId u = t.txn_parts[i], v = t.txn_parts[j];
        bool cross = placement.primary_of(u) != placement.primary_of(v);
        g.add_edge_weight(u, v, cross ? cross_weight : 1.0,
                          cross ? EdgeKind::Cross : EdgeKind::Same);
      }
  }
  return g;
}

// Seeded breadth-first expansion from the hottest unvisited vertex: a
// neighbor joins the current clump iff the connecting edge weight exceeds
// alpha. Every vertex ends in exactly one clump; once placed it is never
// reassigned.
inline std::vector<Clump> generate_clumps(const HeatGraph& g, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("alpha must be positive");
  std::vector<Clump> clumps;
  std::map<PartitionId, bool> visited;
  for (const auto& [v, w] : g.vertices) visited[v] = false;

  for (PartitionId seed : g.h_vertices()) {
    if (visited[seed]) continue;
    Clump c;
    std::deque<PartitionId> frontier{seed};
    visited[seed] = true;
    while (!frontier.empty()) {
      PartitionId v = frontier.front();
      frontier.pop_front();
      c.pids.push_back(v);
      c.weight += g.vertex_weight(v);
      for (const auto& [adj, w] : g.neighbors(v)) {
        if (visited[adj] || w <= alpha) continue;
        visited[adj] = true;
        frontier.push_back(adj);
      }
    }
    std::sort(c.pids.begin(), c.pids.end());
    clumps.push_back(std::move(c));
  }
  return clumps;
}

}  // namespace lion
