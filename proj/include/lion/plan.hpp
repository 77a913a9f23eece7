#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lion/core.hpp"
#include "lion/heat_graph.hpp"

namespace lion {

// Remastering is far cheaper than migration; the unit costs keep that
// ordering.
struct CostParams {
  double w_r = 1.0;   // remaster unit cost
  double w_m = 10.0;  // migration unit cost
};

enum class ActionKind { AddReplica, Remaster, Migrate, RemoveReplica };

struct ReplicaAction {
  ActionKind kind = ActionKind::Remaster;
  PartitionId partition = 0;
  NodeId node = 0;

  bool operator==(const ReplicaAction&) const = default;
};

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::AddReplica: return "AddReplica";
    case ActionKind::Remaster: return "Remaster";
    case ActionKind::Migrate: return "Migrate";
    case ActionKind::RemoveReplica: return "RemoveReplica";
  }
  return "?";
}

struct ReconfigurationPlan {
  struct Entry {
    Clump clump;
    NodeId dest = 0;
    double cost = 0.0;
  };
  std::vector<Entry> entries;
  double total_cost = 0.0;

  // `clump_id,dest_node,cost` per line.
  std::string serialize() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < entries.size(); ++i)
      os << i << ',' << entries[i].dest << ',' << entries[i].cost << '\n';
    return os.str();
  }
};

// Interim per-(clump, node) costs, filled lazily while dispatching.
struct CostMatrix {
  std::map<std::size_t, std::vector<double>> rows;
};

// Cost of placing clump c on node n under placement p:
//   w_r * sum cnt_r(v,n) + w_m * sum cnt_m(v,n)
// cnt_r(v,n) = 1 + log2(f(v, primary) + 1) when n holds a secondary of v,
// cnt_m(v,n) = 1 when n holds no replica of v; a node already holding the
// primary contributes nothing.
inline double placement_cost(NodeId n, const Clump& c, const PlacementMap& p,
                             const CostParams& params) {
  double remaster_cnt = 0.0;
  double migrate_cnt = 0.0;
  for (PartitionId v : c.pids) {
    NodeId prim = p.primary_of(v);
    if (prim == n) continue;
    if (p.has_replica(v, n)) {
      remaster_cnt += 1.0 + std::log2(p.access_freq(v, prim) + 1.0);
    } else {
      migrate_cnt += 1.0;
    }
  }
  return params.w_r * remaster_cnt + params.w_m * migrate_cnt;
}

// Fills the cost-matrix row for c and returns the cheapest node; ties break
// toward the lower node id.
inline NodeId find_dst_node(const Clump& c, std::size_t clump_idx,
                            const PlacementMap& p, CostMatrix& m_c,
                            const CostParams& params) {
  if (p.node_count() == 0) throw std::invalid_argument("empty cluster");
  std::vector<double>& row = m_c.rows[clump_idx];
  row.assign(p.node_count(), 0.0);
  NodeId best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (NodeId n = 0; n < p.node_count(); ++n) {
    double cost = placement_cost(n, c, p, params);
    row[n] = cost;
    if (cost < best_cost) {
      best_cost = cost;
      best = n;
    }
  }
  return best;
}

namespace detail {

// Smallest-weight clump on the most loaded node whose weight fits the
// load gap; the replacement target is the cheapest idle node.
struct Pick {
  std::size_t entry_idx = 0;
  NodeId to = 0;
  bool found = false;
};

inline Pick pick_clump(const ReconfigurationPlan& plan, const LoadVector& load,
                       const std::vector<NodeId>& overloaded,
                       const std::vector<NodeId>& idle, const PlacementMap& p,
                       const CostParams& params) {
  Pick pick;
  for (NodeId from : overloaded) {
    double gap = load.balance[from] - load.theta;
    // Entries on `from`, smallest weight first.
    std::size_t best_entry = plan.entries.size();
    double best_w = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
      const auto& e = plan.entries[i];
      if (e.dest != from) continue;
      if (e.clump.weight < best_w) {
        best_w = e.clump.weight;
        best_entry = i;
      }
    }
    if (best_entry == plan.entries.size() || best_w > gap) continue;
    double best_cost = std::numeric_limits<double>::infinity();
    NodeId to = 0;
    bool have = false;
    for (NodeId n : idle) {
      double cost = placement_cost(n, plan.entries[best_entry].clump, p, params);
      if (cost < best_cost) {
        best_cost = cost;
        to = n;
        have = true;
      }
    }
    if (!have) continue;
    pick.entry_idx = best_entry;
    pick.to = to;
    pick.found = true;
    return pick;
  }
  return pick;
}

inline void find_oi_nodes(const LoadVector& load, std::vector<NodeId>& overloaded,
                          std::vector<NodeId>& idle) {
  overloaded.clear();
  idle.clear();
  std::vector<NodeId> order(load.balance.size());
  for (NodeId n = 0; n < load.balance.size(); ++n) order[n] = n;
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return load.balance[a] > load.balance[b];
  });
  for (NodeId n : order) {
    if (load.balance[n] > load.theta + 1e-9) overloaded.push_back(n);
    else if (load.balance[n] < load.avg - 1e-9) idle.push_back(n);
  }
}

}  // namespace detail

// Two-phase rearrangement: dispatch every clump to its cheapest node, then
// fine-tune by moving clumps off overloaded nodes onto idle ones until the
// per-node load fits under theta or no qualifying move remains. Unbalanced
// inputs come back as the best-effort plan.
inline ReconfigurationPlan rearrange(const std::vector<Clump>& clumps,
                                     const PlacementMap& p,
                                     const CostParams& params = {},
                                     double epsilon = 0.1,
                                     int step_limit = 5) {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
  ReconfigurationPlan plan;
  CostMatrix m_c;
  LoadVector load(p.node_count(), epsilon);

  // Phase 1: clump dispatching.
  double load_sum = 0.0;
  for (std::size_t i = 0; i < clumps.size(); ++i) {
    ReconfigurationPlan::Entry e;
    e.clump = clumps[i];
    e.dest = find_dst_node(clumps[i], i, p, m_c, params);
    plan.entries.push_back(e);
    load.add(plan.entries.back().dest, clumps[i].weight);
    load_sum += clumps[i].weight;
  }
  load.set_avg(p.node_count() ? load_sum / p.node_count() : 0.0);

  // Phase 2: load fine-tuning.
  bool done = false;
  std::vector<NodeId> overloaded, idle;
  while (!load.balanced() && !done) {
    int step = step_limit;
    detail::find_oi_nodes(load, overloaded, idle);
    if (overloaded.empty() || idle.empty()) break;
    while (!load.balanced() && step > 0) {
      detail::Pick pick = detail::pick_clump(plan, load, overloaded, idle, p, params);
      if (!pick.found) break;
      auto& e = plan.entries[pick.entry_idx];
      load.remove(e.dest, e.clump.weight);
      e.dest = pick.to;
      load.add(e.dest, e.clump.weight);
      detail::find_oi_nodes(load, overloaded, idle);
      if (overloaded.empty() || idle.empty()) step = 0;
      else --step;
    }
    if (step == step_limit) done = true;  // no progress this round
  }

  // Cost accounting against the pre-plan placement.
  plan.total_cost = 0.0;
  for (auto& e : plan.entries) {
    e.cost = placement_cost(e.dest, e.clump, p, params);
    plan.total_cost += e.cost;
  }
  return plan;
}

// Realize a plan as replica actions against placement p. Per partition and
// destination: nothing when the primary is already there; a remaster when a
// secondary is there; an add followed by a remaster otherwise, plus a
// removal of the coldest secondary when the add would exceed replica_max.
inline std::vector<ReplicaAction> plan_to_actions(const ReconfigurationPlan& plan,
                                                  const PlacementMap& p) {
  std::vector<ReplicaAction> actions;
  for (const auto& e : plan.entries) {
    for (PartitionId v : e.clump.pids) {
      NodeId prim = p.primary_of(v);
      if (prim == e.dest) continue;
      if (p.has_replica(v, e.dest)) {
        actions.push_back({ActionKind::Remaster, v, e.dest});
        continue;
      }
      actions.push_back({ActionKind::AddReplica, v, e.dest});
      actions.push_back({ActionKind::Remaster, v, e.dest});
      if (p.live_replica_count(v) + 1 > p.replica_max()) {
        NodeId coldest = 0;
        double coldest_f = std::numeric_limits<double>::infinity();
        for (NodeId s : p.secondaries_of(v)) {
          if (s == e.dest) continue;
          double f = p.access_freq(v, s);
          if (f < coldest_f) {
            coldest_f = f;
            coldest = s;
          }
        }
        actions.push_back({ActionKind::RemoveReplica, v, coldest});
      }
    }
  }
  return actions;
}

// `ACTION kind partition node` per line, consumed by the simulator and by
// golden-file tests.
inline std::string serialize_actions(const std::vector<ReplicaAction>& actions) {
  std::ostringstream os;
  for (const ReplicaAction& a : actions)
    os << "ACTION " << to_string(a.kind) << ' ' << a.partition << ' ' << a.node
       << '\n';
  return os.str();
}

}  // namespace lion
